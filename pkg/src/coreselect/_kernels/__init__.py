"""Numeric kernel backend selection.

The compiled Cython extension is preferred when present; otherwise the
numpy implementations in ``_core_py`` are used. Set the environment
variable ``CORESELECT_BACKEND=python`` (or ``cython``) before import to
force a backend. ``BACKEND`` names whichever was selected.
"""

import os

from . import _core_py

_requested = os.environ.get("CORESELECT_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _core_py
    BACKEND = "python"
elif _requested in ("", "cython"):
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "CORESELECT_BACKEND=cython but the compiled kernels are not "
                "built; reinstall the package or unset the variable"
            ) from None
        _impl = _core_py
        BACKEND = "python"
else:
    raise ValueError(f"unknown CORESELECT_BACKEND value {_requested!r}")

jsd_to_centers = _impl.jsd_to_centers
kcenter_greedy = _impl.kcenter_greedy


def available_backends() -> dict:
    """Map of backend name to kernel module, for parity tests and benchmarks."""
    found = {"python": _core_py}
    try:
        from . import _core  # type: ignore[attr-defined]

        found["cython"] = _core
    except ImportError:
        pass
    return found
