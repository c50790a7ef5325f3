"""Pure-numpy implementations of the hot kernels.

These are the reference semantics; the Cython module in ``_core.pyx``
mirrors them exactly (including tie-breaking) and differs only in
summation order at the level of float rounding.
"""

import numpy as np


def jsd_to_centers(dists: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Jensen-Shannon divergence of each row against its class center.

    ``dists`` (n, d) and ``centers`` (J, d) must hold valid probability rows
    with every entry strictly positive (the epsilon floor upstream
    guarantees this, so the logs here are safe).
    """
    c = centers[labels]
    g = 0.5 * (dists + c)
    log_g = np.log(g)
    left = np.einsum("ij,ij->i", dists, np.log(dists) - log_g)
    right = np.einsum("ij,ij->i", c, np.log(c) - log_g)
    return 0.5 * (left + right)


def kcenter_greedy(points: np.ndarray, k: int, start: int = 0) -> np.ndarray:
    """Greedy max-min cover over rows of ``points`` in Euclidean space.

    Starts from row ``start`` and repeatedly adds the row farthest from the
    selected set, until k rows are chosen. Ordering uses squared distances
    (monotone in the Euclidean distance); argmax ties resolve to the lowest
    row index. Returns row positions in selection order.
    """
    n = points.shape[0]
    selected = np.empty(k, dtype=np.int64)
    selected[0] = start
    min_d2 = np.sum((points - points[start]) ** 2, axis=1)
    min_d2[start] = -1.0  # never re-pick a selected row, even among all-zero distances
    for step in range(1, k):
        nxt = int(np.argmax(min_d2))
        selected[step] = nxt
        d2 = np.sum((points - points[nxt]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2)
        min_d2[nxt] = -1.0
    return selected
