"""Probability normalization and Kullback-Leibler / Jensen-Shannon kernels.

All divergences use the natural logarithm, so the Jensen-Shannon divergence
of two distributions lies in [0, ln 2]. Distributions are plain float64
arrays whose entries are at least ``EPSILON_FLOOR`` and sum to 1; the floor
exists purely to guard ``log`` against denormal underflow (softmax output is
strictly positive analytically) and is reapplied after every normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericError, ShapeError, ValidationError, ConfigurationError

EPSILON_FLOOR = 1e-12
SUM_TOLERANCE = 1e-9
LN2 = float(np.log(2.0))


def _floor_and_renormalize(values: np.ndarray) -> np.ndarray:
    clipped = np.maximum(values, EPSILON_FLOOR)
    normalized = clipped / clipped.sum(axis=-1, keepdims=True)
    # renormalizing can push a floored entry a hair under the floor again;
    # clamping once more costs at most d * floor of mass, far inside the
    # 1e-9 sum tolerance
    return np.maximum(normalized, EPSILON_FLOOR)


def as_distribution(values) -> np.ndarray:
    """Turn nonnegative weights into a valid distribution (floor + normalize)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError("expected a nonempty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise NumericError("weights contain non-finite values")
    if np.any(v < 0):
        raise ValidationError("weights must be nonnegative")
    if v.sum() <= 0:
        raise ValidationError("weights must have positive total mass")
    return _floor_and_renormalize(v)


def validate_distribution(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ShapeError("expected a nonempty 1-D vector")
    if not np.all(np.isfinite(p)):
        raise NumericError("distribution contains non-finite values")
    if np.any(p < EPSILON_FLOOR):
        raise ValidationError(f"distribution entries must be >= {EPSILON_FLOOR}")
    if abs(p.sum() - 1.0) > SUM_TOLERANCE:
        raise ValidationError(f"distribution sums to {p.sum()!r}, not 1")
    return p


def softmax(v) -> np.ndarray:
    """Softmax of a real vector, computed as exp(v - max(v)) / sum.

    Subtracting the maximum makes the result invariant under adding a
    constant to every entry and keeps the exponentials in range.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError("softmax expects a nonempty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise NumericError("softmax input contains non-finite values")
    e = np.exp(v - v.max())
    return _floor_and_renormalize(e)


def softmax_matrix(rows) -> np.ndarray:
    """Row-wise softmax; each output row is a valid floored distribution."""
    m = np.ascontiguousarray(rows, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ShapeError("expected a nonempty 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise NumericError("softmax input contains non-finite values")
    e = np.exp(m - m.max(axis=1, keepdims=True))
    return _floor_and_renormalize(e)


def kl(p, q) -> float:
    """Kullback-Leibler divergence sum_w p(w) ln(p(w) / q(w)).

    Terms with p(w) == 0 contribute zero by convention (redundant with the
    epsilon floor, which keeps entries strictly positive anyway).
    """
    p = validate_distribution(p)
    q = validate_distribution(q)
    if p.shape != q.shape:
        raise ShapeError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    terms = np.where(p > 0.0, p * (np.log(np.maximum(p, EPSILON_FLOOR)) - np.log(q)), 0.0)
    return float(terms.sum())


def jsd(p, q) -> float:
    """Jensen-Shannon divergence: the mean KL of p and q to their midpoint.

    Symmetric in its arguments and bounded by [0, ln 2].
    """
    p = validate_distribution(p)
    q = validate_distribution(q)
    if p.shape != q.shape:
        raise ShapeError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    g = 0.5 * (p + q)
    return 0.5 * kl(p, g) + 0.5 * kl(q, g)


@dataclass(frozen=True)
class ScoreTable:
    """Per-sample scalar scores keyed by sample id.

    ``higher_is`` records what a larger score means for the producing
    method ("ambiguous" for divergence scores, "peripheral" for centroid
    distances, "forgettable" for forgetting counts); ordering decisions are
    made by the selectors, not here.
    """

    ids: np.ndarray  # (n,) int64
    values: np.ndarray  # (n,) float64
    method: str
    higher_is: str

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if ids.ndim != 1 or ids.shape != values.shape:
            raise ShapeError("ids and values must be 1-D and aligned")
        if ids.size and np.unique(ids).size != ids.size:
            raise ValidationError("score table ids must be unique")
        if not np.all(np.isfinite(values)):
            raise ValidationError("scores must be finite")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.ids.size

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.ids, self.values)}


def mi_scores(distributions, labels, centers, ids=None) -> ScoreTable:
    """Score every sample by the JSD between its distribution and the center
    of its labeled class.

    ``centers`` may be a ClusterCenterSet or a (J, d) array of center
    distributions. Scores near zero mark prototypical samples; large scores
    mark samples whose distribution strays from their class center.
    """
    dists = np.ascontiguousarray(distributions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    center_rows = np.ascontiguousarray(getattr(centers, "centers", centers), dtype=np.float64)
    if dists.ndim != 2 or center_rows.ndim != 2:
        raise ShapeError("distributions and centers must be 2-D")
    if labels.shape != (dists.shape[0],):
        raise ShapeError("labels must align with distribution rows")
    if dists.shape[1] != center_rows.shape[1]:
        raise ShapeError(
            f"dimension mismatch: samples have {dists.shape[1]} entries, "
            f"centers {center_rows.shape[1]}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= center_rows.shape[0]):
        raise ConfigurationError(
            f"label {labels.max()} has no center (only {center_rows.shape[0]} available)"
        )
    if ids is None:
        ids = np.arange(dists.shape[0], dtype=np.int64)
    values = _kernels.jsd_to_centers(dists, center_rows, labels)
    return ScoreTable(ids=np.asarray(ids, dtype=np.int64), values=values,
                      method="jscds", higher_is="ambiguous")
