"""Core-set selectors.

The in-house method ("jscds") softmax-normalizes embeddings, averages them
per class into cluster centers, scores every sample by the Jensen-Shannon
divergence to its class center, and keeps the samples whose scores sit
closest to the mean score. Alongside it: uniform random sampling, a
median-distance band per class ("moderate"), greedy max-min cover
("kcenter_greedy"), and forgetting-event counting ("forgetting").

Every selector is a pure function returning exactly ``max(1, round(γ·n))``
unique sample ids, with round-half-away-from-zero and all ties resolved
toward the smaller id.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .datamodel import FeatureDataset, SelectionResult
from .divergence import ScoreTable, mi_scores, softmax_matrix
from .errors import ConfigurationError, ParseError, ShapeError, ValidationError
from ._util import round_half_away_from_zero

JSCDS_MODES = ("closest_avg", "rank_window")


@dataclass(frozen=True)
class ClusterCenterSet:
    """One center distribution per class: the arithmetic mean of the class's
    sample distributions (a convex combination, hence itself a distribution),
    plus the sample counts that went into each mean."""

    centers: np.ndarray  # (J, d) float64
    counts: np.ndarray  # (J,) int64

    def __post_init__(self):
        centers = np.ascontiguousarray(self.centers, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if centers.ndim != 2 or counts.shape != (centers.shape[0],):
            raise ShapeError("centers must be (J, d) with J counts")
        if np.any(counts < 1):
            raise ConfigurationError(f"class {int(np.argmin(counts))} has no samples")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "counts", counts)

    @property
    def num_classes(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class EpochTrace:
    """Per-sample correctness flags across the epochs of a training run."""

    ids: np.ndarray  # (n,) int64, strictly increasing
    correctness: np.ndarray  # (n, E) uint8 of 0/1 flags

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        correctness = np.asarray(self.correctness, dtype=np.uint8)
        if ids.ndim != 1 or correctness.ndim != 2 or correctness.shape[0] != ids.size:
            raise ShapeError("correctness must be (n, epochs) aligned with ids")
        if correctness.shape[1] < 1:
            raise ValidationError("trace must cover at least one epoch")
        if ids.size == 0:
            raise ValidationError("trace is empty")
        if np.any(np.diff(ids) <= 0):
            raise ValidationError("trace ids must be unique and strictly increasing")
        if np.any(correctness > 1):
            raise ValidationError("correctness flags must be 0 or 1")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "correctness", correctness)

    @property
    def num_epochs(self) -> int:
        return self.correctness.shape[1]

    def restrict_to(self, wanted_ids: np.ndarray) -> "EpochTrace":
        wanted = np.sort(np.asarray(wanted_ids, dtype=np.int64))
        pos = np.searchsorted(self.ids, wanted)
        bad = (pos >= self.ids.size) | (self.ids[np.minimum(pos, self.ids.size - 1)] != wanted)
        if np.any(bad):
            raise ValidationError(
                f"trace does not cover sample id {wanted[np.flatnonzero(bad)[0]]}"
            )
        return EpochTrace(ids=wanted, correctness=self.correctness[pos])


def save_trace(trace: EpochTrace, path) -> None:
    header = "id," + ",".join(f"e{t}" for t in range(trace.num_epochs))
    lines = [header]
    for i in range(trace.ids.size):
        flags = ",".join(str(int(v)) for v in trace.correctness[i])
        lines.append(f"{trace.ids[i]},{flags}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_trace(path) -> EpochTrace:
    path = Path(path)
    if not path.exists():
        raise ParseError("no such file", path=path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("id,"):
        raise ParseError("header must be id,e0,e1,...", path=path, line=1)
    width = len(lines[0].split(",")) - 1
    ids, rows = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != width + 1:
            raise ParseError(
                f"expected {width + 1} columns, found {len(parts)}", path=path, line=lineno
            )
        try:
            ids.append(int(parts[0]))
            flags = [int(tok) for tok in parts[1:]]
        except ValueError as exc:
            raise ParseError(f"malformed value ({exc})", path=path, line=lineno) from None
        if any(f not in (0, 1) for f in flags):
            raise ParseError("correctness flags must be 0 or 1", path=path, line=lineno)
        rows.append(flags)
    if not ids:
        raise ParseError("no data rows", path=path, line=1)
    order = np.argsort(np.asarray(ids, dtype=np.int64))
    return EpochTrace(
        ids=np.asarray(ids, dtype=np.int64)[order],
        correctness=np.asarray(rows, dtype=np.uint8)[order],
    )


def core_set_size(fraction: float, n: int) -> int:
    """Budget k = max(1, round(fraction * n)), halves rounding away from zero."""
    if not (0.0 < fraction <= 1.0):
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    if n < 1:
        raise ValidationError("n must be >= 1")
    return max(1, round_half_away_from_zero(fraction * n))


def cluster_centers(distributions, labels, num_classes: int | None = None) -> ClusterCenterSet:
    """Per-class arithmetic mean of sample distributions.

    Every class in {0..J-1} must contribute at least one sample.
    """
    dists = np.ascontiguousarray(distributions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if dists.ndim != 2 or labels.shape != (dists.shape[0],):
        raise ShapeError("distributions must be (n, d) with n labels")
    J = int(labels.max()) + 1 if num_classes is None else int(num_classes)
    if labels.min() < 0 or labels.max() >= J:
        raise ConfigurationError(f"label {labels.max()} out of range for {J} classes")
    counts = np.bincount(labels, minlength=J)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ConfigurationError(f"class {int(empty[0])} has no samples")
    sums = np.zeros((J, dists.shape[1]))
    np.add.at(sums, labels, dists)
    return ClusterCenterSet(centers=sums / counts[:, None], counts=counts)


def avg_mi(scores: ScoreTable) -> float:
    """Arithmetic mean of all scores in the table."""
    if len(scores) == 0:
        raise ValidationError("cannot average an empty score table")
    return float(scores.values.mean())


def _check_embeddings(dataset: FeatureDataset, embeddings) -> np.ndarray:
    emb = np.ascontiguousarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] != len(dataset):
        raise ShapeError(
            f"embeddings must be 2-D with {len(dataset)} rows, got {emb.shape}"
        )
    return emb


def _quotas_by_largest_remainder(class_counts: np.ndarray, fraction: float, k: int) -> np.ndarray:
    """Per-class budgets summing exactly to k, proportional to class sizes.

    Floor of fraction*count per class, then leftovers go to the largest
    fractional remainders (ties to the smaller class id). Never exceeds a
    class's size; requires k <= total samples.
    """
    counts = np.asarray(class_counts, dtype=np.int64)
    shares = fraction * counts.astype(np.float64)
    quotas = np.minimum(np.floor(shares).astype(np.int64), counts)
    deficit = k - int(quotas.sum())
    order = np.lexsort((np.arange(counts.size), -(shares - np.floor(shares))))
    while deficit > 0:
        progressed = False
        for cls in order:
            if deficit == 0:
                break
            if quotas[cls] < counts[cls]:
                quotas[cls] += 1
                deficit -= 1
                progressed = True
        if not progressed:
            raise ValidationError("selection budget exceeds available samples")
    return quotas


def _take_closest(ids: np.ndarray, deviations: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k smallest deviations, ties to the smaller id."""
    order = np.lexsort((ids, deviations))
    return ids[order[:k]]


def select_jscds(
    dataset: FeatureDataset,
    embeddings,
    fraction: float,
    seed: int = 0,
    *,
    mode: str = "closest_avg",
    stratified: bool = False,
) -> SelectionResult:
    """Average-divergence band selection over softmaxed embeddings.

    Pipeline: softmax each embedding row into a distribution, average the
    distributions per class into cluster centers, score every sample by the
    JSD to its class center, and take the mean score as the anchor. The
    default mode keeps the k samples minimizing |score - anchor|. The
    "rank_window" mode instead sorts scores descending and keeps the middle
    k ranks (equal trim of both tails). ``stratified=True`` apportions k
    over classes by largest remainder and applies the mode within each
    class against the same global anchor.

    The method itself is deterministic; the seed is only recorded.
    """
    if mode not in JSCDS_MODES:
        raise ValidationError(f"unknown jscds mode {mode!r}; expected one of {JSCDS_MODES}")
    emb = _check_embeddings(dataset, embeddings)
    n = len(dataset)
    k = core_set_size(fraction, n)

    probs = softmax_matrix(emb)
    centers = cluster_centers(probs, dataset.labels, dataset.num_classes)
    table = mi_scores(probs, dataset.labels, centers, ids=dataset.ids)
    anchor = avg_mi(table)

    def pick(ids, values, budget):
        if mode == "closest_avg":
            return _take_closest(ids, np.abs(values - anchor), budget)
        order = np.lexsort((ids, -values))  # descending score, ties to smaller id
        head = (ids.size - budget) // 2
        return ids[order[head : head + budget]]

    if stratified:
        counts = dataset.class_counts()
        quotas = _quotas_by_largest_remainder(counts, fraction, k)
        chunks = []
        for cls in range(dataset.num_classes):
            if quotas[cls] == 0:
                continue
            rows = np.flatnonzero(dataset.labels == cls)
            chunks.append(pick(dataset.ids[rows], table.values[rows], int(quotas[cls])))
        chosen = np.concatenate(chunks)
    else:
        chosen = pick(dataset.ids, table.values, k)

    return SelectionResult(
        indices=np.sort(chosen), fraction=fraction, method="jscds", seed=seed, scores=table
    )


def select_random(dataset: FeatureDataset, fraction: float, seed: int = 0) -> SelectionResult:
    """Uniform sampling without replacement, deterministic per seed."""
    k = core_set_size(fraction, len(dataset))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(dataset.ids, size=k, replace=False)
    return SelectionResult(
        indices=np.sort(chosen), fraction=fraction, method="random", seed=seed
    )


def select_moderate(
    dataset: FeatureDataset, embeddings, fraction: float, seed: int = 0
) -> SelectionResult:
    """Median-distance band selection, class by class.

    Each sample is scored by the Euclidean distance between its raw
    embedding and its class's mean embedding. Within each class the quota
    (largest-remainder share of k) goes to the samples whose distances lie
    closest to the class's median distance, i.e. a band around the middle
    of the distance ordering; ties break to the smaller id. The median of
    an even-sized class is its lower middle order statistic, not the usual
    two-element average: anchoring on an actual sample's distance keeps
    mathematically tied samples exactly tied in floating point, so the
    id tie-break stays reproducible across reimplementations.
    Deterministic; the seed is only recorded.
    """
    emb = _check_embeddings(dataset, embeddings)
    n = len(dataset)
    k = core_set_size(fraction, n)

    counts = dataset.class_counts()
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ConfigurationError(f"class {int(missing[0])} has no samples")
    quotas = _quotas_by_largest_remainder(counts, fraction, k)

    distances = np.empty(n)
    chunks = []
    for cls in range(dataset.num_classes):
        rows = np.flatnonzero(dataset.labels == cls)
        centroid = emb[rows].mean(axis=0)
        cls_dist = np.sqrt(np.sum((emb[rows] - centroid) ** 2, axis=1))
        distances[rows] = cls_dist
        if quotas[cls] == 0:
            continue
        median = np.sort(cls_dist)[(cls_dist.size - 1) // 2]  # lower middle
        chunks.append(
            _take_closest(dataset.ids[rows], np.abs(cls_dist - median), int(quotas[cls]))
        )

    table = ScoreTable(
        ids=dataset.ids, values=distances, method="moderate", higher_is="peripheral"
    )
    return SelectionResult(
        indices=np.sort(np.concatenate(chunks)),
        fraction=fraction,
        method="moderate",
        seed=seed,
        scores=table,
    )


def select_kcenter_greedy(
    dataset: FeatureDataset, embeddings, fraction: float, seed: int = 0
) -> SelectionResult:
    """Greedy max-min cover in raw embedding space.

    Starts from the sample with the smallest id and repeatedly adds the
    sample farthest (Euclidean) from the selected set; argmax ties break to
    the smaller id. Deterministic; the seed is only recorded.
    """
    emb = _check_embeddings(dataset, embeddings)
    k = core_set_size(fraction, len(dataset))
    rows = _kernels.kcenter_greedy(emb, k, 0)
    return SelectionResult(
        indices=np.sort(dataset.ids[rows]),
        fraction=fraction,
        method="kcenter_greedy",
        seed=seed,
    )


def forgetting_counts(trace: EpochTrace) -> ScoreTable:
    """Forgetting events per sample: transitions from correct to incorrect.

    Samples never classified correctly in any epoch count as maximally
    forgettable; they get the finite sentinel ``num_epochs``, which exceeds
    the largest achievable transition count (num_epochs - 1) and so sorts
    above every genuinely observed count.
    """
    flags = trace.correctness.astype(np.int8)
    if trace.num_epochs >= 2:
        transitions = np.sum((flags[:, :-1] == 1) & (flags[:, 1:] == 0), axis=1)
    else:
        transitions = np.zeros(trace.ids.size, dtype=np.int64)
    never_correct = ~np.any(flags == 1, axis=1)
    values = transitions.astype(np.float64)
    values[never_correct] = float(trace.num_epochs)
    return ScoreTable(
        ids=trace.ids, values=values, method="forgetting", higher_is="forgettable"
    )


def _select_most_forgotten(
    dataset: FeatureDataset, table: ScoreTable, fraction: float, seed: int
) -> SelectionResult:
    k = core_set_size(fraction, len(dataset))
    order = np.lexsort((table.ids, -table.values))  # most forgotten first, ties to smaller id
    return SelectionResult(
        indices=np.sort(table.ids[order[:k]]),
        fraction=fraction,
        method="forgetting",
        seed=seed,
        scores=table,
    )


def select_forgetting(
    dataset: FeatureDataset, trace: EpochTrace, fraction: float, seed: int = 0
) -> SelectionResult:
    """Keep the samples with the most forgetting events (see
    ``forgetting_counts``); requires a trace of at least two epochs covering
    every dataset id."""
    if trace.num_epochs < 2:
        raise ValidationError("forgetting selection needs a trace of >= 2 epochs")
    table = forgetting_counts(trace.restrict_to(dataset.ids))
    return _select_most_forgotten(dataset, table, fraction, seed)


def select_full(dataset: FeatureDataset, fraction: float = 1.0, seed: int = 0) -> SelectionResult:
    """No pruning: every sample id, regardless of fraction."""
    return SelectionResult(
        indices=dataset.ids.copy(), fraction=fraction, method="full", seed=seed
    )


METHODS = ("full", "random", "jscds", "moderate", "kcenter_greedy", "forgetting")
_ALIASES = {"kcenter": "kcenter_greedy", "kcentergreedy": "kcenter_greedy"}


def normalize_method(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in METHODS:
        raise ValidationError(f"unknown method {name!r}; expected one of {METHODS}")
    return key


def select(
    method: str,
    dataset: FeatureDataset,
    fraction: float,
    seed: int = 0,
    *,
    embeddings=None,
    trace: EpochTrace | None = None,
    jscds_mode: str = "closest_avg",
    stratified: bool = False,
) -> SelectionResult:
    """Dispatch to a selector by name.

    Embedding-based methods fall back to the raw features when no
    embeddings are supplied; "forgetting" requires a trace.
    """
    method = normalize_method(method)
    if method == "full":
        return select_full(dataset, fraction, seed)
    if method == "random":
        return select_random(dataset, fraction, seed)
    if method == "forgetting":
        if trace is None:
            raise ConfigurationError("forgetting selection requires an epoch trace")
        return select_forgetting(dataset, trace, fraction, seed)
    emb = dataset.features if embeddings is None else embeddings
    if method == "jscds":
        return select_jscds(
            dataset, emb, fraction, seed, mode=jscds_mode, stratified=stratified
        )
    if method == "moderate":
        return select_moderate(dataset, emb, fraction, seed)
    return select_kcenter_greedy(dataset, emb, fraction, seed)


def make_training_selector(
    method: str,
    fraction: float,
    seed: int,
    *,
    jscds_mode: str = "closest_avg",
    stratified: bool = False,
):
    """Adapter for the training loop: a callable(dataset, embeddings, trace,
    seed=None). The per-call seed (the trainer passes one per reselection
    event) lets seeded selectors draw fresh subsets at each event; when it
    is omitted the construction-time seed applies.

    For "forgetting" before any epoch has been recorded, the adapter
    returns the lowest-k-ids selection, which is the tie-break outcome of
    all-equal forgetting counts; with at least one recorded epoch it scores
    the trace collected so far.
    """
    method = normalize_method(method)
    default_seed = seed

    def run(
        dataset: FeatureDataset,
        embeddings,
        trace: EpochTrace | None,
        seed: int | None = None,
    ) -> SelectionResult:
        event_seed = default_seed if seed is None else seed
        if method == "forgetting":
            if trace is None or trace.num_epochs < 1:
                k = core_set_size(fraction, len(dataset))
                return SelectionResult(
                    indices=dataset.ids[:k].copy(),
                    fraction=fraction,
                    method="forgetting",
                    seed=event_seed,
                )
            table = forgetting_counts(trace.restrict_to(dataset.ids))
            return _select_most_forgotten(dataset, table, fraction, event_seed)
        return select(
            method,
            dataset,
            fraction,
            event_seed,
            embeddings=embeddings,
            jscds_mode=jscds_mode,
            stratified=stratified,
        )

    return run
