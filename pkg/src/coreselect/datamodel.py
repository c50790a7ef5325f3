"""Dataset, selection, and configuration types plus their file formats.

The dataset file is delimited text with header ``id,label,f0,...,f{d-1}``,
one row per sample, features printed with 9 significant digits. Selection
results are JSON documents with fields ``method``, ``fraction``, ``seed``,
and ``indices`` (sorted). Both formats are stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from ._util import round_half_away_from_zero

FEATURE_FORMAT = "%.9g"  # decimal text, 9 significant digits


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureDataset:
    """n labeled feature vectors with stable integer sample ids.

    Rows are kept in ascending id order; ids are assigned 0..n-1 at
    generation or ingestion and survive subsetting unchanged, so they give
    every selector a stable tie-breaking substrate. Datasets produced by
    generation or file ingestion cover every class in {0..num_classes-1};
    subsets (splits, core sets) may not.

    Arrays are marked read-only after construction; instances are safe to
    share across concurrent readers.
    """

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    ids: np.ndarray  # (n,) int64, strictly increasing
    num_classes: int

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        ids = np.asarray(self.ids, dtype=np.int64)
        if features.ndim != 2:
            raise ValidationError("features must be a 2-D matrix")
        n = features.shape[0]
        if labels.shape != (n,) or ids.shape != (n,):
            raise ValidationError(
                f"row mismatch: {n} feature rows, {labels.shape[0]} labels, "
                f"{ids.shape[0]} ids"
            )
        if n == 0:
            raise ValidationError("dataset is empty")
        if self.num_classes < 2:
            raise ValidationError("num_classes must be >= 2")
        if not np.all(np.isfinite(features)):
            raise ValidationError("features contain non-finite values")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValidationError(
                f"labels must lie in [0, {self.num_classes}); "
                f"found range [{labels.min()}, {labels.max()}]"
            )
        if np.any(np.diff(ids) <= 0):
            raise ValidationError("ids must be unique and strictly increasing")
        object.__setattr__(self, "features", _freeze(features))
        object.__setattr__(self, "labels", _freeze(labels))
        object.__setattr__(self, "ids", _freeze(ids))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def require_class_coverage(self) -> "FeatureDataset":
        """Raise unless every class in {0..J-1} has at least one sample."""
        counts = self.class_counts()
        missing = np.flatnonzero(counts == 0)
        if missing.size:
            raise ValidationError(f"class {missing[0]} has no samples")
        return self

    def rows_for_ids(self, wanted_ids: np.ndarray) -> np.ndarray:
        """Row positions of the given sample ids (which must all be present)."""
        wanted = np.asarray(wanted_ids, dtype=np.int64)
        pos = np.searchsorted(self.ids, wanted)
        bad = (pos >= len(self)) | (self.ids[np.minimum(pos, len(self) - 1)] != wanted)
        if np.any(bad):
            raise ValidationError(f"unknown sample id {wanted[np.flatnonzero(bad)[0]]}")
        return pos

    def subset(self, wanted_ids: np.ndarray) -> "FeatureDataset":
        """Dataset restricted to the given ids (original ids are kept)."""
        pos = self.rows_for_ids(np.sort(np.asarray(wanted_ids, dtype=np.int64)))
        return FeatureDataset(
            features=self.features[pos],
            labels=self.labels[pos],
            ids=self.ids[pos],
            num_classes=self.num_classes,
        )


@dataclass(frozen=True)
class SelectionResult:
    """A chosen core set: sorted sample ids plus method/fraction/seed provenance."""

    indices: np.ndarray  # sorted int64 sample ids
    fraction: float
    method: str
    seed: int
    scores: "object | None" = None  # optional ScoreTable snapshot

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        if indices.ndim != 1 or indices.size == 0:
            raise ValidationError("selection must contain at least one index")
        if np.any(np.diff(indices) <= 0):
            raise ValidationError("selection indices must be unique and sorted")
        if not (0.0 < self.fraction <= 1.0):
            raise ValidationError(f"fraction must lie in (0, 1], got {self.fraction}")
        object.__setattr__(self, "indices", _freeze(indices))

    def __len__(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class TrainConfig:
    """Training-loop settings. Defaults: Adam at lr 0.001 for 50 epochs,
    batch size 64, core set reselected every 10 epochs."""

    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 64
    reselect_interval: int = 10
    hidden_width: int = 32
    seed: int = 0
    method: str = "jscds"
    fraction: float = 1.0
    warmup_epochs: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not 1 <= self.reselect_interval <= self.epochs:
            raise ValidationError(
                "reselect_interval must lie in [1, epochs], got "
                f"{self.reselect_interval} with epochs={self.epochs}"
            )
        if self.hidden_width < 1:
            raise ValidationError("hidden_width must be >= 1")
        if not (0.0 < self.fraction <= 1.0):
            raise ValidationError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.warmup_epochs < 0:
            raise ValidationError("warmup_epochs must be >= 0")
        if self.warmup_epochs % self.reselect_interval != 0:
            # keeps every recorded reselection epoch a multiple of the interval
            raise ValidationError("warmup_epochs must be a multiple of reselect_interval")

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded synthetic dataset: isotropic Gaussian clouds, one
    per class, with a controlled fraction of uniformly-wrong labels."""

    num_classes: int
    samples_per_class: int
    dims: int
    cluster_spread: float = 1.0
    center_separation: float = 5.0
    label_noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError("num_classes must be >= 2")
        if self.samples_per_class < 1:
            raise ValidationError("samples_per_class must be >= 1")
        if self.dims < 1:
            raise ValidationError("dims must be >= 1")
        if self.dims < self.num_classes:
            raise ValidationError(
                "dims must be >= num_classes (class centers are placed on "
                "scaled coordinate axes)"
            )
        if not self.cluster_spread > 0:
            raise ValidationError("cluster_spread must be > 0")
        if not self.center_separation > 0:
            raise ValidationError("center_separation must be > 0")
        if not 0.0 <= self.label_noise_rate < 1.0:
            raise ValidationError("label_noise_rate must lie in [0, 1)")


def generate_synthetic(spec: SyntheticSpec) -> FeatureDataset:
    """Generate a dataset from the spec; identical specs give identical bits.

    Class j's cloud is an isotropic Gaussian of the requested spread centered
    at ``separation/sqrt(2)`` times coordinate axis j, so every pair of class
    centers sits exactly ``center_separation`` apart. Label noise then flips
    a round(rate * n) subset of samples, chosen without replacement, to a
    class drawn uniformly from the other classes.
    """
    rng = np.random.default_rng(spec.seed)
    J, per, d = spec.num_classes, spec.samples_per_class, spec.dims
    n = J * per

    centers = np.zeros((J, d))
    centers[np.arange(J), np.arange(J)] = spec.center_separation / np.sqrt(2.0)

    labels = np.repeat(np.arange(J, dtype=np.int64), per)
    features = centers[labels] + spec.cluster_spread * rng.standard_normal((n, d))

    num_flips = round_half_away_from_zero(spec.label_noise_rate * n)
    if num_flips:
        flip_rows = rng.choice(n, size=num_flips, replace=False)
        offsets = rng.integers(1, J, size=num_flips)
        labels = labels.copy()
        labels[flip_rows] = (labels[flip_rows] + offsets) % J

    return FeatureDataset(
        features=features,
        labels=labels,
        ids=np.arange(n, dtype=np.int64),
        num_classes=J,
    ).require_class_coverage()


def save_dataset(dataset: FeatureDataset, path) -> None:
    d = dataset.dim
    header = "id,label," + ",".join(f"f{w}" for w in range(d))
    lines = [header]
    for i in range(len(dataset)):
        feats = ",".join(FEATURE_FORMAT % v for v in dataset.features[i])
        lines.append(f"{dataset.ids[i]},{dataset.labels[i]},{feats}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path, num_classes: int | None = None) -> FeatureDataset:
    """Parse a dataset file, reporting the offending line on any defect.

    If ``num_classes`` is omitted it is inferred as ``max(label) + 1``.
    Rows may appear in any id order; they are sorted by id on ingestion.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError("no such file", path=path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ParseError("empty file", path=path, line=1)
    header = lines[0].split(",")
    if len(header) < 3 or header[0] != "id" or header[1] != "label":
        raise ParseError("header must be id,label,f0,...", path=path, line=1)
    d = len(header) - 2

    ids, labels, rows = [], [], []
    seen = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != d + 2:
            raise ParseError(
                f"expected {d + 2} columns, found {len(parts)}", path=path, line=lineno
            )
        try:
            sample_id = int(parts[0])
            label = int(parts[1])
            feats = [float(tok) for tok in parts[2:]]
        except ValueError as exc:
            raise ParseError(f"malformed value ({exc})", path=path, line=lineno) from None
        if sample_id in seen:
            raise ParseError(
                f"duplicate id {sample_id} (first seen on line {seen[sample_id]})",
                path=path,
                line=lineno,
            )
        seen[sample_id] = lineno
        if label < 0:
            raise ParseError(f"negative label {label}", path=path, line=lineno)
        if num_classes is not None and label >= num_classes:
            raise ParseError(
                f"label {label} out of range for {num_classes} classes",
                path=path,
                line=lineno,
            )
        if not all(np.isfinite(feats)):
            raise ParseError("non-finite feature value", path=path, line=lineno)
        ids.append(sample_id)
        labels.append(label)
        rows.append(feats)

    if not ids:
        raise ParseError("no data rows", path=path, line=1)
    order = np.argsort(np.asarray(ids, dtype=np.int64))
    J = num_classes if num_classes is not None else max(labels) + 1
    return FeatureDataset(
        features=np.asarray(rows, dtype=np.float64)[order],
        labels=np.asarray(labels, dtype=np.int64)[order],
        ids=np.asarray(ids, dtype=np.int64)[order],
        num_classes=J,
    ).require_class_coverage()


def save_selection(result: SelectionResult, path) -> None:
    doc = {
        "method": result.method,
        "fraction": result.fraction,
        "seed": result.seed,
        "indices": [int(i) for i in result.indices],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_selection(path) -> SelectionResult:
    path = Path(path)
    if not path.exists():
        raise ParseError("no such file", path=path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", path=path, line=exc.lineno) from None
    for key in ("method", "fraction", "seed", "indices"):
        if key not in doc:
            raise ValidationError(f"selection file missing field '{key}'")
    indices = np.asarray(doc["indices"], dtype=np.int64)
    if indices.size != np.unique(indices).size:
        raise ValidationError("selection file contains duplicate indices")
    return SelectionResult(
        indices=np.sort(indices),
        fraction=float(doc["fraction"]),
        method=str(doc["method"]),
        seed=int(doc["seed"]),
    )


def split_dataset(
    dataset: FeatureDataset,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[FeatureDataset, FeatureDataset, FeatureDataset]:
    """Seeded stratified train/val/test split (8:1:1 by default).

    Each class contributes floor(ratio * class_size) samples to every split;
    the per-class leftovers then go to whichever split is furthest below its
    global target (largest-remainder apportionment of the ratios over n),
    except that a class whose train share floored to zero sends its first
    leftover to train. The train split therefore always covers every class;
    val/test may miss classes only when the dataset is too small to fill
    them. Deterministic per seed.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or ratios[0] <= 0:
        raise ValidationError("ratios must be three nonnegative reals with train > 0")
    total = sum(ratios)
    if not total > 0:
        raise ValidationError("ratios must sum to a positive value")

    n = len(dataset)
    global_shares = np.array([r / total * n for r in ratios])
    targets = np.floor(global_shares).astype(int)
    for k in np.argsort(-(global_shares - targets), kind="stable")[: n - targets.sum()]:
        targets[k] += 1

    rng = np.random.default_rng(seed)
    allocated = np.zeros(3, dtype=int)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in range(dataset.num_classes):
        cls_ids = dataset.ids[dataset.labels == cls]
        if cls_ids.size == 0:
            continue
        cls_ids = rng.permutation(cls_ids)
        shares = np.array([r / total * cls_ids.size for r in ratios])
        counts = np.floor(shares).astype(int)
        leftover = cls_ids.size - counts.sum()
        forced_train = counts[0] == 0 and leftover > 0
        if forced_train:
            counts[0] += 1
            leftover -= 1
        if leftover > 0:
            remainders = shares - np.floor(shares)
            if forced_train:
                remainders[0] = -1.0  # train already took its leftover
            deficit = (targets - (allocated + counts)) / np.maximum(targets, 1)
            order = sorted(range(3), key=lambda k: (-remainders[k], -deficit[k], k))
            for k in order[:leftover]:
                counts[k] += 1
        allocated += counts
        stops = np.cumsum(counts)
        parts[0].append(cls_ids[: stops[0]])
        parts[1].append(cls_ids[stops[0] : stops[1]])
        parts[2].append(cls_ids[stops[1] : stops[2]])

    out = []
    for chunk in parts:
        split_ids = np.concatenate(chunk) if chunk else np.empty(0, dtype=np.int64)
        if split_ids.size == 0:
            raise ValidationError("a split received no samples; dataset too small for ratios")
        out.append(dataset.subset(split_ids))
    return tuple(out)
