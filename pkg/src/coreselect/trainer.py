"""A small two-layer classifier with analytic gradients and a training loop
that periodically reselects its core set.

The network is d_in -> hidden -> J with a relu hidden layer; the hidden
activation doubles as the embedding that selectors score. Training uses
Adam (beta1 0.9, beta2 0.999, eps 1e-8, no weight decay) over shuffled
batches, keeping the last partial batch. Everything is float64, CPU,
single-threaded, and deterministic per seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import FeatureDataset, TrainConfig
from .errors import NumericError, ParseError, ShapeError, ValidationError
from .metrics import MetricsReport, report as metrics_report
from .selection import EpochTrace, make_training_selector

PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass
class ClassifierState:
    """Weights, biases, and the seeded generator that drives batch shuffling."""

    w1: np.ndarray  # (d_in, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, J)
    b2: np.ndarray  # (J,)
    rng: np.random.Generator

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def init_model(d_in: int, hidden_width: int, num_classes: int, seed: int) -> ClassifierState:
    """Seeded init: weights uniform in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    if d_in < 1 or hidden_width < 1 or num_classes < 2:
        raise ValidationError(
            f"dimensions must be positive (num_classes >= 2), got "
            f"d_in={d_in}, hidden_width={hidden_width}, num_classes={num_classes}"
        )
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (d_in + hidden_width))
    lim2 = np.sqrt(6.0 / (hidden_width + num_classes))
    return ClassifierState(
        w1=rng.uniform(-lim1, lim1, size=(d_in, hidden_width)),
        b1=np.zeros(hidden_width),
        w2=rng.uniform(-lim2, lim2, size=(hidden_width, num_classes)),
        b2=np.zeros(num_classes),
        rng=rng,
    )


def _check_features(model: ClassifierState, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d_in:
        raise ShapeError(f"features must be (n, {model.d_in}), got {x.shape}")
    return x


def embed(model: ClassifierState, features) -> np.ndarray:
    """Hidden-layer activations relu(x @ w1 + b1), one row per sample."""
    x = _check_features(model, features)
    return np.maximum(x @ model.w1 + model.b1, 0.0)


def forward(model: ClassifierState, features) -> np.ndarray:
    """Class logits for each sample."""
    return embed(model, features) @ model.w2 + model.b2


def predict(model: ClassifierState, features) -> np.ndarray:
    """Argmax class per sample; ties go to the smaller class id."""
    return np.argmax(forward(model, features), axis=1).astype(np.int64)


def loss_and_grad(model: ClassifierState, features, labels) -> tuple[float, dict]:
    """Mean softmax cross-entropy over the batch and its exact gradients."""
    x = _check_features(model, features)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ShapeError("labels must align with feature rows")
    if y.size == 0:
        raise ValidationError("batch is empty")
    if y.min() < 0 or y.max() >= model.num_classes:
        raise ValidationError(f"label {y.max()} out of range")

    z1 = x @ model.w1 + model.b1
    a1 = np.maximum(z1, 0.0)
    logits = a1 @ model.w2 + model.b2
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite activations in forward pass")

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    batch = x.shape[0]
    log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(batch), y].mean())

    dlogits = probs
    dlogits[np.arange(batch), y] -= 1.0
    dlogits /= batch
    gw2 = a1.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    da1 = dlogits @ model.w2.T
    dz1 = da1 * (z1 > 0.0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2}


class Adam:
    """Adam over a named parameter set; updates arrays in place."""

    def __init__(self, params: dict, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / correct1) / (np.sqrt(self.v[k] / correct2) + self.eps)


@dataclass
class TrainReport:
    """What a training run did: per-epoch loss and core-set size, when the
    core set was reselected, the full-set correctness trace, held-out
    metrics, and wall-clock timings (timings are reported separately from
    the deterministic payload)."""

    losses: list[float]
    core_sizes: list[int]
    reselect_epochs: list[int]
    trace: EpochTrace
    metrics: MetricsReport | None
    wall_seconds: float
    selection_seconds: float

    def to_dict(self) -> dict:
        """Deterministic payload: identical runs give identical dicts."""
        return {
            "losses": [float(v) for v in self.losses],
            "core_sizes": [int(v) for v in self.core_sizes],
            "reselect_epochs": [int(v) for v in self.reselect_epochs],
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
        }

    def timing_dict(self) -> dict:
        return {
            "wall_seconds": float(self.wall_seconds),
            "selection_seconds": float(self.selection_seconds),
            "training_seconds": float(self.wall_seconds - self.selection_seconds),
        }


def train_with_reselection(
    dataset: FeatureDataset,
    config: TrainConfig,
    selector=None,
    eval_dataset: FeatureDataset | None = None,
) -> tuple[ClassifierState, TrainReport]:
    """Train on a periodically reselected core set.

    At every epoch that is a multiple of ``reselect_interval`` (and past any
    warmup), the full training set is embedded with the current model and
    the selector picks a fresh core set at the configured fraction; training
    then proceeds on that subset until the next reselection. Correctness on
    the full training set is recorded after every epoch, whether or not a
    sample is currently in the core set, so forgetting dynamics stay
    well-defined.

    ``selector`` may be a method name, a callable built by
    ``make_training_selector``, or None (use ``config.method``). Each
    reselection event passes seed ``config.seed + epoch`` so that seeded
    selectors draw fresh subsets per event while staying reproducible.
    """
    if isinstance(selector, str) or selector is None:
        selector = make_training_selector(
            selector or config.method, config.fraction, config.seed
        )

    start_time = time.perf_counter()
    model = init_model(dataset.dim, config.hidden_width, dataset.num_classes, config.seed)
    adam = Adam(model.params(), config.learning_rate)

    losses: list[float] = []
    core_sizes: list[int] = []
    reselect_epochs: list[int] = []
    columns: list[np.ndarray] = []
    selection_seconds = 0.0
    core = dataset

    for epoch in range(config.epochs):
        if epoch % config.reselect_interval == 0 and epoch >= config.warmup_epochs:
            tick = time.perf_counter()
            trace_so_far = (
                EpochTrace(ids=dataset.ids, correctness=np.stack(columns, axis=1))
                if columns
                else None
            )
            embeddings = embed(model, dataset.features)
            try:
                chosen = selector(dataset, embeddings, trace_so_far, seed=config.seed + epoch)
            except Exception as exc:
                raise type(exc)(f"selection at epoch {epoch} failed: {exc}") from exc
            selection_seconds += time.perf_counter() - tick
            core = dataset.subset(chosen.indices)
            reselect_epochs.append(epoch)

        core_sizes.append(len(core))
        order = model.rng.permutation(len(core))
        total = 0.0
        for batch_index, start in enumerate(range(0, len(core), config.batch_size)):
            rows = order[start : start + config.batch_size]
            try:
                loss, grads = loss_and_grad(model, core.features[rows], core.labels[rows])
            except NumericError as exc:
                raise NumericError(f"epoch {epoch} batch {batch_index}: {exc}") from exc
            adam.step(model.params(), grads)
            total += loss * rows.size
        losses.append(total / len(core))
        columns.append((predict(model, dataset.features) == dataset.labels).astype(np.uint8))

    trace = EpochTrace(ids=dataset.ids, correctness=np.stack(columns, axis=1))
    metrics = None
    if eval_dataset is not None:
        metrics = metrics_report(
            eval_dataset.labels, predict(model, eval_dataset.features), dataset.num_classes
        )
    wall = time.perf_counter() - start_time
    return model, TrainReport(
        losses=losses,
        core_sizes=core_sizes,
        reselect_epochs=reselect_epochs,
        trace=trace,
        metrics=metrics,
        wall_seconds=wall,
        selection_seconds=selection_seconds,
    )


def save_model(model: ClassifierState, path) -> None:
    """Plain-text model format; values print at full round-trip precision."""
    lines = [
        "coreselect-model v1",
        f"dims {model.d_in} {model.hidden_width} {model.num_classes}",
    ]
    for name in PARAM_NAMES:
        arr = np.atleast_2d(getattr(model, name))
        lines.append(name)
        for row in arr:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> ClassifierState:
    """Inverse of ``save_model``. The restored generator is freshly seeded;
    loaded models serve inference and embedding, not training resumption."""
    path = Path(path)
    if not path.exists():
        raise ParseError("no such file", path=path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "coreselect-model v1":
        raise ParseError("not a coreselect model file", path=path, line=1)
    try:
        _, d_in, hidden, num_classes = lines[1].split()
        d_in, hidden, num_classes = int(d_in), int(hidden), int(num_classes)
    except (IndexError, ValueError):
        raise ParseError("malformed dims line", path=path, line=2) from None

    shapes = {
        "w1": (d_in, hidden),
        "b1": (1, hidden),
        "w2": (hidden, num_classes),
        "b2": (1, num_classes),
    }
    arrays = {}
    cursor = 2
    for name, (rows, cols) in shapes.items():
        if cursor >= len(lines) or lines[cursor] != name:
            raise ParseError(f"expected section '{name}'", path=path, line=cursor + 1)
        cursor += 1
        block = []
        for r in range(rows):
            try:
                values = [float(tok) for tok in lines[cursor].split()]
            except (IndexError, ValueError):
                raise ParseError("malformed parameter row", path=path, line=cursor + 1) from None
            if len(values) != cols:
                raise ParseError(
                    f"expected {cols} values, found {len(values)}", path=path, line=cursor + 1
                )
            block.append(values)
            cursor += 1
        arrays[name] = np.asarray(block, dtype=np.float64)
    return ClassifierState(
        w1=arrays["w1"],
        b1=arrays["b1"][0],
        w2=arrays["w2"],
        b2=arrays["b2"][0],
        rng=np.random.default_rng(0),
    )
