"""Grid benchmark: methods x fractions x seeds, with a full-data reference.

Each cell splits the dataset 8:1:1 (train/val/test, seeded per cell seed),
trains with periodic reselection, and scores the test split. Results
separate into a deterministic report (metrics, provenance, plot series)
and a timing table (wall-clock values vary run to run and are therefore
kept out of the reproducible payload).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import FeatureDataset, TrainConfig, split_dataset
from .errors import ValidationError
from .trainer import ClassifierState, TrainReport, train_with_reselection

DEFAULT_FRACTIONS = (0.1, 0.3, 0.5, 0.7)
METRIC_KEYS = ("acc", "precision_macro", "recall_macro", "f1_macro", "specificity_macro")
SPLIT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class BenchmarkGrid:
    """The sweep to run: selector names, kept fractions, seeds, and the
    training configuration template applied to every cell."""

    methods: tuple[str, ...]
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    seeds: tuple[int, ...] = (0,)
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.methods or not self.fractions or not self.seeds:
            raise ValidationError("grid lists must be non-empty")
        for f in self.fractions:
            if not (0.0 < f <= 1.0):
                raise ValidationError(f"fraction must lie in (0, 1], got {f}")


@dataclass
class CellResult:
    method: str
    fraction: float
    seed: int
    status: str  # "ok" | "failed"
    metrics: dict | None = None
    core_size: int | None = None
    reselect_epochs: list[int] | None = None
    error: str | None = None
    selection_seconds: float = 0.0
    training_seconds: float = 0.0
    wall_seconds: float = 0.0

    def report_entry(self) -> dict:
        entry = {
            "method": self.method,
            "fraction": self.fraction,
            "seed": self.seed,
            "status": self.status,
        }
        if self.status == "ok":
            entry["metrics"] = self.metrics
            entry["core_size"] = self.core_size
            entry["reselect_epochs"] = self.reselect_epochs
        else:
            entry["error"] = self.error
        return entry

    def timing_entry(self) -> dict:
        return {
            "method": self.method,
            "fraction": self.fraction,
            "seed": self.seed,
            "selection_seconds": self.selection_seconds,
            "training_seconds": self.training_seconds,
            "wall_seconds": self.wall_seconds,
        }


def run_experiment(
    dataset: FeatureDataset, config: TrainConfig, selector=None
) -> tuple[ClassifierState, TrainReport]:
    """Split, train with reselection, and score the test split."""
    train_ds, _val_ds, test_ds = split_dataset(dataset, SPLIT_RATIOS, seed=config.seed)
    return train_with_reselection(train_ds, config, selector=selector, eval_dataset=test_ds)


def _run_cell(dataset: FeatureDataset, method: str, fraction: float, seed: int,
              template: TrainConfig) -> CellResult:
    config = template.with_(method=method, fraction=fraction, seed=seed)
    try:
        _model, rep = run_experiment(dataset, config)
    except Exception as exc:  # recorded, the sweep continues
        return CellResult(method=method, fraction=fraction, seed=seed,
                          status="failed", error=f"{type(exc).__name__}: {exc}")
    return CellResult(
        method=method,
        fraction=fraction,
        seed=seed,
        status="ok",
        metrics=rep.metrics.to_dict(),
        core_size=rep.core_sizes[-1],
        reselect_epochs=list(rep.reselect_epochs),
        selection_seconds=rep.selection_seconds,
        training_seconds=rep.wall_seconds - rep.selection_seconds,
        wall_seconds=rep.wall_seconds,
    )


def _aggregate(cells: list[CellResult]) -> dict | None:
    ok = [c for c in cells if c.status == "ok"]
    if not ok:
        return None
    out = {"n_seeds": len(ok)}
    for key in METRIC_KEYS:
        values = np.array([c.metrics[key] for c in ok])
        out[f"{key}_mean"] = float(values.mean())
        out[f"{key}_std"] = float(values.std())  # population std across seeds
    return out


@dataclass
class BenchmarkResult:
    grid: BenchmarkGrid
    dataset_info: dict
    reference_cells: list[CellResult]
    cells: list[CellResult]

    @property
    def failed(self) -> bool:
        return any(c.status == "failed" for c in self.cells + self.reference_cells)

    def report_dict(self) -> dict:
        """Deterministic payload; byte-stable across identical runs."""
        aggregates = []
        for method in self.grid.methods:
            for fraction in self.grid.fractions:
                group = [c for c in self.cells
                         if c.method == method and c.fraction == fraction]
                agg = _aggregate(group)
                if agg is not None:
                    aggregates.append({"method": method, "fraction": fraction, **agg})
        reference_agg = _aggregate(self.reference_cells)
        return {
            "dataset": self.dataset_info,
            "grid": {
                "methods": list(self.grid.methods),
                "fractions": list(self.grid.fractions),
                "seeds": list(self.grid.seeds),
                "config": {
                    "learning_rate": self.grid.config.learning_rate,
                    "epochs": self.grid.config.epochs,
                    "batch_size": self.grid.config.batch_size,
                    "reselect_interval": self.grid.config.reselect_interval,
                    "hidden_width": self.grid.config.hidden_width,
                    "warmup_epochs": self.grid.config.warmup_epochs,
                },
            },
            "reference": {
                "cells": [c.report_entry() for c in self.reference_cells],
                "aggregate": reference_agg,
            },
            "cells": [c.report_entry() for c in self.cells],
            "aggregates": aggregates,
        }

    def timing_dict(self) -> dict:
        return {
            "reference": [c.timing_entry() for c in self.reference_cells],
            "cells": [c.timing_entry() for c in self.cells],
        }

    def series_rows(self) -> list[dict]:
        """Plot-ready rows: one per (method, fraction) plus the full-data
        reference as method 'full' at fraction 1.0."""
        rows = []
        report = self.report_dict()
        ref = report["reference"]["aggregate"]
        if ref is not None:
            rows.append({"method": "full", "fraction": 1.0, **ref})
        for agg in report["aggregates"]:
            rows.append(agg)
        return rows


def run_benchmark(dataset: FeatureDataset, grid: BenchmarkGrid,
                  dataset_name: str = "") -> BenchmarkResult:
    """Run every cell of the grid; failures are recorded, not raised.

    The full-data reference row is trained once per seed with no pruning.
    """
    reference = [
        _run_cell(dataset, "full", 1.0, seed, grid.config) for seed in grid.seeds
    ]
    cells = [
        _run_cell(dataset, method, fraction, seed, grid.config)
        for method in grid.methods
        for fraction in grid.fractions
        for seed in grid.seeds
    ]
    info = {
        "name": dataset_name,
        "n": len(dataset),
        "dims": dataset.dim,
        "num_classes": dataset.num_classes,
    }
    return BenchmarkResult(
        grid=grid, dataset_info=info, reference_cells=reference, cells=cells
    )
