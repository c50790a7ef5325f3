import numpy as np
import pytest

from coreselect import FeatureDataset


def make_dataset(features, labels, num_classes=None, ids=None):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    if ids is None:
        ids = np.arange(len(labels), dtype=np.int64)
    return FeatureDataset(
        features=features, labels=labels, ids=np.asarray(ids, dtype=np.int64),
        num_classes=num_classes,
    )


def random_dataset(rng, n, d, num_classes):
    """Random dataset with every class guaranteed at least one sample."""
    labels = rng.integers(0, num_classes, size=n)
    labels[:num_classes] = np.arange(num_classes)  # coverage
    return make_dataset(rng.standard_normal((n, d)), labels, num_classes)


def random_distribution(rng, d):
    weights = rng.random(d) + 1e-6
    p = np.maximum(weights / weights.sum(), 1e-12)
    return p / p.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20240911)
