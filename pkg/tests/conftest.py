import numpy as np
import pytest

from lus.model import Dataset, ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def random_dataset(rng, n=8, d=2, k=3) -> Dataset:
    """Small dense fixture with every class present."""
    features = rng.normal(size=(n, d))
    labels = np.concatenate([np.arange(1, k + 1), rng.integers(1, k + 1, size=n - k)])
    rng.shuffle(labels)
    return Dataset(features, labels, k)


def random_params(rng, d=2, k=3, scale=0.7) -> ModelParams:
    return ModelParams(rng.normal(scale=scale, size=(k - 1, d + 1)))


def random_simplex(rng, k: int) -> np.ndarray:
    p = rng.dirichlet(np.ones(k))
    return p / p.sum()
