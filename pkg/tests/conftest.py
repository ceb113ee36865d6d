import numpy as np
import pytest

from qmgm.benchmark import DgpVariant, generate_sample
from qmgm.core import Dataset, VariableSpec, validate_and_standardize


@pytest.fixture(scope="session")
def dgp_500():
    """One validated main-variant sample, shared across tests."""
    dataset, truth = generate_sample(DgpVariant("main", 500, 1))
    return validate_and_standardize(dataset), truth


@pytest.fixture()
def tiny_mixed():
    rng = np.random.default_rng(3)
    n = 60
    x = rng.normal(size=n)
    c = rng.poisson(2.0, size=n).astype(float)
    b = (rng.random(n) < 0.4).astype(float)
    values = np.column_stack([x, 0.5 * x + rng.normal(size=n), c, b])
    schema = (VariableSpec("x1", "continuous"), VariableSpec("x2", "continuous"),
              VariableSpec("c1", "count"), VariableSpec("b1", "binary"))
    return Dataset(values, schema)
