import pytest

from cocycle_lab import (
    SampleGrid,
    default_base_points,
    default_vectors,
    diag_integral_model,
    pure_exponential_model,
    sin_scalar_model,
)


def grid_for(xi, times):
    return SampleGrid.create(times, default_base_points(xi), default_vectors(xi.dimension))


@pytest.fixture(scope="session")
def full_times():
    """The default CLI grid: 0 to 16 in steps of 0.25."""
    return [0.25 * k for k in range(65)]


@pytest.fixture(scope="session")
def short_times():
    """A coarse grid for unit tests where cubic sample counts would hurt."""
    return [0.0, 0.5, 1.0, 1.75, 2.5, 3.25, 4.0, 5.0, 6.25, 8.0]


@pytest.fixture(scope="session")
def sin_model():
    return sin_scalar_model()


@pytest.fixture(scope="session")
def diag_model():
    return diag_integral_model([1.0, -1.0])


@pytest.fixture(scope="session")
def pexp3_model():
    return pure_exponential_model(3.0)
