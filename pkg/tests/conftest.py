import numpy as np
import pytest

from upkeep import AgentType, TypeDistribution


@pytest.fixture
def lmh():
    """Three-type economy with heterogeneous costs, unit weights."""
    return TypeDistribution(
        (
            AgentType("L", 3.0, 3.0, 1.0),
            AgentType("M", 4.0, 2.0, 1.0),
            AgentType("H", 10.0, 1.25, 1.0),
        )
    )


@pytest.fixture
def equal_cost():
    """Three-type economy with a common cost and spread benefits."""
    return TypeDistribution(
        (
            AgentType("H", 5.0, 1.0, 1.0 / 3.0),
            AgentType("M", 1.0, 1.0, 1.0 / 3.0),
            AgentType("L", 0.1, 1.0, 1.0 / 3.0),
        )
    )


def random_distribution(rng: np.random.Generator, n_min=2, n_max=6) -> TypeDistribution:
    n = int(rng.integers(n_min, n_max + 1))
    return TypeDistribution(
        tuple(
            AgentType(
                f"T{i}",
                float(rng.uniform(0.1, 10.0)),
                float(rng.uniform(0.1, 10.0)),
                float(rng.uniform(0.1, 1.5)),
            )
            for i in range(n)
        )
    )
