import numpy as np
import pytest

from unbounded_de.core import PopulationStore, RngStream, StoreMode
from unbounded_de.models import ObjectiveSpec


def make_store(fitness, mode=StoreMode.APPEND, dimension=2):
    store = PopulationStore(dimension, mode)
    for value in fitness:
        store.add(np.full(dimension, float(value)), float(value))
    return store


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def spec_factory():
    def build(function="sphere", dimension=5, budget=10_000, **kwargs):
        return ObjectiveSpec(function=function, dimension=dimension, budget=budget, **kwargs)

    return build


@pytest.fixture
def sphere5(spec_factory):
    return spec_factory()
