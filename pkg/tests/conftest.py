import numpy as np
import pytest

from confevade.vm import BOOLEAN, ENUMERATION, REAL, CrossConstraint, FeatureDef, VariabilityModel


def real_model(d, lo=-1e9, hi=1e9):
    """Real-only model whose bounds are wide enough to never matter."""
    return VariabilityModel(tuple(FeatureDef(f"x{i}", REAL, min=lo, max=hi) for i in range(d)))


@pytest.fixture
def small_model():
    feats = (
        FeatureDef("a", BOOLEAN),
        FeatureDef("b", BOOLEAN),
        FeatureDef("c", ENUMERATION, cardinality=7),
        FeatureDef("r", REAL, min=0.0, max=27.64, precision=1e-5),
    )
    return VariabilityModel(feats, (CrossConstraint("requires", "a", "b"),))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
