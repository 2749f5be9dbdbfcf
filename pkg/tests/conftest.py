import numpy as np
import pytest

from swarmcalc import ConstantPayoff, DriftSpec, SineFeedback


@pytest.fixture
def ehrenfest64():
    return DriftSpec(SineFeedback(0.0), ConstantPayoff(1.0), 64)


@pytest.fixture
def bistable64():
    return DriftSpec(SineFeedback(0.75), ConstantPayoff(1.0), 64)


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
