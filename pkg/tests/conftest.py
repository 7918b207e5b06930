import numpy as np
import pytest

from ifsnet import phantom


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_samples():
    """Six 16x16 phantoms, mild corruption: enough signal for smoke training."""
    spec = phantom.PhantomSpec(size=16, noise_sigma=2.0, pv_blur_sigma=0.8, seed=7)
    return phantom.generate(spec, 6)
