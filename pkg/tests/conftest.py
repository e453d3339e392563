import numpy as np
import pytest

from viki.camera import CameraIntrinsics


@pytest.fixture
def K():
    return CameraIntrinsics(lu=600.0, lv=600.0, uc=640.0, vc=360.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
