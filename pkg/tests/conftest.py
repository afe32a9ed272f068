import numpy as np
import pytest

from snippet_vo.geometry import euler_to_se3
from snippet_vo.io_formats import save_sequence
from snippet_vo.synthetic import reference_snippet, sweep_sequence


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_euler(rng, angle=np.pi, trans=2.0):
    return np.concatenate([rng.uniform(-angle, angle, 3), rng.uniform(-trans, trans, 3)])


def random_pose(rng, angle=np.pi, trans=2.0):
    return euler_to_se3(random_euler(rng, angle, trans))


@pytest.fixture(scope="session")
def ref_snippet():
    return reference_snippet()


@pytest.fixture(scope="session")
def sweep_dir(tmp_path_factory):
    images, depths, world, K = sweep_sequence()
    return save_sequence(tmp_path_factory.mktemp("sweep_seq"), images, depths, world, K)
