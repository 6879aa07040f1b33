import numpy as np
import pytest

from fastmapsvm import pipeline, synthetic


@pytest.fixture(scope="session")
def small_train():
    return synthetic.make_dataset(32, 32, seed=11)


@pytest.fixture(scope="session")
def small_test():
    return synthetic.make_dataset(16, 16, seed=12)


@pytest.fixture(scope="session")
def small_model(small_train):
    cfg = pipeline.PipelineConfig(ndim=4, seed=0, C_grid=(1.0,), gamma_grid=("scale",))
    return pipeline.fit(small_train, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
