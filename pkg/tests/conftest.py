import os

import numpy as np
import pytest


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    """Keep simulated critical values out of the user's cache directory."""
    old = os.environ.get("DPCPT_CACHE_DIR")
    os.environ["DPCPT_CACHE_DIR"] = str(tmp_path_factory.mktemp("cv-cache"))
    yield
    if old is None:
        os.environ.pop("DPCPT_CACHE_DIR", None)
    else:
        os.environ["DPCPT_CACHE_DIR"] = old


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
