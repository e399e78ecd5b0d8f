import os

import pytest

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")


@pytest.fixture(scope="session")
def pacman_fixture(tmp_path_factory):
    """Scripted-player demonstration archive (deterministic, cached per repo)."""
    from deskrl.fixtures import ensure_fixture

    root = os.environ.get("DESKRL_FIXTURES", "fixtures")
    return ensure_fixture("minipacman", root)


@pytest.fixture(scope="session")
def pong_fixture():
    from deskrl.fixtures import ensure_fixture

    root = os.environ.get("DESKRL_FIXTURES", "fixtures")
    return ensure_fixture("minipong", root)
