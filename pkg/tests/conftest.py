import pytest

from helpers import FIXTURES


@pytest.fixture
def fixtures_dir():
    return FIXTURES
