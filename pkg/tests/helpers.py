import json
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load_fixture(name: str):
    with open(FIXTURES / name) as fh:
        return json.load(fh)
