import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

SAMPLE_PATH = pathlib.Path(__file__).parent / "data" / "sample_records.jsonl"


@pytest.fixture(scope="session")
def sample_path() -> pathlib.Path:
    return SAMPLE_PATH


@pytest.fixture(scope="session")
def sample_records():
    from finprog.corpus import load_records

    loaded = load_records(SAMPLE_PATH)
    assert not loaded.rejects, loaded.rejects
    return loaded.records
