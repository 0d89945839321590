import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def root():
    return ROOT


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("PDCFA_CLI", str(ROOT / "build" / "pdcfa"))
    if not os.path.exists(path):
        pytest.skip("pdcfa binary not built")
    return path


@pytest.fixture(scope="session")
def schema():
    import json

    return json.loads((ROOT / "schema" / "report.schema.json").read_text())
