from pathlib import Path

import pytest

from gridwire.grid.case import load_case_file

CASES_DIR = Path(__file__).resolve().parent.parent / "cases"


@pytest.fixture(scope="session")
def glenrose_case():
    return load_case_file(CASES_DIR / "glenrose.yaml")


@pytest.fixture(scope="session")
def twobus_case():
    return load_case_file(CASES_DIR / "twobus.yaml")


@pytest.fixture
def cases_dir():
    return CASES_DIR
