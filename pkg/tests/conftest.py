import json
import pathlib

import pytest

from fmkt.market import load_market

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture(name: str) -> dict:
    with open(FIXTURES / name) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def tree1():
    return load_market(load_fixture("tree1.json"))


@pytest.fixture(scope="session")
def treearb():
    return load_market(load_fixture("treearb.json"))


@pytest.fixture(scope="session")
def cds1():
    return load_market(load_fixture("cds1.json"))


@pytest.fixture(scope="session")
def cds1_spec_doc():
    return load_fixture("cds1_spec.json")


@pytest.fixture(scope="session")
def digital_up_doc():
    return load_fixture("digital_up.json")
