import pytest

from pathlib import Path

from shopdialog.catalog import load_catalog
from shopdialog.engine import load_policy
from shopdialog.ontology import load_ontology
from shopdialog.realizer import load_templates

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def catalog():
    return load_catalog(DATA / "scenes.json", DATA / "metadata.json")


@pytest.fixture(scope="session")
def scenes(catalog):
    return catalog[0]


@pytest.fixture(scope="session")
def metadata(catalog):
    return catalog[1]


@pytest.fixture(scope="session")
def ontology():
    return load_ontology(DATA / "ontology.json")


@pytest.fixture(scope="session")
def policy():
    return load_policy(DATA / "policy.json")


@pytest.fixture(scope="session")
def templates():
    return load_templates(DATA / "templates.json")
