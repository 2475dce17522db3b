import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from main import app
from src.repository.systems import load_system_file

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def fixture_data(name: str) -> dict:
    return json.loads(fixture_path(name).read_text(encoding="utf-8"))


def load_fixture(name: str):
    return load_system_file(fixture_path(name))


@pytest.fixture(scope="module")
def client():
    yield TestClient(app)


@pytest.fixture()
def kearfott_body():
    return fixture_data("kearfott")


@pytest.fixture()
def mult2d_body():
    return fixture_data("mult2d")


def expected_points(name: str) -> dict[str, np.ndarray]:
    return {key: np.asarray(rows, dtype=float) for key, rows in fixture_data(name).items()}
