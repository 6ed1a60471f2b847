from __future__ import annotations

import csv
from pathlib import Path

import pytest

from pvaudit import derive_dataset, rank_pvalues
from pvaudit.datasets import load_soy_ldl_studies

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def golden_rows() -> list[dict]:
    """Published per-study values (se, z, p, rank) for the bundled dataset."""
    with open(DATA_DIR / "soy_ldl_golden.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 50
    return rows


@pytest.fixture(scope="session")
def soy():
    """The bundled dataset, derived and ranked with default settings."""
    return rank_pvalues(derive_dataset(load_soy_ldl_studies()))
