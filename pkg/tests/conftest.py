from __future__ import annotations

from pathlib import Path

import pytest

from pcdkit.corpus import Corpus, load_corpus_dir

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def consistent_corpus() -> Corpus:
    return load_corpus_dir(FIXTURES / "corpus_consistent")


@pytest.fixture()
def inconsistent_corpus() -> Corpus:
    return load_corpus_dir(FIXTURES / "corpus_inconsistent")


@pytest.fixture(scope="session")
def sharc_fixture_path() -> Path:
    return FIXTURES / "sharc_small.json"
