"""Shared fixtures for the analyzer test suite"""

import os
import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.testgen import (  # noqa: E402
    coin_choice_mdp,
    plain_cycle_chain,
    shifted_cycle_chain,
    two_bscc_chain,
    zero_gap_chain,
)
from src.utils.cache_manager import solver_cache  # noqa: E402

CORPUS = Path(__file__).resolve().parent.parent / 'corpus'


@pytest.fixture(autouse=True)
def fresh_cache():
    solver_cache.clear_cache()
    yield


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture
def two_bscc():
    return two_bscc_chain()


@pytest.fixture
def plain_cycle():
    return plain_cycle_chain()


@pytest.fixture
def shifted_cycle():
    return shifted_cycle_chain()


@pytest.fixture
def zero_gap():
    return zero_gap_chain()


@pytest.fixture
def coin_choice():
    return coin_choice_mdp()
