import random

import pytest

from treetrans.corpus import all_trees, random_corpus
from treetrans.trees import EXA_ALPHABET


@pytest.fixture(scope="session")
def small_corpus():
    """All trees over {a:2, b:0} with at most 7 nodes."""
    return list(all_trees(EXA_ALPHABET, 7))


@pytest.fixture(scope="session")
def tiny_corpus():
    return list(all_trees(EXA_ALPHABET, 5))


@pytest.fixture(scope="session")
def random_trees():
    """100 seeded random trees with at most 12 nodes."""
    return random_corpus(EXA_ALPHABET, 12, 100, seed=20240917)


def rng():
    return random.Random(99)
