import numpy as np
import pytest

from prunekit import Modality, Selection, TokenMatrix, build_similarity


def random_tokens(rng, n, d, modality=Modality.UNSPECIFIED):
    return TokenMatrix.from_rows(rng.standard_normal((n, d)).astype(np.float32), modality)


def all_rows(n):
    return Selection(source_rows=n, indices=tuple(range(n)))


def sim_of(tokens):
    return build_similarity(tokens, all_rows(tokens.rows))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
