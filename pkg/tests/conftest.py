from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from siterank.chains import build_counts, popularity_chain, popularity_chain_unpopular, site_chain
from siterank.ingest import align_sessions, anchor_home, read_sessions, read_topology
from siterank.models import ModelKind, TransitionModel

FIXTURES = Path(__file__).parent / "fixtures"

LABELS = ("HP", "A1", "A2", "A3", "A4")
POPULARITY_PI = {"HP": 12 / 49, "A1": 11 / 49, "A2": 9 / 49, "A3": 7 / 49, "A4": 10 / 49}
SITE_PI = {"HP": 25 / 68, "A1": 8 / 68, "A2": 12 / 68, "A3": 14 / 68, "A4": 9 / 68}
SITE_UNPOPULAR_PI = {"HP": 20 / 71, "A1": 12 / 71, "A2": 15 / 71, "A3": 12 / 71, "A4": 12 / 71}


def by_label(pi, labels) -> dict[str, float]:
    return {label: float(p) for label, p in zip(labels, pi)}


def make_model(rows: dict[int, dict[int, float]], n: int, kind=ModelKind.POPULARITY, home: int = 0):
    src, dst, val = [], [], []
    for i, row in rows.items():
        for j, p in row.items():
            src.append(i)
            dst.append(j)
            val.append(p)
    matrix = sp.csr_matrix((val, (src, dst)), shape=(n, n))
    labels = tuple(f"S{i}" for i in range(n))
    return TransitionModel(labels, home, matrix, kind)


def random_stochastic_rows(rng: np.random.Generator, n: int, support: np.ndarray) -> sp.csr_matrix:
    """Random row-stochastic matrix whose support is `support` (boolean n x n)."""
    weights = rng.random((n, n)) * support
    weights /= weights.sum(axis=1, keepdims=True)
    return sp.csr_matrix(weights)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def sample_raw():
    return read_sessions(FIXTURES / "sample.sessions")


@pytest.fixture
def sample_sessions(sample_raw):
    return anchor_home(sample_raw, "HP")


@pytest.fixture
def sample_topo():
    return read_topology(FIXTURES / "sample.topology", "HP")


@pytest.fixture
def dense_topo():
    return read_topology(FIXTURES / "dense.topology", "HP")


@pytest.fixture
def sample_counts(sample_sessions):
    return build_counts(sample_sessions)


@pytest.fixture
def popularity_model(sample_counts):
    return popularity_chain(sample_counts)


@pytest.fixture
def site_model(sample_topo):
    return site_chain(sample_topo)


@pytest.fixture
def unpopular_model(sample_sessions, dense_topo):
    return popularity_chain_unpopular(build_counts(align_sessions(sample_sessions, dense_topo)), dense_topo)


@pytest.fixture
def site_unpopular_model(dense_topo):
    return site_chain(dense_topo)
