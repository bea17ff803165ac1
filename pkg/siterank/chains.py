"""First-order Markov models of a site: popularity, popularity with unpopular links, site."""

import logging

import numpy as np
import scipy.sparse as sp

from siterank.errors import DataError
from siterank.ingest import require_anchored
from siterank.models import CountModel, ModelKind, RankVector, SessionSet, Topology, TransitionModel

logger = logging.getLogger(__name__)


def build_counts(sessions: SessionSet) -> CountModel:
    """Count visits and link traversals over the concatenated session walk.

    Consecutive sessions share their home page (the end of one is the start
    of the next), and a single home->home transition closes the walk.
    """
    home = require_anchored(sessions)
    n = len(sessions.labels)

    src: list[int] = [home]
    dst: list[int] = [home]
    weights: list[int] = [1]  # closing self-loop
    for s in sessions.sessions:
        for a, b in zip(s.pages, s.pages[1:]):
            src.append(a)
            dst.append(b)
            weights.append(s.weight)

    mij = sp.coo_matrix(
        (np.array(weights, dtype=np.int64), (np.array(src), np.array(dst))),
        shape=(n, n),
    ).tocsr()
    m = np.asarray(mij.sum(axis=1)).ravel()
    counts = CountModel(sessions.labels, home, m, mij, np.zeros(n, dtype=np.int64), int(m.sum()))
    logger.info("Counts: t=%d over %d pages, %d traversed links", counts.t, n, counts.mij.nnz)
    return counts


def _row_normalize(weights: sp.csr_matrix, totals: np.ndarray) -> sp.csr_matrix:
    inv = np.zeros(len(totals), dtype=np.float64)
    nonzero = totals > 0
    inv[nonzero] = 1.0 / totals[nonzero]
    return (sp.diags(inv) @ weights.astype(np.float64)).tocsr()


def popularity_chain(counts: CountModel) -> TransitionModel:
    """P_ij = m_ij / m_i."""
    matrix = _row_normalize(counts.mij, counts.m)
    return TransitionModel(counts.labels, counts.home, matrix, ModelKind.POPULARITY)


def _traversed(counts: CountModel) -> sp.csr_matrix:
    mask = counts.mij.copy().astype(np.float64)
    mask.data[:] = 1.0
    return mask


def with_unpopular(counts: CountModel, topo: Topology) -> CountModel:
    """Fill u_i with the number of topology outlinks of i never traversed."""
    if counts.labels != topo.labels or counts.home != topo.home:
        raise DataError("Counts and topology use different page tables; align the sessions first")

    traversed = _traversed(counts)
    outside = (traversed - traversed.multiply(topo.adjacency)).tocsr()
    outside.eliminate_zeros()
    outside = outside.tocoo()
    if outside.nnz:
        order = np.lexsort((outside.col, outside.row))
        i, j = int(outside.row[order[0]]), int(outside.col[order[0]])
        raise DataError(
            f"Traversed link {counts.labels[i]} -> {counts.labels[j]} is not in the topology"
            f" ({outside.nnz} such links)"
        )

    u = topo.out_degree - np.diff(traversed.indptr)
    return CountModel(counts.labels, counts.home, counts.m, counts.mij, u, counts.t)


def popularity_chain_unpopular(counts: CountModel, topo: Topology) -> TransitionModel:
    """m_ij / (m_i + u_i) on popular links, 1 / (m_i + u_i) on unpopular ones."""
    counts = with_unpopular(counts, topo)
    unpopular = (topo.adjacency - _traversed(counts)).tocsr()
    unpopular.eliminate_zeros()
    weights = counts.mij.astype(np.float64) + unpopular
    matrix = _row_normalize(weights.tocsr(), counts.m + counts.u)
    logger.info("Unpopular links: %d of %d", int(counts.u.sum()), topo.n_links)
    return TransitionModel(counts.labels, counts.home, matrix, ModelKind.POPULARITY_UNPOPULAR)


def site_chain(topo: Topology) -> TransitionModel:
    """Uniform random surfer: 1/N from home to every page, 1/d_i elsewhere."""
    n, home = topo.n_pages, topo.home
    degree = topo.out_degree
    dead = np.flatnonzero((degree == 0) & (np.arange(n) != home))
    if dead.size:
        raise DataError(f"Page {topo.labels[dead[0]]!r} has no outlinks")

    adj = topo.adjacency.tocoo()
    keep = adj.row != home
    rows = np.concatenate([adj.row[keep], np.full(n, home)])
    cols = np.concatenate([adj.col[keep], np.arange(n)])
    vals = np.concatenate([1.0 / degree[adj.row[keep]], np.full(n, 1.0 / n)])
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return TransitionModel(topo.labels, home, matrix, ModelKind.SITE)


def stationary_from_counts(counts: CountModel) -> RankVector:
    """pi_i = m_i / t, an exact fixed point of the popularity chain."""
    if counts.t < 1:
        raise DataError("Counts are empty")
    return RankVector(counts.labels, counts.m / counts.t, ModelKind.POPULARITY)
