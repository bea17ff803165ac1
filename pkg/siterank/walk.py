"""Entropy and rank estimates from simulated or replayed walks over a chain."""

import logging

import numpy as np
import scipy.sparse as sp

from siterank.chains import build_counts
from siterank.config import WALK_CAP_FACTOR, WALK_FACTOR
from siterank.errors import ConvergenceError, DataError
from siterank.models import CountModel, PageId, SessionSet, TransitionModel, WalkStats

logger = logging.getLogger(__name__)

_UNIFORM_CHUNK = 4096


def plugin_entropy(mij: sp.spmatrix) -> float:
    """-sum m_ij log2(m_ij / m_i) over the traversed links, in bits."""
    counts = sp.csr_matrix(mij, dtype=np.float64)
    counts.eliminate_zeros()
    m = np.asarray(counts.sum(axis=1)).ravel()
    rows = np.repeat(np.arange(counts.shape[0]), np.diff(counts.indptr))
    data = counts.data
    return float(-(data * np.log2(data / m[rows])).sum())


def default_walk_length(n_states: int, n_transitions: int, factor: int = WALK_FACTOR) -> int:
    return factor * (n_states + n_transitions)


def walk_length(model: TransitionModel, factor: int = WALK_FACTOR) -> int:
    """factor * (N + L), L being the number of nonzero transitions."""
    return default_walk_length(model.n_states, model.n_transitions, factor)


def _row_cumulative(matrix: sp.csr_matrix) -> np.ndarray:
    # cumulative probabilities restarted at every row
    sizes = np.diff(matrix.indptr)
    running = np.cumsum(matrix.data)
    before = np.concatenate([[0.0], running])[matrix.indptr[:-1]]
    return running - np.repeat(before, sizes)


def _stats(counts: CountModel, seed: int | None) -> WalkStats:
    H = plugin_entropy(counts.mij)
    return WalkStats(
        H=H,
        t=counts.t,
        per_step=H / counts.t,
        pi_hat=counts.m / counts.t,
        seed=seed,
        counts=counts,
    )


def random_walk(
    model: TransitionModel,
    home: PageId | int,
    min_steps: int,
    seed: int | None = None,
    cap_factor: int = WALK_CAP_FACTOR,
) -> WalkStats:
    """Walk from home until it is revisited after at least `min_steps` steps.

    t counts the transitions taken, not the pages visited (which would be
    t + 1). The final return to home is identified with the start, so t is
    the number of departures, the same count replay_walk reports.
    """
    start = home.id if isinstance(home, PageId) else int(home)
    if not 0 <= start < model.n_states:
        raise DataError(f"Home index {start} outside 0..{model.n_states - 1}")
    if min_steps < 1:
        raise DataError(f"Walk length must be >= 1, got {min_steps}")

    matrix = model.matrix
    indptr, indices = matrix.indptr, matrix.indices
    cumulative = _row_cumulative(matrix)
    visits = np.zeros(matrix.nnz, dtype=np.int64)
    cap = cap_factor * min_steps

    rng = np.random.default_rng(seed)
    uniforms = rng.random(_UNIFORM_CHUNK)
    drawn = 0
    state, steps = start, 0

    while True:
        lo, hi = indptr[state], indptr[state + 1]
        if lo == hi:
            raise DataError(f"Walk reached page {model.labels[state]!r} which has no outgoing transitions")
        if drawn == _UNIFORM_CHUNK:
            uniforms = rng.random(_UNIFORM_CHUNK)
            drawn = 0
        offset = int(np.searchsorted(cumulative[lo:hi], uniforms[drawn], side="right"))
        drawn += 1
        pos = lo + min(offset, hi - lo - 1)
        visits[pos] += 1
        state = int(indices[pos])
        steps += 1

        if state == start and steps >= min_steps:
            break
        if steps >= cap:
            raise ConvergenceError(
                f"Walk did not return to {model.labels[start]!r} within {cap} steps "
                f"(min_steps={min_steps})"
            )

    mij = sp.csr_matrix((visits, indices.copy(), indptr.copy()), shape=matrix.shape)
    m = np.asarray(mij.sum(axis=1)).ravel()
    counts = CountModel(model.labels, start, m, mij, np.zeros(model.n_states, dtype=np.int64), steps)
    stats = _stats(counts, seed)
    logger.info(
        "Walk (%s, seed=%s): t=%d, H=%.2f, H/t=%.4f",
        model.kind, seed, stats.t, stats.H, stats.per_step,
    )
    return stats


def replay_walk(sessions: SessionSet) -> WalkStats:
    """Walk statistics of the concatenated sessions themselves."""
    stats = _stats(build_counts(sessions), None)
    logger.info("Replay: t=%d, H=%.2f, H/t=%.4f", stats.t, stats.H, stats.per_step)
    return stats
