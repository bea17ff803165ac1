"""Comparing rank models: relative entropy, top-k lists and power-law shape."""

import logging

import numpy as np
import pandas as pd
from scipy.stats import linregress

from siterank.errors import DataError
from siterank.models import RankedPage, RankVector, RegressionFit, TransitionModel

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Relative entropy between chains
# ---------------------------------------------------------------------------

def relative_entropy(P: TransitionModel, Q: TransitionModel) -> float:
    """Sum over all rows of P_ij log2(P_ij / Q_ij), not weighted by any rank.

    Every transition of P must be a transition of Q.
    """
    if P.labels != Q.labels:
        raise DataError("Models are defined over different page tables")

    p = P.matrix.tocoo()
    q = np.asarray(Q.matrix[p.row, p.col]).ravel()
    missing = np.flatnonzero(q == 0)
    if missing.size:
        k = int(missing[0])
        i, j = int(p.row[k]), int(p.col[k])
        raise DataError(
            f"Transition {P.labels[i]} -> {P.labels[j]} has probability {p.data[k]:.4g} "
            f"in {P.kind} but none in {Q.kind}"
        )
    return float((p.data * np.log2(p.data / q)).sum())


def max_relative_entropy(Q: TransitionModel) -> float:
    """Sum of log2 of each row's support size; the value when every row of P is a point mass."""
    sizes = Q.support_sizes
    return float(np.log2(sizes[sizes > 0]).sum())


def normalized_relative_entropy(P: TransitionModel, Q: TransitionModel) -> float:
    d = relative_entropy(P, Q)
    d_max = max_relative_entropy(Q)
    if d_max == 0:
        if d > 0:
            raise DataError(f"Relative entropy {d} is positive but its maximum is 0")
        return 0.0
    return d / d_max


# ---------------------------------------------------------------------------
# Top-k lists
# ---------------------------------------------------------------------------

def _ordering(pi: RankVector) -> list[int]:
    # descending probability, ties by label
    return sorted(range(len(pi.labels)), key=lambda i: (-pi.pi[i], pi.labels[i]))


def top_k(pi: RankVector, k: int) -> list[RankedPage]:
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    n = len(pi.labels)
    if k > n:
        logger.warning("Requested top-%d of %d pages; returning all of them", k, n)
    order = _ordering(pi)[:k]
    return [RankedPage(rank, pi.labels[i], float(pi.pi[i])) for rank, i in enumerate(order, start=1)]


def _ranks(labels: list[str], k: int, name: str) -> dict[str, int]:
    if len(labels) > k:
        raise DataError(f"List {name} has {len(labels)} entries, more than k={k}")
    ranks: dict[str, int] = {}
    for rank, label in enumerate(labels, start=1):
        if label in ranks:
            raise DataError(f"Label {label!r} appears twice in list {name}")
        ranks[label] = rank
    return ranks


def footrule_complement(list_a: list[str], list_b: list[str], k: int) -> float:
    """1 - F / (k(k+1)), F summing rank differences; a missing label ranks k+1."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    ranks_a = _ranks(list(list_a), k, "A")
    ranks_b = _ranks(list(list_b), k, "B")
    absent = k + 1
    footrule = sum(
        abs(ranks_a.get(label, absent) - ranks_b.get(label, absent))
        for label in ranks_a.keys() | ranks_b.keys()
    )
    return 1.0 - footrule / (k * (k + 1))


# ---------------------------------------------------------------------------
# Power-law shape of a rank distribution
# ---------------------------------------------------------------------------

def _rank_points(pi: RankVector, drop_first: int) -> tuple[np.ndarray, np.ndarray]:
    if drop_first < 0:
        raise DataError(f"drop_first must be >= 0, got {drop_first}")
    probs = np.array([pi.pi[i] for i in _ordering(pi)])
    ranks = np.arange(1, len(probs) + 1, dtype=np.float64)
    positive = probs > 0
    return ranks[positive][drop_first:], probs[positive][drop_first:]


def powerlaw_fit(pi: RankVector, drop_first: int = 0) -> RegressionFit:
    """Least squares line of log2(probability) against log2(rank).

    Zero-probability pages are left out; the `drop_first` highest ranked
    points are skipped before fitting.
    """
    ranks, probs = _rank_points(pi, drop_first)
    if len(ranks) < 2:
        raise DataError(
            f"Power-law fit needs at least 2 points, {len(ranks)} left after dropping {drop_first}"
        )
    result = linregress(np.log2(ranks), np.log2(probs))
    fit = RegressionFit(
        exponent=float(-result.slope),
        intercept=float(result.intercept),
        correlation=float(abs(result.rvalue)),
        points_dropped=drop_first,
        n_points=len(ranks),
    )
    logger.info(
        "Power-law fit (%s): exponent %.4f, |r| %.4f over %d points",
        pi.kind, fit.exponent, fit.correlation, fit.n_points,
    )
    return fit


def loglog_residuals(pi: RankVector, fit: RegressionFit) -> pd.DataFrame:
    """Points used by `fit` with their distance from the fitted line in log2 space."""
    ranks, probs = _rank_points(pi, fit.points_dropped)
    predicted = fit.intercept - fit.exponent * np.log2(ranks)
    return pd.DataFrame({
        "rank": ranks.astype(np.int64),
        "probability": probs,
        "residual": np.log2(probs) - predicted,
    })
