import logging

import numpy as np

from siterank.config import MAX_ITERS, TOLERANCE
from siterank.errors import ConvergenceError, DataError
from siterank.models import RankVector, TransitionModel

logger = logging.getLogger(__name__)


def power_iteration(
    model: TransitionModel,
    tolerance: float = TOLERANCE,
    max_iters: int = MAX_ITERS,
    teleport: float = 0.0,
) -> RankVector:
    """Stationary distribution by repeated x <- xP from the uniform vector.

    Converged when the L1 residual |xP - x| drops to `tolerance`. With a
    nonzero `teleport` every step also jumps uniformly with that probability.
    """
    if tolerance <= 0 or max_iters < 1:
        raise DataError(f"Invalid power iteration settings: tol={tolerance}, max_iters={max_iters}")
    if not 0.0 <= teleport < 1.0:
        raise DataError(f"Teleport probability must lie in [0, 1), got {teleport}")

    n = model.n_states
    transposed = model.matrix.T.tocsr()
    x = np.full(n, 1.0 / n)
    residual = np.inf

    for iteration in range(1, max_iters + 1):
        nxt = transposed @ x
        if teleport:
            nxt = (1.0 - teleport) * nxt + teleport / n
        total = nxt.sum()
        if total <= 0:
            raise DataError("Probability mass vanished; the model has no closed class")
        nxt /= total
        residual = float(np.abs(nxt - x).sum())
        x = nxt
        if residual <= tolerance:
            logger.info(
                "Power iteration (%s) converged in %d iterations, residual %.3e",
                model.kind, iteration, residual,
            )
            return RankVector(model.labels, x / x.sum(), model.kind)

    raise ConvergenceError(
        f"Power iteration did not converge in {max_iters} iterations (residual {residual:.3e})"
    )


def stationary_residual(model: TransitionModel, pi: RankVector) -> float:
    """L1 norm of piP - pi."""
    return float(np.abs(model.matrix.T @ pi.pi - pi.pi).sum())


def row_entropies(model: TransitionModel) -> np.ndarray:
    """Entropy in bits of every row; empty rows give 0."""
    plogp = model.matrix.copy()
    plogp.data = -plogp.data * np.log2(plogp.data)
    return np.asarray(plogp.sum(axis=1)).ravel()


def entropy_theory(model: TransitionModel, pi: RankVector) -> float:
    """-sum_i sum_j pi_i P_ij log2 P_ij, in bits per step."""
    if pi.pi.shape != (model.n_states,):
        raise DataError(
            f"Rank vector has {pi.pi.shape[0]} entries but the model has {model.n_states} states"
        )
    return float(pi.pi @ row_entropies(model))
