"""Synthetic sites: power-law topologies, random-surfer sessions and scaling runs."""

import asyncio
import logging
import math
from collections.abc import Awaitable, Callable
from typing import NamedTuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from siterank import __version__
from siterank.chains import build_counts, popularity_chain_unpopular, site_chain
from siterank.config import (
    DROP_FIRST,
    HOME_LABEL,
    IN_EXPONENT,
    LENGTH_EXPONENT,
    MAX_CONCURRENT,
    OUT_EXPONENT,
    SESSIONS_PER_PAGE,
    TERMINATION_PROB,
    WALK_FACTOR,
)
from siterank.errors import UsageError
from siterank.exact import entropy_theory, power_iteration
from siterank.infometrics import (
    loglog_residuals,
    max_relative_entropy,
    powerlaw_fit,
    relative_entropy,
)
from siterank.ingest import add_traversed_links, align_sessions, anchor_home
from siterank.models import Session, SessionSet, Topology
from siterank.walk import random_walk, walk_length

logger = logging.getLogger(__name__)

EXPERIMENT_COLUMNS = [
    "size", "N", "L",
    "H_walk_pop", "H_theory_pop", "H_walk_site", "H_theory_site",
    "D", "Dmax", "D_normalized", "seed",
]
FIT_COLUMNS = ["exponent_pop", "correlation_pop", "exponent_site", "correlation_site"]
RESIDUAL_COLUMNS = ["size", "seed", "kind", "rank", "probability", "residual"]


def sample_power_law(rng: np.random.Generator, exponent: float, k_max: int, size: int) -> np.ndarray:
    """Integers in 1..k_max with P(k) proportional to k^-exponent (inverse CDF)."""
    if k_max < 1:
        raise UsageError(f"Power-law support 1..{k_max} is empty")
    weights = np.arange(1, k_max + 1, dtype=np.float64) ** -exponent
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    draws = np.searchsorted(cdf, rng.random(size), side="right") + 1
    return np.minimum(draws, k_max)


def _page_labels(n_pages: int) -> tuple[str, ...]:
    width = len(str(n_pages - 1))
    return (HOME_LABEL,) + tuple(f"P{i:0{width}d}" for i in range(1, n_pages))


def _match_stubs(
    rng: np.random.Generator, out_degree: np.ndarray, in_degree: np.ndarray
) -> set[tuple[int, int]]:
    out_pool = rng.permutation(np.repeat(np.arange(len(out_degree)), out_degree)).tolist()
    in_pool = rng.permutation(np.repeat(np.arange(len(in_degree)), in_degree)).tolist()
    budget = 100 * min(len(out_pool), len(in_pool))

    links: set[tuple[int, int]] = set()
    attempts = 0
    while out_pool and in_pool and attempts < budget:
        attempts += 1
        a = int(rng.integers(len(out_pool)))
        b = int(rng.integers(len(in_pool)))
        src, dst = out_pool[a], in_pool[b]
        if src == dst or (src, dst) in links:
            continue
        links.add((src, dst))
        out_pool[a] = out_pool[-1]
        out_pool.pop()
        in_pool[b] = in_pool[-1]
        in_pool.pop()

    if out_pool and in_pool:
        logger.warning(
            "Stub matching stopped after %d attempts; dropped %d out-stubs and %d in-stubs",
            attempts, len(out_pool), len(in_pool),
        )
    return links


def _reached(n: int, links: set[tuple[int, int]], home: int, reverse: bool = False) -> np.ndarray:
    src, dst = np.array(sorted(links), dtype=np.int64).T
    if reverse:
        src, dst = dst, src
    adj = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    mask = np.zeros(n, dtype=bool)
    mask[breadth_first_order(adj, home, directed=True, return_predecessors=False)] = True
    return mask


def generate_topology(
    n_pages: int,
    in_exponent: float = IN_EXPONENT,
    out_exponent: float = OUT_EXPONENT,
    seed: int | None = None,
) -> Topology:
    """Random site whose in- and out-degrees follow power laws.

    Page 0 is the home page. Pages the home page cannot reach get a link
    from it; pages that cannot get back get a link to it.
    """
    if n_pages < 2:
        raise UsageError(f"A synthetic site needs at least 2 pages, got {n_pages}")
    if in_exponent <= 1 or out_exponent <= 1:
        raise UsageError(f"Power-law exponents must exceed 1, got in={in_exponent} out={out_exponent}")

    rng = np.random.default_rng(seed)
    out_degree = sample_power_law(rng, out_exponent, n_pages - 1, n_pages)
    in_degree = sample_power_law(rng, in_exponent, n_pages - 1, n_pages)
    links = _match_stubs(rng, out_degree, in_degree)

    home = 0
    links.add((home, home))
    unreachable = np.flatnonzero(~_reached(n_pages, links, home))
    links.update((home, int(p)) for p in unreachable)
    stranded = np.flatnonzero(~_reached(n_pages, links, home, reverse=True))
    links.update((int(p), home) for p in stranded)
    if unreachable.size or stranded.size:
        logger.warning(
            "Reachability repair: %d links from home, %d links to home",
            unreachable.size, stranded.size,
        )

    topo = Topology(_page_labels(n_pages), home, tuple(links))
    logger.info("Generated topology: %d pages, %d links (seed=%s)", topo.n_pages, topo.n_links, seed)
    return topo


def generate_sessions(
    topo: Topology,
    n_sessions: int,
    seed: int | None = None,
    termination_prob: float = TERMINATION_PROB,
    length_exponent: float | None = LENGTH_EXPONENT,
    anchored: bool = True,
) -> SessionSet:
    """Random-surfer sessions, home-anchored unless `anchored=False`.

    Each session starts at a page drawn from the site rank, follows a
    uniformly chosen outlink at every step, and ends when the termination
    coin fires, the power-law length cap is reached or the page has no
    outlink. `length_exponent=None` removes the cap.
    """
    if n_sessions < 1:
        raise UsageError(f"n_sessions must be >= 1, got {n_sessions}")
    if not 0.0 <= termination_prob <= 1.0:
        raise UsageError(f"termination_prob must lie in [0, 1], got {termination_prob}")
    if termination_prob == 0.0 and length_exponent is None:
        raise UsageError("Sessions need a termination probability or a length cap")

    start_pi = power_iteration(site_chain(topo)).pi
    rng = np.random.default_rng(seed)
    starts = rng.choice(topo.n_pages, size=n_sessions, p=start_pi)
    if length_exponent is None:
        caps = np.full(n_sessions, np.iinfo(np.int64).max)
    else:
        caps = sample_power_law(rng, length_exponent, topo.n_pages, n_sessions)

    outlinks = [
        [int(d) for d in topo.outlinks(i) if d != i] for i in range(topo.n_pages)
    ]
    sessions: list[Session] = []
    for start, cap in zip(starts, caps):
        pages = [int(start)]
        while len(pages) < cap:
            if rng.random() < termination_prob:
                break
            choices = outlinks[pages[-1]]
            if not choices:
                break
            pages.append(choices[int(rng.integers(len(choices)))])
        sessions.append(Session(tuple(pages)))

    raw = SessionSet(tuple(sessions), topo.labels)
    logger.info(
        "Generated %d sessions, mean length %.2f (seed=%s)",
        n_sessions, raw.n_transitions / n_sessions + 1, seed,
    )
    if not anchored:
        return raw
    return anchor_home(raw, topo.labels[topo.home])


# ---------------------------------------------------------------------------
# Scaling experiment
# ---------------------------------------------------------------------------

class ExperimentResult(NamedTuple):
    table: pd.DataFrame
    residuals: pd.DataFrame


def _cell_seeds(seed: int, size: int) -> list[int]:
    children = np.random.SeedSequence([seed, size]).spawn(4)
    return [int(child.generate_state(1)[0]) for child in children]


def _run_cell(size: int, seed: int, params: dict) -> tuple[dict, pd.DataFrame]:
    topo_seed, session_seed, pop_seed, site_seed = _cell_seeds(seed, size)
    generated = generate_topology(size, params["in_exponent"], params["out_exponent"], topo_seed)
    sessions = generate_sessions(
        generated,
        math.ceil(params["sessions_per_page"] * size),
        session_seed,
        params["termination_prob"],
        params["length_exponent"],
    )
    # anchoring adds home links the generator never made
    topo = add_traversed_links(generated, sessions)
    sessions = align_sessions(sessions, topo)

    P = popularity_chain_unpopular(build_counts(sessions), topo)
    Q = site_chain(topo)
    pi_pop, pi_site = power_iteration(P), power_iteration(Q)
    walk_pop = random_walk(P, topo.home, walk_length(P, params["walk_factor"]), pop_seed)
    walk_site = random_walk(Q, topo.home, walk_length(Q, params["walk_factor"]), site_seed)

    d, d_max = relative_entropy(P, Q), max_relative_entropy(Q)
    fit_pop = powerlaw_fit(pi_pop, 0)
    fit_site = powerlaw_fit(pi_site, params["drop_first"])

    row = {
        "size": size,
        "N": topo.n_pages,
        "L": topo.n_links,
        "H_walk_pop": walk_pop.per_step,
        "H_theory_pop": entropy_theory(P, pi_pop),
        "H_walk_site": walk_site.per_step,
        "H_theory_site": entropy_theory(Q, pi_site),
        "D": d,
        "Dmax": d_max,
        "D_normalized": d / d_max if d_max else 0.0,
        "seed": seed,
        "exponent_pop": fit_pop.exponent,
        "correlation_pop": fit_pop.correlation,
        "exponent_site": fit_site.exponent,
        "correlation_site": fit_site.correlation,
    }

    frames = []
    for kind, pi, fit in (("popularity", pi_pop, fit_pop), ("site", pi_site, fit_site)):
        frame = loglog_residuals(pi, fit)
        frame.insert(0, "kind", kind)
        frame.insert(0, "seed", seed)
        frame.insert(0, "size", size)
        frames.append(frame)
    return row, pd.concat(frames, ignore_index=True)


async def run_scaling_experiment(
    sizes: list[int],
    seeds: list[int],
    in_exponent: float = IN_EXPONENT,
    out_exponent: float = OUT_EXPONENT,
    termination_prob: float = TERMINATION_PROB,
    length_exponent: float | None = LENGTH_EXPONENT,
    sessions_per_page: float = SESSIONS_PER_PAGE,
    walk_factor: int = WALK_FACTOR,
    drop_first: int = DROP_FIRST,
    max_concurrent: int = MAX_CONCURRENT,
    progress_callback: Callable[[int, int], Awaitable[None]] | None = None,
) -> ExperimentResult:
    """One row per (size, seed) cell; cells run in worker threads.

    Rows come back ordered by size, then seed, whatever order the cells
    finish in.
    """
    if not sizes:
        raise UsageError("Experiment needs at least one site size")
    if not seeds:
        raise UsageError("Experiment needs at least one seed")

    params = {
        "in_exponent": in_exponent,
        "out_exponent": out_exponent,
        "termination_prob": termination_prob,
        "length_exponent": length_exponent,
        "sessions_per_page": sessions_per_page,
        "walk_factor": walk_factor,
        "drop_first": drop_first,
    }
    cells = [(size, seed) for size in sizes for seed in seeds]
    total = len(cells)
    logger.info("Running %d experiment cells (max %d parallel)", total, max_concurrent)

    results: list[tuple[dict, pd.DataFrame] | None] = [None] * total
    sem = asyncio.Semaphore(max_concurrent)
    done_count = 0
    lock = asyncio.Lock()

    async def _process(idx: int, size: int, seed: int) -> None:
        nonlocal done_count
        async with sem:
            logger.info("Cell %d/%d: size=%d seed=%d", idx + 1, total, size, seed)
            results[idx] = await asyncio.to_thread(_run_cell, size, seed, params)
            async with lock:
                done_count += 1
                if progress_callback:
                    await progress_callback(done_count, total)

    await asyncio.gather(*[_process(i, size, seed) for i, (size, seed) in enumerate(cells)])

    table = pd.DataFrame([row for row, _ in results], columns=EXPERIMENT_COLUMNS + FIT_COLUMNS)
    for name, value in params.items():
        table[name] = value
    table["tool_version"] = __version__
    residuals = pd.concat([frame for _, frame in results], ignore_index=True)
    return ExperimentResult(table, residuals[RESIDUAL_COLUMNS])
