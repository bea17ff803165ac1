"""Shared domain types. Everything here is immutable once constructed."""

from dataclasses import dataclass, field, asdict
from enum import StrEnum
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from siterank.errors import DataError

ROW_TOLERANCE = 1e-9


class ModelKind(StrEnum):
    POPULARITY = "popularity"
    POPULARITY_UNPOPULAR = "popularity-unpopular"
    SITE = "site"


class PageId(NamedTuple):
    id: int
    label: str


class RankedPage(NamedTuple):
    rank: int
    label: str
    probability: float


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _canonical_csr(matrix, dtype) -> sp.csr_matrix:
    mat = sp.csr_matrix(matrix, dtype=dtype, copy=True)
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def _label_index(labels: tuple[str, ...], label: str) -> int:
    try:
        return labels.index(label)
    except ValueError:
        raise DataError(f"Unknown page label: {label!r}") from None


# ---------------------------------------------------------------------------
# Site structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    """Pages of a site with their directed links.

    The home page must carry a self-loop and reach every other page.
    Links are kept sorted by (src, dst).
    """

    labels: tuple[str, ...]
    home: int
    links: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        n = len(self.labels)
        if n == 0:
            raise DataError("Topology has no pages")
        if len(set(self.labels)) != n:
            raise DataError("Topology page labels are not unique")
        if not 0 <= self.home < n:
            raise DataError(f"Home index {self.home} outside 0..{n - 1}")

        seen: set[tuple[int, int]] = set()
        for src, dst in self.links:
            src, dst = int(src), int(dst)
            if not (0 <= src < n and 0 <= dst < n):
                raise DataError(f"Link ({src}, {dst}) refers to a page outside 0..{n - 1}")
            if (src, dst) in seen:
                raise DataError(
                    f"Duplicate link {self.labels[src]} -> {self.labels[dst]}"
                )
            seen.add((src, dst))
        if (self.home, self.home) not in seen:
            raise DataError(f"Home page {self.labels[self.home]!r} has no self-loop")
        object.__setattr__(self, "links", tuple(sorted(seen)))

        unreachable = self.unreachable_from_home()
        if unreachable:
            raise DataError(
                f"Page {self.labels[unreachable[0]]!r} is unreachable from home page "
                f"{self.labels[self.home]!r} ({len(unreachable)} unreachable in total)"
            )

    @property
    def n_pages(self) -> int:
        return len(self.labels)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        if not self.links:
            return sp.csr_matrix((self.n_pages, self.n_pages), dtype=np.float64)
        src, dst = np.array(self.links, dtype=np.int64).T
        data = np.ones(len(src), dtype=np.float64)
        return _canonical_csr(
            sp.coo_matrix((data, (src, dst)), shape=(self.n_pages, self.n_pages)),
            np.float64,
        )

    @cached_property
    def out_degree(self) -> np.ndarray:
        return _frozen(np.diff(self.adjacency.indptr), np.int64)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return _frozen(np.bincount(self.adjacency.indices, minlength=self.n_pages), np.int64)

    def outlinks(self, page: int) -> np.ndarray:
        adj = self.adjacency
        return adj.indices[adj.indptr[page]:adj.indptr[page + 1]]

    def index(self, label: str) -> int:
        return _label_index(self.labels, label)

    def page(self, index: int) -> PageId:
        return PageId(index, self.labels[index])

    def unreachable_from_home(self) -> list[int]:
        reached = breadth_first_order(
            self.adjacency, self.home, directed=True, return_predecessors=False
        )
        mask = np.ones(self.n_pages, dtype=bool)
        mask[reached] = False
        return np.flatnonzero(mask).tolist()

    def cannot_reach_home(self) -> list[int]:
        reached = breadth_first_order(
            self.adjacency.T.tocsr(), self.home, directed=True, return_predecessors=False
        )
        mask = np.ones(self.n_pages, dtype=bool)
        mask[reached] = False
        return np.flatnonzero(mask).tolist()


def build_topology(
    labels: tuple[str, ...] | list[str],
    home: int,
    links,
) -> Topology:
    """Build a Topology, adding the home self-loop when it is missing."""
    link_list = [(int(s), int(d)) for s, d in links]
    if (home, home) not in link_list:
        link_list.append((home, home))
    return Topology(tuple(labels), home, tuple(link_list))


# ---------------------------------------------------------------------------
# Navigation sessions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Session:
    pages: tuple[int, ...]
    weight: int = 1

    def __post_init__(self) -> None:
        if len(self.pages) < 1:
            raise DataError("Session must contain at least one page")
        if self.weight < 1:
            raise DataError(f"Session weight must be >= 1, got {self.weight}")


@dataclass(frozen=True)
class SessionSet:
    sessions: tuple[Session, ...]
    labels: tuple[str, ...]
    home: int | None = None  # set once sessions are anchored

    @property
    def n_sessions(self) -> int:
        return sum(s.weight for s in self.sessions)

    @property
    def n_transitions(self) -> int:
        return sum(s.weight * (len(s.pages) - 1) for s in self.sessions)

    def index(self, label: str) -> int:
        return _label_index(self.labels, label)

    def session_labels(self, session: Session) -> list[str]:
        return [self.labels[p] for p in session.pages]


# ---------------------------------------------------------------------------
# Counts and chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CountModel:
    """Visit counts m, link counts mij, unpopular-outlink counts u, total t.

    m[i] counts departures from page i on the closed walk, so row i of mij
    sums to m[i] and t = sum(m).
    """

    labels: tuple[str, ...]
    home: int
    m: np.ndarray
    mij: sp.csr_matrix
    u: np.ndarray
    t: int

    def __post_init__(self) -> None:
        n = len(self.labels)
        object.__setattr__(self, "m", _frozen(self.m, np.int64))
        object.__setattr__(self, "u", _frozen(self.u, np.int64))
        object.__setattr__(self, "mij", _canonical_csr(self.mij, np.int64))

        if self.m.shape != (n,) or self.u.shape != (n,) or self.mij.shape != (n, n):
            raise DataError("Count arrays do not match the label table")
        if (self.m < 0).any() or (self.u < 0).any() or (self.mij.data < 0).any():
            raise DataError("Counts must be non-negative")
        if int(self.m.sum()) != self.t:
            raise DataError(f"t = {self.t} differs from sum of m = {int(self.m.sum())}")
        row_sums = np.asarray(self.mij.sum(axis=1)).ravel()
        visited = self.m > 0
        if not np.array_equal(row_sums[visited], self.m[visited]):
            raise DataError("Link counts do not close the walk: row sums differ from m")

    @property
    def n_states(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Row-stochastic sparse transition structure over pages."""

    labels: tuple[str, ...]
    home: int
    matrix: sp.csr_matrix
    kind: ModelKind

    def __post_init__(self) -> None:
        n = len(self.labels)
        mat = _canonical_csr(self.matrix, np.float64)
        if mat.shape != (n, n):
            raise DataError(f"Transition matrix shape {mat.shape} does not match {n} pages")
        if mat.nnz and ((mat.data <= 0).any() or (mat.data > 1 + ROW_TOLERANCE).any()):
            raise DataError("Transition probabilities must lie in (0, 1]")
        sizes = np.diff(mat.indptr)
        sums = np.asarray(mat.sum(axis=1)).ravel()
        bad = np.flatnonzero((sizes > 0) & (np.abs(sums - 1.0) > ROW_TOLERANCE))
        if bad.size:
            i = int(bad[0])
            raise DataError(f"Row {self.labels[i]!r} sums to {sums[i]!r}, not 1")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "kind", ModelKind(self.kind))

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def n_transitions(self) -> int:
        return int(self.matrix.nnz)

    @property
    def support_sizes(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def row(self, state: int) -> tuple[np.ndarray, np.ndarray]:
        """Destinations (ascending) and their probabilities."""
        start, end = self.matrix.indptr[state], self.matrix.indptr[state + 1]
        return self.matrix.indices[start:end], self.matrix.data[start:end]


@dataclass(frozen=True, eq=False)
class RankVector:
    labels: tuple[str, ...]
    pi: np.ndarray
    kind: ModelKind

    def __post_init__(self) -> None:
        pi = _frozen(self.pi, np.float64)
        if pi.shape != (len(self.labels),):
            raise DataError("Rank vector length does not match the label table")
        if (pi < 0).any():
            raise DataError("Rank vector has negative entries")
        if abs(pi.sum() - 1.0) > ROW_TOLERANCE:
            raise DataError(f"Rank vector sums to {pi.sum()!r}, not 1")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "kind", ModelKind(self.kind))

    def as_dict(self) -> dict[str, float]:
        return {label: float(p) for label, p in zip(self.labels, self.pi)}


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WalkStats:
    H: float
    t: int
    per_step: float
    pi_hat: np.ndarray
    seed: int | None
    counts: CountModel = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pi_hat", _frozen(self.pi_hat, np.float64))
        if self.H < 0 or self.t < 1:
            raise DataError(f"Invalid walk statistics: H={self.H}, t={self.t}")

    def as_dict(self) -> dict:
        return {"H": self.H, "t": self.t, "per_step": self.per_step, "seed": self.seed}


@dataclass(frozen=True)
class RegressionFit:
    exponent: float
    intercept: float
    correlation: float
    points_dropped: int
    n_points: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SummaryStats:
    n_pages: int
    n_links: int
    n_sessions: int
    n_requests: int
    mean_session_length: float
    stdev_session_length: float
    max_session_length: int
    n_initial_pages: int
    n_terminating_pages: int
    mean_out_degree: float
    stdev_out_degree: float
    mean_in_degree: float
    stdev_in_degree: float

    def as_dict(self) -> dict:
        return asdict(self)
