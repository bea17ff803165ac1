import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from siterank.config import SESSION_TIMEOUT_MINUTES
from siterank.errors import DataError
from siterank.models import Session, SessionSet, SummaryStats, Topology, build_topology

logger = logging.getLogger(__name__)

# Optional "<count>\t" prefix, then labels separated by single spaces
_SESSION_LINE_RE = re.compile(r"^(?:(\d+)\t)?([^\s]+(?: [^\s]+)*)$")
_LABEL_RE = re.compile(r"^[^\s]+$")
LOG_COLUMNS = ["user", "timestamp", "page"]


def _is_skippable(line: str) -> bool:
    return not line.strip() or line.lstrip().startswith("#")


class _LabelTable:
    """Dense indices in first-appearance order."""

    def __init__(self, labels: tuple[str, ...] = ()) -> None:
        self.labels: list[str] = list(labels)
        self._index = {label: i for i, label in enumerate(self.labels)}

    def __call__(self, label: str) -> int:
        idx = self._index.get(label)
        if idx is None:
            idx = len(self.labels)
            self.labels.append(label)
            self._index[label] = idx
        return idx


# ---------------------------------------------------------------------------
# Session files
# ---------------------------------------------------------------------------

def parse_sessions(text: str) -> SessionSet:
    """Parse the session file format: one session per line, optional count column."""
    table = _LabelTable()
    sessions: list[Session] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if _is_skippable(raw):
            continue
        match = _SESSION_LINE_RE.match(raw)
        if not match:
            raise DataError(f"Malformed session at line {lineno}: {raw!r}")
        count, pages = match.groups()
        weight = int(count) if count is not None else 1
        if weight < 1:
            raise DataError(f"Session count must be >= 1 at line {lineno}")
        sessions.append(Session(tuple(table(p) for p in pages.split(" ")), weight))

    if not sessions:
        raise DataError("Session file contains no sessions")

    result = SessionSet(tuple(sessions), tuple(table.labels))
    logger.info(
        "Parsed %d session lines (%d weighted sessions, %d pages)",
        len(sessions), result.n_sessions, len(result.labels),
    )
    return result


def read_sessions(file_path: str | Path) -> SessionSet:
    file_path = Path(file_path)
    logger.info("Reading sessions: %s", file_path)
    return parse_sessions(file_path.read_text(encoding="utf-8"))


def format_sessions(sessions: SessionSet, aggregate: bool = True) -> str:
    """Render sessions in the session file format.

    With aggregate=True identical sessions collapse into one line carrying
    the summed weight, in first-appearance order.
    """
    for label in sessions.labels:
        if not _LABEL_RE.match(label):
            raise DataError(f"Page label {label!r} cannot be written (contains whitespace)")

    if aggregate:
        merged: dict[tuple[int, ...], int] = {}
        for s in sessions.sessions:
            merged[s.pages] = merged.get(s.pages, 0) + s.weight
        items = list(merged.items())
    else:
        items = [(s.pages, s.weight) for s in sessions.sessions]

    lines = [
        f"{weight}\t{' '.join(sessions.labels[p] for p in pages)}"
        for pages, weight in items
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Server logs
# ---------------------------------------------------------------------------

def read_log(file_path: str | Path) -> list[tuple[str, int, str]]:
    """Read a `user,timestamp,page` CSV into (user_key, timestamp, page) records."""
    file_path = Path(file_path)
    logger.info("Reading log: %s", file_path)

    try:
        df = pd.read_csv(
            file_path,
            dtype={"user": str, "page": str},
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        logger.warning("Log %s is empty", file_path)
        return []
    if list(df.columns) != LOG_COLUMNS:
        raise DataError(f"Log header must be {','.join(LOG_COLUMNS)}, got {','.join(map(str, df.columns))}")

    ts = pd.to_numeric(df["timestamp"], errors="coerce")
    bad = ts.isna() | (ts != ts.round())
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        # +2: header line and 1-based numbering
        raise DataError(f"Invalid timestamp at line {row + 2}: {df['timestamp'].iloc[row]!r}")
    df["timestamp"] = ts.astype(np.int64)

    records = list(df.itertuples(index=False, name=None))
    logger.info("Log records: %d (%d users)", len(records), df["user"].nunique())
    return records


def sessionize_log(records, timeout_minutes: float = SESSION_TIMEOUT_MINUTES) -> SessionSet:
    """Split each user's requests into sessions bounded by total duration.

    A request starts a new session once its time since the session's first
    request exceeds the timeout.
    """
    if timeout_minutes <= 0:
        raise DataError(f"Session timeout must be positive, got {timeout_minutes}")
    limit = timeout_minutes * 60

    ordered = sorted(records, key=lambda r: (r[0], r[1]))
    table = _LabelTable()
    sessions: list[Session] = []
    current: list[int] = []
    current_user = None
    started_at = 0

    for user, timestamp, page in ordered:
        if current and (user != current_user or timestamp - started_at > limit):
            sessions.append(Session(tuple(current)))
            current = []
        if not current:
            current_user, started_at = user, timestamp
        current.append(table(page))
    if current:
        sessions.append(Session(tuple(current)))

    logger.info("Sessionized %d requests into %d sessions", len(ordered), len(sessions))
    return SessionSet(tuple(sessions), tuple(table.labels))


# ---------------------------------------------------------------------------
# Home anchoring and topology
# ---------------------------------------------------------------------------

def anchor_home(sessions: SessionSet, home_label: str) -> SessionSet:
    """Make every session start and finish at the home page."""
    table = _LabelTable(sessions.labels)
    home = table(home_label)
    if home == len(sessions.labels):
        logger.info("Home page %r absent from sessions; adding it", home_label)

    anchored: list[Session] = []
    for s in sessions.sessions:
        pages = list(s.pages)
        if pages[0] != home:
            pages.insert(0, home)
        if pages[-1] != home:
            pages.append(home)
        anchored.append(Session(tuple(pages), s.weight))

    return SessionSet(tuple(anchored), tuple(table.labels), home=home)


def require_anchored(sessions: SessionSet) -> int:
    home = sessions.home
    if home is None:
        raise DataError("Sessions are not anchored at a home page")
    for s in sessions.sessions:
        if s.pages[0] != home or s.pages[-1] != home:
            raise DataError(
                f"Session {' '.join(sessions.session_labels(s))!r} does not start and "
                f"finish at {sessions.labels[home]!r}"
            )
    return home


def infer_topology(sessions: SessionSet) -> Topology:
    """Topology made of the traversed links plus the home self-loop."""
    home = require_anchored(sessions)
    links: set[tuple[int, int]] = {(home, home)}
    for s in sessions.sessions:
        links.update(zip(s.pages, s.pages[1:]))
    topo = Topology(sessions.labels, home, tuple(links))
    logger.info("Inferred topology: %d pages, %d links", topo.n_pages, topo.n_links)
    return topo


def load_topology(text: str, home_label: str) -> Topology:
    """Parse a `src<TAB>dst` edge list; the home self-loop is added when missing."""
    table = _LabelTable()
    links: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if _is_skippable(raw):
            continue
        parts = raw.rstrip("\r").split("\t")
        if len(parts) != 2 or not all(_LABEL_RE.match(p) for p in parts):
            raise DataError(f"Malformed topology edge at line {lineno}: {raw!r}")
        edge = (table(parts[0]), table(parts[1]))
        if edge in seen:
            raise DataError(f"Duplicate edge at line {lineno}: {parts[0]} -> {parts[1]}")
        seen.add(edge)
        links.append(edge)

    if home_label not in table.labels:
        raise DataError(f"Home page {home_label!r} does not appear in the topology")

    topo = build_topology(table.labels, table.labels.index(home_label), links)
    logger.info("Loaded topology: %d pages, %d links", topo.n_pages, topo.n_links)
    return topo


def read_topology(file_path: str | Path, home_label: str) -> Topology:
    file_path = Path(file_path)
    logger.info("Reading topology: %s", file_path)
    return load_topology(file_path.read_text(encoding="utf-8"), home_label)


def format_topology(topo: Topology) -> str:
    for label in topo.labels:
        if not _LABEL_RE.match(label):
            raise DataError(f"Page label {label!r} cannot be written (contains whitespace)")
    lines = [f"# home: {topo.labels[topo.home]}"]
    lines += [f"{topo.labels[s]}\t{topo.labels[d]}" for s, d in topo.links]
    return "\n".join(lines) + "\n"


def align_sessions(sessions: SessionSet, topo: Topology) -> SessionSet:
    """Re-index sessions onto the topology's label table."""
    if sessions.home is not None and sessions.labels[sessions.home] != topo.labels[topo.home]:
        raise DataError(
            f"Sessions are anchored at {sessions.labels[sessions.home]!r} but the "
            f"topology home is {topo.labels[topo.home]!r}"
        )
    index = {label: i for i, label in enumerate(topo.labels)}
    mapping: list[int] = []
    for label in sessions.labels:
        if label not in index:
            raise DataError(f"Session page {label!r} is not in the topology")
        mapping.append(index[label])

    remapped = tuple(
        Session(tuple(mapping[p] for p in s.pages), s.weight) for s in sessions.sessions
    )
    home = topo.home if sessions.home is not None else None
    return SessionSet(remapped, topo.labels, home=home)


def merge_topologies(base: Topology, extra: Topology) -> Topology:
    """Union of two topologies sharing a home label; new labels are appended."""
    home_label = base.labels[base.home]
    if extra.labels[extra.home] != home_label:
        raise DataError(
            f"Cannot merge topologies with homes {home_label!r} and "
            f"{extra.labels[extra.home]!r}"
        )
    table = _LabelTable(base.labels)
    mapping = [table(label) for label in extra.labels]
    links = set(base.links)
    links.update((mapping[s], mapping[d]) for s, d in extra.links)
    merged = Topology(tuple(table.labels), base.home, tuple(links))
    logger.info(
        "Merged topology: %d pages, %d links (+%d)",
        merged.n_pages, merged.n_links, merged.n_links - base.n_links,
    )
    return merged


def add_traversed_links(topo: Topology, sessions: SessionSet) -> Topology:
    """The topology plus every link the sessions traverse, anchoring links included.

    Pages no session visits keep the links they already have.
    """
    aligned = align_sessions(sessions, topo)
    links = set(topo.links)
    for s in aligned.sessions:
        links.update(zip(s.pages, s.pages[1:]))
    added = len(links) - topo.n_links
    if added:
        logger.info("Added %d traversed links to the topology", added)
    return build_topology(topo.labels, topo.home, sorted(links))


# ---------------------------------------------------------------------------
# Summary statistics
# ---------------------------------------------------------------------------

def summary_stats(sessions: SessionSet, topo: Topology | None = None) -> SummaryStats:
    """Data-set characteristics measured on sessions before home anchoring.

    Standard deviations are population (divide by n). The home self-loop is
    an artificial link and is left out of link and degree figures.
    """
    if sessions.sessions:
        lengths = np.array([len(s.pages) for s in sessions.sessions], dtype=np.float64)
        weights = np.array([s.weight for s in sessions.sessions], dtype=np.float64)
        n_sessions = int(weights.sum())
        n_requests = int((lengths * weights).sum())
        mean_len = float(np.average(lengths, weights=weights))
        std_len = float(np.sqrt(np.average((lengths - mean_len) ** 2, weights=weights)))
        max_len = int(lengths.max())
        initial = {sessions.labels[s.pages[0]] for s in sessions.sessions}
        terminating = {sessions.labels[s.pages[-1]] for s in sessions.sessions}
    else:
        n_sessions = n_requests = max_len = 0
        mean_len = std_len = 0.0
        initial, terminating = set(), set()

    n_pages = n_links = 0
    out_mean = out_std = in_mean = in_std = 0.0
    if topo is not None:
        out_deg = topo.out_degree.astype(np.float64)
        in_deg = topo.in_degree.astype(np.float64)
        out_deg[topo.home] -= 1
        in_deg[topo.home] -= 1
        n_pages, n_links = topo.n_pages, topo.n_links - 1
        out_mean, out_std = float(out_deg.mean()), float(out_deg.std())
        in_mean, in_std = float(in_deg.mean()), float(in_deg.std())

    return SummaryStats(
        n_pages=n_pages,
        n_links=n_links,
        n_sessions=n_sessions,
        n_requests=n_requests,
        mean_session_length=mean_len,
        stdev_session_length=std_len,
        max_session_length=max_len,
        n_initial_pages=len(initial),
        n_terminating_pages=len(terminating),
        mean_out_degree=out_mean,
        stdev_out_degree=out_std,
        mean_in_degree=in_mean,
        stdev_in_degree=in_std,
    )
