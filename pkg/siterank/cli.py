import argparse
import asyncio
import json
import logging
import math
import time
from pathlib import Path

from siterank import __version__
from siterank.chains import (
    build_counts,
    popularity_chain,
    popularity_chain_unpopular,
    site_chain,
    stationary_from_counts,
)
from siterank.config import (
    DROP_FIRST,
    HOME_LABEL,
    IN_EXPONENT,
    LENGTH_EXPONENT,
    MAX_CONCURRENT,
    MAX_ITERS,
    OUTPUT_DIR,
    OUT_EXPONENT,
    SESSION_TIMEOUT_MINUTES,
    SESSIONS_PER_PAGE,
    TERMINATION_PROB,
    TOLERANCE,
    TOP_K,
    WALK_FACTOR,
)
from siterank.errors import DataError, SiteRankError, UsageError
from siterank.exact import entropy_theory, power_iteration
from siterank.infometrics import (
    footrule_complement,
    max_relative_entropy,
    normalized_relative_entropy,
    powerlaw_fit,
    relative_entropy,
    top_k,
)
from siterank.ingest import (
    add_traversed_links,
    align_sessions,
    anchor_home,
    format_sessions,
    format_topology,
    infer_topology,
    read_log,
    read_sessions,
    read_topology,
    sessionize_log,
    summary_stats,
)
from siterank.models import ModelKind, RankVector, SessionSet, Topology, TransitionModel
from siterank.synth import generate_sessions, generate_topology, run_scaling_experiment
from siterank.walk import random_walk, replay_walk, walk_length

logger = logging.getLogger(__name__)

RANK_MODES = [kind.value for kind in ModelKind]
COMPARE_MODES = [ModelKind.POPULARITY.value, ModelKind.POPULARITY_UNPOPULAR.value]
METHODS = ["exact", "walk"]


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


# --- Shared helpers ---

def _params(args: argparse.Namespace) -> dict:
    return {
        key: str(value) if isinstance(value, Path) else value
        for key, value in vars(args).items()
        if key != "handler"
    }


def _report(command: str, args: argparse.Namespace, started: float, **fields) -> dict:
    return {
        "tool_version": __version__,
        "command": command,
        "params": _params(args),
        **fields,
        "seconds": round(time.perf_counter() - started, 2),
    }


def _top_k_rows(pi: RankVector, k: int) -> list[dict]:
    return [page._asdict() for page in top_k(pi, k)]


def _load(args: argparse.Namespace) -> tuple[SessionSet, Topology | None]:
    sessions = anchor_home(read_sessions(args.sessions), args.home)
    topo = read_topology(args.topology, args.home) if args.topology else None
    return sessions, topo


def _popularity_model(sessions: SessionSet, topo: Topology | None, mode: str) -> TransitionModel:
    if mode == ModelKind.POPULARITY_UNPOPULAR:
        if topo is None:
            raise UsageError("Mode popularity-unpopular needs --topology")
        return popularity_chain_unpopular(build_counts(align_sessions(sessions, topo)), topo)
    if topo is not None:
        sessions = align_sessions(sessions, topo)
    return popularity_chain(build_counts(sessions))


def _stationary(model: TransitionModel, args: argparse.Namespace) -> RankVector:
    return power_iteration(model, tolerance=args.tol, max_iters=args.max_iters)


def _require_seed(args: argparse.Namespace) -> None:
    if args.method == "walk" and args.seed is None:
        raise UsageError("Method walk needs --seed")


# --- Commands ---

def cmd_rank(args: argparse.Namespace) -> dict:
    """Rank pages by one model, exactly or by random walk."""
    started = time.perf_counter()
    _require_seed(args)
    sessions, topo = _load(args)

    if args.mode == ModelKind.SITE:
        model = site_chain(topo if topo is not None else infer_topology(sessions))
    else:
        model = _popularity_model(sessions, topo, args.mode)

    fields: dict = {"mode": args.mode, "method": args.method}
    if args.method == "exact":
        if args.mode == ModelKind.POPULARITY and topo is None:
            pi = stationary_from_counts(build_counts(sessions))
        else:
            pi = _stationary(model, args)
        fields["H_theory"] = entropy_theory(model, pi)
    else:
        stats = random_walk(model, model.home, walk_length(model, args.walk_factor), args.seed)
        pi = RankVector(model.labels, stats.pi_hat, model.kind)
        fields["walk"] = stats.as_dict()

    if args.mode == ModelKind.POPULARITY:
        fields["replay"] = replay_walk(sessions).as_dict()

    fields["pi"] = pi.as_dict()
    fields["top_k"] = _top_k_rows(pi, args.k)
    return _report("rank", args, started, **fields)


def cmd_compare(args: argparse.Namespace) -> dict:
    """Relative entropy, top-k agreement and power-law shape of popularity vs site rank."""
    started = time.perf_counter()
    _require_seed(args)
    sessions, topo = _load(args)
    if topo is None:
        if args.mode == ModelKind.POPULARITY_UNPOPULAR:
            raise UsageError("Mode popularity-unpopular needs --topology")
        topo = infer_topology(sessions)

    P = _popularity_model(sessions, topo, args.mode)
    Q = site_chain(topo)
    if args.method == "exact":
        pi_pop, pi_site = _stationary(P, args), _stationary(Q, args)
    else:
        walk_pop = random_walk(P, P.home, walk_length(P, args.walk_factor), args.seed)
        walk_site = random_walk(Q, Q.home, walk_length(Q, args.walk_factor), args.seed)
        pi_pop = RankVector(P.labels, walk_pop.pi_hat, P.kind)
        pi_site = RankVector(Q.labels, walk_site.pi_hat, Q.kind)

    top_pop, top_site = top_k(pi_pop, args.k), top_k(pi_site, args.k)
    k = min(args.k, len(top_pop))
    footrule = footrule_complement(
        [page.label for page in top_pop], [page.label for page in top_site], k
    )
    return _report(
        "compare", args, started,
        mode=args.mode,
        method=args.method,
        D=relative_entropy(P, Q),
        Dmax=max_relative_entropy(Q),
        D_normalized=normalized_relative_entropy(P, Q),
        top_k={
            "popularity": [page._asdict() for page in top_pop],
            "site": [page._asdict() for page in top_site],
        },
        footrule_complement=footrule,
        powerlaw={
            "popularity": powerlaw_fit(pi_pop, 0).as_dict(),
            "site": powerlaw_fit(pi_site, args.drop_first).as_dict(),
        },
    )


def cmd_synth(args: argparse.Namespace) -> dict:
    """Write a synthetic topology file and session file."""
    started = time.perf_counter()
    n_sessions = args.sessions or math.ceil(SESSIONS_PER_PAGE * args.pages)
    length_exponent = None if args.no_length_cap else args.length_exponent

    generated = generate_topology(args.pages, args.in_exponent, args.out_exponent, args.seed)
    sessions = generate_sessions(
        generated, n_sessions, args.seed, args.termination_prob, length_exponent
    )
    topo = add_traversed_links(generated, sessions)

    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    topology_path = prefix.with_name(prefix.name + ".topology")
    sessions_path = prefix.with_name(prefix.name + ".sessions")
    topology_path.write_text(format_topology(topo), encoding="utf-8")
    sessions_path.write_text(format_sessions(sessions), encoding="utf-8")
    logger.info("Wrote %s and %s", topology_path, sessions_path)

    return _report(
        "synth", args, started,
        topology=str(topology_path),
        sessions=str(sessions_path),
        n_pages=topo.n_pages,
        n_links=topo.n_links,
        n_sessions=sessions.n_sessions,
    )


async def _log_progress(done: int, total: int) -> None:
    logger.info("Experiment progress: %d/%d cells", done, total)


def cmd_experiment(args: argparse.Namespace) -> dict:
    """Scaling experiment over synthetic sites, written as CSV."""
    started = time.perf_counter()
    length_exponent = None if args.no_length_cap else args.length_exponent
    result = asyncio.run(run_scaling_experiment(
        args.sizes,
        args.seeds,
        in_exponent=args.in_exponent,
        out_exponent=args.out_exponent,
        termination_prob=args.termination_prob,
        length_exponent=length_exponent,
        sessions_per_page=args.sessions_per_page,
        walk_factor=args.walk_factor,
        drop_first=args.drop_first,
        max_concurrent=args.max_concurrent,
        progress_callback=_log_progress,
    ))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    residuals_path = out.with_name(f"{out.stem}_residuals{out.suffix or '.csv'}")
    result.table.to_csv(out, index=False)
    result.residuals.to_csv(residuals_path, index=False)
    logger.info("Wrote %s (%d rows) and %s", out, len(result.table), residuals_path)

    return _report(
        "experiment", args, started,
        csv=str(out),
        residuals_csv=str(residuals_path),
        rows=len(result.table),
    )


def cmd_sessionize(args: argparse.Namespace) -> dict:
    """Turn a `user,timestamp,page` log into a session file."""
    started = time.perf_counter()
    sessions = anchor_home(sessionize_log(read_log(args.log), args.timeout), args.home)
    text = format_sessions(sessions)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info("Wrote %d sessions to %s", sessions.n_sessions, out)
    return _report("sessionize", args, started, sessions=str(out), n_sessions=sessions.n_sessions)


def cmd_stats(args: argparse.Namespace) -> dict:
    """Summary statistics of a session collection and its topology."""
    started = time.perf_counter()
    raw = read_sessions(args.sessions)
    if args.topology:
        topo = read_topology(args.topology, args.home)
    else:
        topo = infer_topology(anchor_home(raw, args.home))
    return _report("stats", args, started, **summary_stats(raw, topo).as_dict())


# --- Registration ---

def _add_input_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("sessions", type=Path, help="session file")
    parser.add_argument("--topology", type=Path, help="topology file (src<TAB>dst per line)")
    parser.add_argument("--home", default=HOME_LABEL, help="home page label")


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=METHODS, default="exact")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--k", type=int, default=TOP_K)
    parser.add_argument("--walk-factor", type=int, default=WALK_FACTOR)
    parser.add_argument("--tol", type=float, default=TOLERANCE)
    parser.add_argument("--max-iters", type=int, default=MAX_ITERS)


def _add_generator_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in-exponent", type=float, default=IN_EXPONENT)
    parser.add_argument("--out-exponent", type=float, default=OUT_EXPONENT)
    parser.add_argument("--termination-prob", type=float, default=TERMINATION_PROB)
    parser.add_argument("--length-exponent", type=float, default=LENGTH_EXPONENT)
    parser.add_argument("--no-length-cap", action="store_true", help="no power-law session length cap")


def register_commands(subparsers) -> None:
    rank = subparsers.add_parser("rank", help="rank pages by one model")
    _add_input_args(rank)
    rank.add_argument("--mode", choices=RANK_MODES, default=ModelKind.POPULARITY.value)
    _add_model_args(rank)
    rank.set_defaults(handler=cmd_rank)

    compare = subparsers.add_parser("compare", help="compare popularity rank with site rank")
    _add_input_args(compare)
    compare.add_argument("--mode", choices=COMPARE_MODES, default=ModelKind.POPULARITY.value)
    _add_model_args(compare)
    compare.add_argument("--drop-first", type=int, default=DROP_FIRST,
                         help="leading site rank points left out of the power-law fit")
    compare.set_defaults(handler=cmd_compare)

    synth = subparsers.add_parser("synth", help="generate a synthetic site")
    synth.add_argument("--pages", type=int, required=True)
    synth.add_argument("--sessions", type=int, help="default: ceil(1.2 * pages)")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out-prefix", default=str(OUTPUT_DIR / "synth"))
    _add_generator_args(synth)
    synth.set_defaults(handler=cmd_synth)

    experiment = subparsers.add_parser("experiment", help="scaling experiment over synthetic sites")
    experiment.add_argument("--sizes", type=int, nargs="+", required=True)
    experiment.add_argument("--seeds", type=int, nargs="+", default=[0])
    experiment.add_argument("--sessions-per-page", type=float, default=SESSIONS_PER_PAGE)
    experiment.add_argument("--walk-factor", type=int, default=WALK_FACTOR)
    experiment.add_argument("--drop-first", type=int, default=DROP_FIRST)
    experiment.add_argument("--max-concurrent", type=int, default=MAX_CONCURRENT)
    experiment.add_argument("--out", default=str(OUTPUT_DIR / "experiment.csv"))
    _add_generator_args(experiment)
    experiment.set_defaults(handler=cmd_experiment)

    sessionize = subparsers.add_parser("sessionize", help="split a server log into sessions")
    sessionize.add_argument("log", type=Path, help="CSV with user,timestamp,page columns")
    sessionize.add_argument("--timeout", type=float, default=SESSION_TIMEOUT_MINUTES, help="minutes")
    sessionize.add_argument("--home", default=HOME_LABEL)
    sessionize.add_argument("--out", default=str(OUTPUT_DIR / "log.sessions"))
    sessionize.set_defaults(handler=cmd_sessionize)

    stats = subparsers.add_parser("stats", help="summary statistics of a session file")
    _add_input_args(stats)
    stats.set_defaults(handler=cmd_stats)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="siterank", description="Site rank and popularity rank of a web site")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def run(argv: list[str] | None = None) -> int:
    """Run one command and print its JSON report; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
        report = args.handler(args)
    except SiteRankError as e:
        logger.error("%s", e)
        return e.exit_code
    except OSError as e:
        logger.error("File error: %s", e)
        return DataError.exit_code
    except Exception:
        logger.exception("Unexpected failure")
        return SiteRankError.exit_code

    print(json.dumps(report, indent=2, ensure_ascii=False))
    return 0
