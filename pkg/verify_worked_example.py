import sys
from pathlib import Path

# Add project root to path
sys.path.append(str(Path.cwd()))

try:
    from siterank.chains import build_counts, popularity_chain, popularity_chain_unpopular, site_chain
    from siterank.exact import entropy_theory, power_iteration
    from siterank.infometrics import max_relative_entropy, normalized_relative_entropy, relative_entropy
    from siterank.ingest import align_sessions, anchor_home, read_sessions, read_topology
    from siterank.walk import replay_walk
except ImportError as e:
    print(f"ImportError: {e}")
    sys.exit(1)

FIXTURES = Path(__file__).resolve().parent / "tests" / "fixtures"


def _check(name: str, got: float, expected: float, tol: float) -> bool:
    if abs(got - expected) > tol:
        print(f"❌ {name}: expected {expected} ± {tol}, got {got:.6f}")
        return False
    print(f"✅ {name} = {got:.4f}")
    return True


def verify():
    print("--- Verifying Worked Example ---")

    sessions = anchor_home(read_sessions(FIXTURES / "sample.sessions"), "HP")
    sample_topo = read_topology(FIXTURES / "sample.topology", "HP")
    dense_topo = read_topology(FIXTURES / "dense.topology", "HP")

    replay = replay_walk(sessions)
    if replay.t != 49:
        print(f"❌ Replay length: expected t = 49, got {replay.t}")
        return False
    print(f"✅ Replay length t = {replay.t}")

    P = popularity_chain(build_counts(align_sessions(sessions, sample_topo)))
    Q = site_chain(sample_topo)
    P2 = popularity_chain_unpopular(build_counts(align_sessions(sessions, dense_topo)), dense_topo)
    Q2 = site_chain(dense_topo)

    checks = [
        ("Replay H", replay.H, 44.42, 0.01),
        ("H theory (popularity)", entropy_theory(P, power_iteration(P)), 0.91, 0.005),
        ("H theory (site)", entropy_theory(Q, power_iteration(Q)), 1.36, 0.01),
        ("H theory (site, unpopular links)", entropy_theory(Q2, power_iteration(Q2)), 1.86, 0.01),
        ("D(P||Q)", relative_entropy(P, Q), 1.66, 0.01),
        ("Dmax", max_relative_entropy(Q), 5.91, 0.01),
        ("D normalized", normalized_relative_entropy(P, Q), 0.2809, 0.002),
        ("Dmax (unpopular links)", max_relative_entropy(Q2), 9.08, 0.01),
    ]
    if not all([_check(*c) for c in checks]):
        return False

    print(f"ℹ️ D(P'||Q') = {relative_entropy(P2, Q2):.4f}")

    print("\n🎉 Verification Passed!")
    return True


if __name__ == "__main__":
    if not verify():
        sys.exit(1)
