import numpy as np
import pytest

from conftest import LABELS, POPULARITY_PI, by_label
from siterank.chains import (
    build_counts,
    popularity_chain,
    popularity_chain_unpopular,
    site_chain,
    stationary_from_counts,
    with_unpopular,
)
from siterank.errors import DataError
from siterank.exact import stationary_residual
from siterank.ingest import align_sessions, anchor_home, infer_topology, load_topology, parse_sessions
from siterank.models import ModelKind, build_topology
from siterank.synth import generate_topology


def _row(model, label):
    i = model.labels.index(label)
    idx, data = model.row(i)
    return {model.labels[j]: p for j, p in zip(idx, data)}


class TestBuildCounts:
    def test_sample_sessions(self, sample_counts):
        assert sample_counts.t == 49
        assert by_label(sample_counts.m, sample_counts.labels) == {
            "HP": 12, "A1": 11, "A2": 9, "A3": 7, "A4": 10,
        }
        hp = sample_counts.labels.index("HP")
        a1 = sample_counts.labels.index("A1")
        assert sample_counts.mij[hp, hp] == 1
        assert sample_counts.mij[hp, a1] == 9

    def test_single_home_visit(self):
        counts = build_counts(anchor_home(parse_sessions("HP\n"), "HP"))
        assert counts.t == 1
        assert list(counts.m) == [1]

    def test_repeated_short_session(self):
        counts = build_counts(anchor_home(parse_sessions("2\tHP A1 HP\n"), "HP"))
        assert counts.t == 5
        assert by_label(counts.m, counts.labels) == {"HP": 3, "A1": 2}
        np.testing.assert_allclose(stationary_from_counts(counts).pi, [3 / 5, 2 / 5])

    def test_requires_anchored_sessions(self, sample_raw):
        with pytest.raises(DataError):
            build_counts(sample_raw)


class TestPopularityChain:
    def test_rows(self, popularity_model):
        assert _row(popularity_model, "HP") == pytest.approx({"HP": 1 / 12, "A1": 9 / 12, "A4": 2 / 12})
        assert _row(popularity_model, "A3") == pytest.approx({"HP": 1.0})
        assert _row(popularity_model, "A4") == pytest.approx({"A1": 0.2, "A2": 0.6, "A3": 0.2})
        assert popularity_model.kind is ModelKind.POPULARITY

    def test_stationary_from_counts(self, sample_counts):
        pi = stationary_from_counts(sample_counts)
        assert pi.as_dict() == pytest.approx(POPULARITY_PI, abs=1e-12)
        rounded = [round(pi.as_dict()[label], 2) for label in LABELS]
        assert rounded == [0.24, 0.22, 0.18, 0.14, 0.2]

    def test_fixed_point(self, sample_counts, popularity_model):
        pi = stationary_from_counts(sample_counts).pi
        np.testing.assert_allclose(popularity_model.matrix.T @ pi, pi, atol=1e-12)


class TestWithUnpopular:
    def test_unpopular_counts(self, sample_sessions, dense_topo):
        counts = with_unpopular(build_counts(align_sessions(sample_sessions, dense_topo)), dense_topo)
        assert by_label(counts.u, counts.labels) == {"HP": 1, "A1": 1, "A2": 1, "A3": 2, "A4": 1}

    def test_traversed_link_outside_topology(self, sample_sessions):
        topo = load_topology("HP\tA1\nA1\tA2\nA2\tA3\nA3\tHP\nHP\tA4\nA4\tHP\n", "HP")
        counts = build_counts(align_sessions(sample_sessions, topo))
        with pytest.raises(DataError, match="A1 -> A4 is not in the topology"):
            with_unpopular(counts, topo)

    def test_mismatched_tables(self, sample_counts, dense_topo):
        with pytest.raises(DataError, match="align"):
            with_unpopular(sample_counts, dense_topo)


class TestPopularityChainUnpopular:
    def test_rows(self, unpopular_model):
        assert _row(unpopular_model, "HP") == pytest.approx(
            {"HP": 1 / 13, "A1": 9 / 13, "A3": 1 / 13, "A4": 2 / 13}
        )
        assert _row(unpopular_model, "A1") == pytest.approx({"HP": 1 / 12, "A2": 3 / 12, "A4": 8 / 12})
        assert _row(unpopular_model, "A2") == pytest.approx({"A1": 0.1, "A3": 0.5, "HP": 0.4})
        assert _row(unpopular_model, "A3") == pytest.approx({"HP": 7 / 9, "A2": 1 / 9, "A4": 1 / 9})
        assert _row(unpopular_model, "A4") == pytest.approx(
            {"HP": 1 / 11, "A1": 2 / 11, "A2": 6 / 11, "A3": 2 / 11}
        )
        assert unpopular_model.n_transitions == 17

    def test_unvisited_page_is_uniform(self, sample_sessions):
        topo = load_topology(
            "HP\tA1\nA1\tA2\nA2\tA3\nA3\tHP\nHP\tA4\nA4\tA1\nA1\tA4\nA4\tA2\nA4\tA3\nA2\tHP\n"
            "HP\tNEW\nNEW\tHP\nNEW\tA1\n",
            "HP",
        )
        model = popularity_chain_unpopular(build_counts(align_sessions(sample_sessions, topo)), topo)
        assert _row(model, "NEW") == pytest.approx({"HP": 0.5, "A1": 0.5})


class TestSiteChain:
    def test_rows(self, site_model):
        assert _row(site_model, "HP") == pytest.approx({label: 0.2 for label in LABELS})
        assert _row(site_model, "A1") == pytest.approx({"A2": 0.5, "A4": 0.5})
        assert _row(site_model, "A4") == pytest.approx({"A1": 1 / 3, "A2": 1 / 3, "A3": 1 / 3})
        assert site_model.n_transitions == 13

    def test_dead_page(self):
        topo = build_topology(("HP", "A"), 0, [(0, 1)])
        with pytest.raises(DataError, match="'A' has no outlinks"):
            site_chain(topo)

    def test_two_page_site(self):
        model = site_chain(build_topology(("HP", "A"), 0, [(0, 1), (1, 0)]))
        assert _row(model, "HP") == pytest.approx({"HP": 0.5, "A": 0.5})
        assert _row(model, "A") == pytest.approx({"HP": 1.0})

    def test_popularity_of_uniform_usage_matches_site(self):
        ss = anchor_home(parse_sessions("HP A HP\nHP B HP\n"), "HP")
        counts = build_counts(ss)
        topo = build_topology(ss.labels, ss.home, [(0, 1), (0, 2), (1, 0), (2, 0)])
        P = popularity_chain(counts)
        Q = site_chain(topo)
        np.testing.assert_allclose(P.matrix[1:].toarray(), Q.matrix[1:].toarray())


def _random_sessions(rng: np.random.Generator):
    pages = ["HP", "a", "b", "c", "d", "e"]
    lines = []
    for _ in range(rng.integers(1, 10)):
        walk = rng.choice(pages, size=rng.integers(1, 7))
        lines.append(f"{rng.integers(1, 4)}\t{' '.join(walk)}")
    return anchor_home(parse_sessions("\n".join(lines) + "\n"), "HP")


def _row_sums(model) -> np.ndarray:
    return np.asarray(model.matrix.sum(axis=1)).ravel()


class TestRandomSessionSets:
    def test_popularity_rows_and_fixed_point(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            counts = build_counts(_random_sessions(rng))
            model = popularity_chain(counts)
            np.testing.assert_allclose(_row_sums(model), 1.0, atol=1e-9)
            assert stationary_residual(model, stationary_from_counts(counts)) <= 1e-9

    def test_unpopular_rows(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            sessions = _random_sessions(rng)
            inferred = infer_topology(sessions)
            n = inferred.n_pages
            extra = {(int(rng.integers(n)), int(rng.integers(n))) for _ in range(n)}
            topo = build_topology(inferred.labels, inferred.home, set(inferred.links) | extra)
            model = popularity_chain_unpopular(build_counts(sessions), topo)
            np.testing.assert_allclose(_row_sums(model), 1.0, atol=1e-9)

    def test_unpopular_without_untraversed_links_is_popularity(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            sessions = _random_sessions(rng)
            counts = build_counts(sessions)
            plain = popularity_chain(counts)
            unpopular = popularity_chain_unpopular(counts, infer_topology(sessions))
            np.testing.assert_allclose(unpopular.matrix.toarray(), plain.matrix.toarray(), atol=1e-12)

    def test_site_rows(self):
        rng = np.random.default_rng(37)
        for _ in range(100):
            topo = generate_topology(int(rng.integers(2, 30)), seed=int(rng.integers(2**31)))
            np.testing.assert_allclose(_row_sums(site_chain(topo)), 1.0, atol=1e-9)
