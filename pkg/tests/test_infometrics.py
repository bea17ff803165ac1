import numpy as np
import pytest
import scipy.sparse as sp

from conftest import make_model, random_stochastic_rows
from siterank.chains import build_counts, popularity_chain, stationary_from_counts
from siterank.errors import DataError
from siterank.infometrics import (
    footrule_complement,
    loglog_residuals,
    max_relative_entropy,
    normalized_relative_entropy,
    powerlaw_fit,
    relative_entropy,
    top_k,
)
from siterank.ingest import align_sessions
from siterank.models import ModelKind, RankVector, TransitionModel

MUSIC_POPULARITY = [
    "HP",
    "/music/machines",
    "/music/machines/samples.html",
    "/music/machines/manufacturers",
    "/music/machines/samples.html?mmagent",
    "/music/machines/analogue-heaven",
    "/music/machines/search.cgi",
    "/music/machines/manufacturers/roland",
    "/music/machines/links",
    "/machines",
]
MUSIC_SITE = [
    "HP",
    "/music/machines/search.cgi",
    "/music/machines/manufacturers",
    "/music/machines",
    "/music/machines/links",
    "/music/machines/manufacturers/roland",
    "/music/machines/analogue-heaven",
    "/music/machines/guide",
    "/music/machines/samples.html",
    "/music/machines/samples.html?mmagent",
]
UNIVERSITY_POPULARITY = [
    "HP",
    "/news/default.asp",
    "/courses/",
    "/courses/syllabilist.asp",
    "/people/",
    "/authenticate/login.asp?section=mycti&title=mycti",
    "/programs/",
    "/cti/studentprofile/studentprofile.asp?section=mycti",
    "/cti/advising/display.asp",
    "/admissions/",
]
UNIVERSITY_SITE = [
    "/cti/advising/display.asp",
    "HP",
    "/news/default.asp",
    "/courses/",
    "/programs/",
    "/people/",
    "/cti/advising/display.asp?page=coursehistory",
    "/admissions/",
    "/advising/",
    "/cti/advising/display.asp?tab=advising&page=communicationlog",
]


def _random_site_pair(rng: np.random.Generator, n: int = 6):
    """Random popularity-like P and uniform-row Q with support(P) inside support(Q)."""
    support = rng.random((n, n)) < 0.5
    support[np.arange(n), (np.arange(n) + 1) % n] = True
    support[0, :] = True
    Q = support / support.sum(axis=1, keepdims=True)
    sub = support & (rng.random((n, n)) < 0.7)
    sub[np.arange(n), (np.arange(n) + 1) % n] = True
    labels = tuple(f"S{i}" for i in range(n))
    P = TransitionModel(labels, 0, random_stochastic_rows(rng, n, sub), ModelKind.POPULARITY)
    return P, TransitionModel(labels, 0, sp.csr_matrix(Q), ModelKind.SITE), support


class TestRelativeEntropy:
    def test_worked_example(self, sample_sessions, sample_topo, site_model):
        # sessions are re-indexed onto the topology file order
        P = popularity_chain(build_counts(align_sessions(sample_sessions, sample_topo)))
        assert relative_entropy(P, site_model) == pytest.approx(1.65866, abs=1e-4)
        assert max_relative_entropy(site_model) == pytest.approx(5.906891, abs=1e-6)
        assert normalized_relative_entropy(P, site_model) == pytest.approx(0.2809, abs=0.002)

    def test_unpopular_example(self, unpopular_model, site_unpopular_model):
        assert relative_entropy(unpopular_model, site_unpopular_model) == pytest.approx(2.5029, abs=1e-3)
        assert max_relative_entropy(site_unpopular_model) == pytest.approx(9.076816, abs=1e-6)
        assert normalized_relative_entropy(unpopular_model, site_unpopular_model) == pytest.approx(
            0.2757, abs=1e-3
        )

    def test_identical_models(self, site_model):
        assert relative_entropy(site_model, site_model) == pytest.approx(0.0, abs=1e-12)
        assert normalized_relative_entropy(site_model, site_model) == pytest.approx(0.0, abs=1e-12)

    def test_support_violation_names_link(self):
        P = make_model({0: {0: 0.5, 1: 0.5}, 1: {0: 1.0}}, 2)
        Q = make_model({0: {0: 1.0}, 1: {0: 1.0}}, 2, kind=ModelKind.SITE)
        with pytest.raises(DataError, match="S0 -> S1"):
            relative_entropy(P, Q)

    def test_different_tables(self, popularity_model, site_model):
        with pytest.raises(DataError, match="page tables"):
            relative_entropy(popularity_model, site_model)

    def test_zero_maximum(self):
        Q = make_model({0: {0: 1.0}}, 1, kind=ModelKind.SITE)
        assert max_relative_entropy(Q) == 0
        assert normalized_relative_entropy(Q, Q) == 0.0

    def test_gibbs_non_negativity(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            P, Q, _ = _random_site_pair(rng)
            assert relative_entropy(P, Q) >= -1e-12

    def test_maximum_attained_by_point_masses(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            _, Q, support = _random_site_pair(rng)
            n = support.shape[0]
            targets = [rng.choice(np.flatnonzero(support[i])) for i in range(n)]
            P = TransitionModel(
                Q.labels, 0,
                sp.csr_matrix((np.ones(n), (np.arange(n), targets)), shape=(n, n)),
                ModelKind.POPULARITY,
            )
            assert relative_entropy(P, Q) == pytest.approx(max_relative_entropy(Q), abs=1e-9)

    def test_bounded_by_maximum(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            P, Q, _ = _random_site_pair(rng)
            assert relative_entropy(P, Q) <= max_relative_entropy(Q) + 1e-9


class TestTopK:
    def test_popularity_leader(self, sample_counts):
        ranked = top_k(stationary_from_counts(sample_counts), 3)
        assert [page.label for page in ranked] == ["HP", "A1", "A4"]
        assert ranked[0].rank == 1
        assert ranked[0].probability == pytest.approx(12 / 49)

    def test_ties_by_label(self):
        pi = RankVector(("c", "a", "b", "d"), [0.25] * 4, ModelKind.SITE)
        assert [page.label for page in top_k(pi, 3)] == ["a", "b", "c"]

    def test_k_larger_than_pages(self, caplog):
        pi = RankVector(("a", "b"), [0.4, 0.6], ModelKind.SITE)
        ranked = top_k(pi, 10)
        assert [page.label for page in ranked] == ["b", "a"]
        assert "top-10 of 2" in caplog.text

    def test_invalid_k(self):
        pi = RankVector(("a",), [1.0], ModelKind.SITE)
        with pytest.raises(DataError):
            top_k(pi, 0)


class TestFootruleComplement:
    def test_music_machines(self):
        assert footrule_complement(MUSIC_POPULARITY, MUSIC_SITE, 10) == pytest.approx(1 - 30 / 110)
        assert round(footrule_complement(MUSIC_POPULARITY, MUSIC_SITE, 10), 4) == 0.7273

    def test_university(self):
        assert footrule_complement(UNIVERSITY_POPULARITY, UNIVERSITY_SITE, 10) == pytest.approx(1 - 38 / 110)
        assert round(footrule_complement(UNIVERSITY_POPULARITY, UNIVERSITY_SITE, 10), 4) == 0.6545

    def test_identical_and_disjoint(self):
        a = [f"p{i}" for i in range(10)]
        b = [f"q{i}" for i in range(10)]
        assert footrule_complement(a, a, 10) == 1.0
        assert footrule_complement(a, b, 10) == 0.0

    def test_duplicate_label(self):
        with pytest.raises(DataError, match="twice"):
            footrule_complement(["a", "a"], ["a", "b"], 2)

    def test_list_longer_than_k(self):
        with pytest.raises(DataError, match="more than k"):
            footrule_complement(["a", "b", "c"], ["a"], 2)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(3)
        pool = [f"u{i}" for i in range(25)]
        for _ in range(100):
            a = list(rng.choice(pool, size=10, replace=False))
            b = list(rng.choice(pool, size=10, replace=False))
            value = footrule_complement(a, b, 10)
            assert value == footrule_complement(b, a, 10)
            assert 0.0 <= value <= 1.0


class TestPowerlawFit:
    def test_exact_power_law(self):
        ranks = np.arange(1, 1001, dtype=np.float64)
        weights = ranks ** -1.5
        pi = RankVector(tuple(f"p{i}" for i in range(1000)), weights / weights.sum(), ModelKind.SITE)
        fit = powerlaw_fit(pi)
        assert fit.exponent == pytest.approx(1.5, abs=1e-6)
        assert fit.correlation == pytest.approx(1.0, abs=1e-9)
        assert fit.n_points == 1000

    def test_two_points(self):
        pi = RankVector(("a", "b"), [0.8, 0.2], ModelKind.POPULARITY)
        fit = powerlaw_fit(pi)
        assert fit.exponent == pytest.approx(2.0)
        assert fit.correlation == pytest.approx(1.0)

    def test_drop_first_and_zero_pages(self):
        pi = RankVector(("a", "b", "c", "d", "e"), [0.5, 0.25, 0.15, 0.1, 0.0], ModelKind.SITE)
        fit = powerlaw_fit(pi, drop_first=1)
        assert fit.points_dropped == 1
        assert fit.n_points == 3

    def test_too_few_points(self):
        pi = RankVector(("a", "b", "c"), [0.6, 0.4, 0.0], ModelKind.SITE)
        with pytest.raises(DataError, match="at least 2 points"):
            powerlaw_fit(pi, drop_first=1)

    def test_residuals(self):
        ranks = np.arange(1, 51, dtype=np.float64)
        weights = ranks ** -1.2
        pi = RankVector(tuple(f"p{i}" for i in range(50)), weights / weights.sum(), ModelKind.SITE)
        fit = powerlaw_fit(pi, drop_first=3)
        frame = loglog_residuals(pi, fit)
        assert list(frame.columns) == ["rank", "probability", "residual"]
        assert frame["rank"].iloc[0] == 4
        assert len(frame) == 47
        np.testing.assert_allclose(frame["residual"], 0.0, atol=1e-9)
