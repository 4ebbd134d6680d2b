import itertools

import numpy as np
import pytest

from covgm.assign import Sense, brute_force_lap
from covgm.covariates import CovariateBundle
from covgm.glm import GlmFit, LinkKind, predict_prob_matrix
from covgm.graph import Graph, Permutation, SeedSet, matching_error, permute_matrix
from covgm.matchers import (
    METHOD_NAMES,
    InsufficientSeedsError,
    average_similarity,
    avg_sim,
    cov_neigh,
    cov_qap,
    neighborhood_match,
    no_cov_neigh,
    no_cov_qap,
    run_method,
)
from covgm.qap import brute_force_qap, seeded_faq
from covgm.simulate import shuffle_nonseeds

from conftest import random_graph


def planted(rng, n, s, p=0.3):
    a = random_graph(rng, n, p)
    seeds = SeedSet.first(s)
    b_tilde, q_star = shuffle_nonseeds(a, seeds, rng)
    return a, b_tilde, q_star, seeds


def lap_argmax_unique(score) -> bool:
    m = score.shape[0]
    vals = [score[np.arange(m), list(p)].sum() for p in itertools.permutations(range(m))]
    best = max(vals)
    return sum(abs(v - best) < 1e-9 for v in vals) == 1


def sym_prob(rng, n):
    p = np.triu(rng.random((n, n)), 1)
    return p + p.T


class TestCovQap:
    def test_noiseless_planted(self, rng):
        for _ in range(10):
            a, b_tilde, q_star, seeds = planted(rng, 50, 15)
            res = cov_qap(a, b_tilde, CovariateBundle(50), seeds, LinkKind.IDENTITY)
            np.testing.assert_allclose(res.fit.theta, [0, 1], atol=1e-10)
            assert matching_error(res.permutation, q_star, seeds) == 0
            assert res.objective == pytest.approx(0, abs=1e-12)

    def test_insufficient_seeds(self, rng):
        a = random_graph(rng, 10)
        c = CovariateBundle(10, edge_covs=(np.zeros((10, 10)),) * 3)
        with pytest.raises(InsufficientSeedsError, match="insufficient seeds"):
            cov_qap(a, a, c, SeedSet.first(4))
        with pytest.raises(InsufficientSeedsError, match="insufficient seeds"):
            cov_neigh(a, a, c, SeedSet.first(4))

    def test_node_covariates_help_fit(self, rng):
        n, s = 60, 25
        z = rng.integers(0, 3, n).astype(float)
        same = (z[:, None] == z[None, :]).astype(float)
        a = random_graph(rng, n, 0.3)
        p = np.clip(0.05 + 0.6 * a.as_float() + 0.3 * same, 0, 1)
        np.fill_diagonal(p, 0)
        upper = np.triu(rng.random((n, n)) < p, 1)
        b = Graph((upper | upper.T).astype(np.int8))
        seeds = SeedSet.first(s)
        b_tilde, q_star = shuffle_nonseeds(b, seeds, rng)
        c = CovariateBundle(n, node_covs=z, node_transforms=("equality",))
        res = cov_qap(a, b_tilde, c, seeds, LinkKind.IDENTITY)
        dev = np.abs(res.fit.theta - [0.05, 0.6, 0.3])
        assert np.all(dev <= 4 * res.fit.std_errors)
        assert res.permutation.fixes(seeds.ids)


class TestNeighborhood:
    def test_exact_expectation_distinct_rows(self, rng):
        for _ in range(100):
            m = int(rng.integers(2, 8))
            s = int(rng.integers(1, 6))
            n = m + s
            p = sym_prob(rng, n)
            seeds = SeedSet.first(s)
            rest = seeds.complement(n)
            blk = p[np.ix_(rest, seeds.ids)]
            assert len({tuple(r) for r in blk.round(12)}) == m
            q_star = Permutation(np.r_[np.arange(s), s + rng.permutation(m)])
            expect_b = permute_matrix(p, q_star)
            q, _ = neighborhood_match(p, expect_b, seeds)
            assert q == q_star
            score = expect_b[np.ix_(rest, seeds.ids)] @ blk.T
            best, _ = brute_force_lap(score, Sense.MAX)
            assert np.array_equal(rest[best.map], q_star.map[rest])

    def test_rounded_p_recovered(self, rng):
        hits = 0
        while hits < 30:
            m, s = int(rng.integers(2, 8)), 8
            n = m + s
            p = sym_prob(rng, n)
            b = Graph(np.round(p).astype(np.int8))
            seeds = SeedSet.first(s)
            rest = seeds.complement(n)
            blk = b.adj[np.ix_(rest, seeds.ids)]
            if len({tuple(r) for r in blk}) < m:
                continue
            b_tilde, q_star = shuffle_nonseeds(b, seeds, rng)
            q, _ = neighborhood_match(b, b_tilde, seeds)
            assert q == q_star
            hits += 1

    def test_two_non_seeds(self, rng):
        for _ in range(50):
            n = int(rng.integers(4, 20))
            seeds = SeedSet.first(n - 2)
            p = sym_prob(rng, n)
            b = random_graph(rng, n)
            q, score = neighborhood_match(p, b, seeds)
            i, j = n - 2, n - 1
            keep = b.adj[i, :n - 2] @ p[i, :n - 2] + b.adj[j, :n - 2] @ p[j, :n - 2]
            swap = b.adj[i, :n - 2] @ p[j, :n - 2] + b.adj[j, :n - 2] @ p[i, :n - 2]
            want = [i, j] if keep >= swap else [j, i]
            assert q.map[-2:].tolist() == want
            assert score == pytest.approx(max(keep, swap))

    def test_duplicate_rows_valid(self, rng):
        p = np.zeros((8, 8))
        p[:3, :] = p[:, :3] = 0.4
        np.fill_diagonal(p, 0)
        b = random_graph(rng, 8)
        q, _ = neighborhood_match(p, b, SeedSet.first(3))
        assert sorted(q.map.tolist()) == list(range(8)) and q.fixes([0, 1, 2])

    def test_no_seeds_rejected(self, rng):
        g = random_graph(rng, 5)
        with pytest.raises(ValueError):
            neighborhood_match(g, g, SeedSet.first(0))
        with pytest.raises(ValueError):
            no_cov_neigh(g, g, SeedSet.first(0))


class TestNoCov:
    def test_no_cov_qap_isomorphic(self, rng):
        for _ in range(5):
            a, b_tilde, q_star, seeds = planted(rng, 50, 15)
            res = no_cov_qap(a, b_tilde, seeds)
            assert matching_error(res.permutation, q_star, seeds) == 0
            assert res.fit is None

    def test_forced_theta_reduces_to_no_cov(self, rng):
        n = 30
        a = random_graph(rng, n, 0.3)
        y = random_graph(rng, n, 0.3)
        c = CovariateBundle(n, edge_covs=(y.as_float(),))
        fit = GlmFit(LinkKind.IDENTITY, np.array([0.0, 1.0, 0.0]), (), True)
        p_hat = predict_prob_matrix(fit, a, c)
        b_tilde = random_graph(rng, n, 0.3)
        seeds = SeedSet.first(8)
        r1 = seeded_faq(p_hat, b_tilde, seeds)
        r2 = no_cov_qap(a, b_tilde, seeds)
        assert r1.permutation == r2.permutation and r1.objective == r2.objective

    def test_no_cov_neigh_unshuffled_identity(self, rng):
        done = 0
        while done < 30:
            m, s = int(rng.integers(2, 8)), 6
            n = m + s
            a = random_graph(rng, n)
            seeds = SeedSet.first(s)
            blk = a.adj[s:, :s]
            if len({tuple(r) for r in blk}) < m:
                continue
            res = no_cov_neigh(a, a, seeds)
            assert res.permutation == Permutation.identity(n)
            score = blk @ blk.T.astype(float)
            assert lap_argmax_unique(score)
            done += 1

    def test_no_cov_neigh_empty_graph(self):
        g = Graph.empty(7)
        res = no_cov_neigh(g, g, SeedSet.first(2))
        assert sorted(res.permutation.map.tolist()) == list(range(7))

    def test_neigh_affine_invariance(self, rng):
        checked = 0
        while checked < 40:
            m, s = int(rng.integers(2, 7)), int(rng.integers(1, 6))
            n = m + s
            a, b = random_graph(rng, n), random_graph(rng, n)
            seeds = SeedSet.first(s)
            t0, t1 = rng.uniform(-0.5, 0.5), rng.uniform(0.1, 2.0)
            p_hat = t0 + t1 * a.as_float()
            np.fill_diagonal(p_hat, 0)
            score = b.adj[s:, :s] @ a.adj[s:, :s].T.astype(float)
            if not lap_argmax_unique(score):
                continue
            assert neighborhood_match(p_hat, b, seeds)[0] == neighborhood_match(a, b, seeds)[0]
            checked += 1

    def test_qap_affine_invariance(self, rng):
        checked = 0
        while checked < 30:
            m, s = int(rng.integers(2, 6)), int(rng.integers(1, 4))
            n = m + s
            a, b = random_graph(rng, n), random_graph(rng, n)
            seeds = SeedSet.first(s)
            t0, t1 = rng.uniform(0, 0.3), rng.uniform(0.1, 1.0)
            p_hat = t0 + t1 * a.as_float()
            np.fill_diagonal(p_hat, 0)
            objs = {}
            for blk in itertools.permutations(range(s, n)):
                q = Permutation(np.r_[np.arange(s), blk])
                objs[tuple(q.map)] = float(np.sum((permute_matrix(a.as_float(), q) - b.adj) ** 2))
            best = min(objs.values())
            if sum(v == best for v in objs.values()) != 1:
                continue
            assert brute_force_qap(a, b, seeds)[0] == brute_force_qap(p_hat, b, seeds)[0]
            checked += 1


class TestAvgSim:
    def test_y_equals_a(self, rng):
        a = random_graph(rng, 25, 0.3)
        b_tilde = random_graph(rng, 25, 0.3)
        c = CovariateBundle(25, edge_covs=(a.as_float(),))
        seeds = SeedSet.first(5)
        np.testing.assert_array_equal(average_similarity(a, c), a.as_float())
        assert avg_sim(a, b_tilde, c, seeds).objective == no_cov_qap(a, b_tilde, seeds).objective

    def test_value_set(self, rng):
        a, y = random_graph(rng, 20), random_graph(rng, 20)
        m = average_similarity(a, CovariateBundle(20, edge_covs=(y.as_float(),)))
        assert set(np.unique(m).tolist()) <= {0.0, 0.5, 1.0}

    def test_needs_edge_covariate(self, rng):
        a = random_graph(rng, 6)
        with pytest.raises(ValueError):
            avg_sim(a, a, CovariateBundle(6), SeedSet.first(2))


class TestDispatch:
    def test_all_methods_fix_seeds(self, rng):
        n = 40
        a = random_graph(rng, n, 0.3)
        y = random_graph(rng, n, 0.3)
        b = random_graph(rng, n, 0.3)
        c = CovariateBundle(n, edge_covs=(y.as_float(),))
        for s in (5, 12, 39):
            seeds = SeedSet(np.sort(rng.choice(n, s, replace=False)))
            for name in METHOD_NAMES:
                res = run_method(name, a, b, c, seeds, LinkKind.LOGIT)
                assert res.method == name
                assert res.permutation.fixes(seeds.ids)
                assert res.wall_time >= 0

    def test_name_normalised(self, rng):
        a = random_graph(rng, 8)
        res = run_method("No_Cov_QAP", a, a, CovariateBundle(8), SeedSet.first(2))
        assert res.method == "no-cov-qap"
        with pytest.raises(ValueError, match="unknown method"):
            run_method("spectral", a, a, CovariateBundle(8), SeedSet.first(2))

    def test_size_mismatch(self, rng):
        with pytest.raises(ValueError):
            no_cov_qap(random_graph(rng, 5), random_graph(rng, 6), SeedSet.first(1))
