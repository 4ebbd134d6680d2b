import itertools

import numpy as np
import pytest

from covgm.graph import Graph, Permutation, SeedSet, apply_permutation, matching_error
from covgm.qap import (
    FaqOptions,
    brute_force_qap,
    is_doubly_stochastic,
    qap_objective,
    seeded_faq,
)
from covgm.simulate import correlated_er_instance, rep_rng

from conftest import path3, random_graph, random_perm, triangle


def connected_graph(rng, n, p=0.2) -> Graph:
    while True:
        g = random_graph(rng, n, p)
        seen, stack = {0}, [0]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(g.adj[u]):
                if int(v) not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        if len(seen) == n:
            return g


def automorphism_count(g: Graph) -> int:
    m = g.adj
    return sum(
        np.array_equal(m[np.ix_(p, p)], m) for p in map(list, itertools.permutations(range(g.n)))
    )


def random_seeds(rng, n, s) -> SeedSet:
    return SeedSet(np.sort(rng.choice(n, size=s, replace=False)))


class TestObjective:
    def test_identical(self, rng):
        g = random_graph(rng, 9)
        assert qap_objective(g, g, Permutation.identity(9)) == 0

    def test_triangle_vs_path(self):
        assert qap_objective(triangle(), path3(), Permutation.identity(3)) == 2

    def test_relabel_invariance(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 9))
            p = rng.random((n, n))
            p = np.triu(p, 1) + np.triu(p, 1).T
            b = random_graph(rng, n)
            q, sigma = random_perm(rng, n), random_perm(rng, n)
            inv = sigma.inverse().map
            q2 = Permutation(inv[q.map[sigma.map]])
            p2 = p[np.ix_(sigma.map, sigma.map)]
            want = qap_objective(p, b, q)
            got = qap_objective(p2, apply_permutation(b, sigma), q2)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_explicit_sum(self, rng):
        p = rng.random((5, 5))
        b = random_graph(rng, 5)
        q = random_perm(rng, 5)
        want = sum((p[q.map[i], q.map[j]] - b.adj[i, j]) ** 2 for i in range(5) for j in range(5))
        assert qap_objective(p, b, q) == pytest.approx(want, rel=1e-12)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            qap_objective(triangle(), Graph.empty(4), Permutation.identity(3))


class TestSeededFaq:
    def test_aligned_inputs(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 31))
            g = connected_graph(rng, n)
            seeds = random_seeds(rng, n, int(rng.integers(0, n - 1)))
            res = seeded_faq(g, g, seeds)
            assert res.objective == 0
            assert res.permutation == Permutation.identity(n)

    def test_shuffled_isomorphic_pair_recovered(self, rng):
        for _ in range(10):
            n = 40
            a = random_graph(rng, n, 0.3)
            seeds = SeedSet.first(10)
            rest = np.arange(10, n)
            full = np.arange(n)
            full[rest] = rest[rng.permutation(rest.size)]
            q_star = Permutation(full)
            res = seeded_faq(a, apply_permutation(a, q_star), seeds)
            assert res.objective == 0
            assert matching_error(res.permutation, q_star, seeds) == 0

    def test_contract(self, rng):
        for _ in range(40):
            n = int(rng.integers(3, 25))
            p = rng.random((n, n))
            p = np.triu(p, 1) + np.triu(p, 1).T
            b = random_graph(rng, n)
            seeds = random_seeds(rng, n, int(rng.integers(0, n)))
            res = seeded_faq(p, b, seeds)
            assert res.permutation.fixes(seeds.ids)
            assert res.objective == pytest.approx(qap_objective(p, b, res.permutation), abs=1e-12)
            assert res.objective <= res.init_objective + 1e-12
            assert 1 <= res.n_iter <= 30

    def test_iterates_stay_doubly_stochastic(self, rng):
        steps = []
        for _ in range(15):
            n = int(rng.integers(6, 30))
            p = random_graph(rng, n, 0.4)
            b = random_graph(rng, n, 0.4)
            seeds = SeedSet.first(int(rng.integers(0, 4)))
            steps.clear()
            seeded_faq(p, b, seeds, FaqOptions(max_iter=50), callback=steps.append)
            for st in steps:
                assert is_doubly_stochastic(st.iterate)
                assert 0.0 <= st.gamma <= 1.0
                assert st.f_new >= max(st.f_prev, st.f_vertex) - 1e-9 * max(1.0, abs(st.f_prev))

    def test_randomized_init(self, rng):
        p = random_graph(rng, 12)
        b = random_graph(rng, 12)
        opts = FaqOptions(init="randomized", rng_seed=5)
        r1 = seeded_faq(p, b, SeedSet.first(2), opts)
        r2 = seeded_faq(p, b, SeedSet.first(2), opts)
        assert r1.permutation == r2.permutation and r1.objective == r2.objective
        assert r1.objective <= r1.init_objective + 1e-12

    def test_explicit_init(self, rng):
        p = random_graph(rng, 6)
        res = seeded_faq(p, p, SeedSet.first(2), FaqOptions(init=np.eye(4)))
        assert res.objective == 0
        with pytest.raises(ValueError):
            seeded_faq(p, p, SeedSet.first(2), FaqOptions(init=np.ones((4, 4))))

    def test_options_validated(self):
        with pytest.raises(ValueError):
            FaqOptions(max_iter=0)
        with pytest.raises(ValueError):
            FaqOptions(rel_tol=0)
        with pytest.raises(ValueError):
            FaqOptions(init="spectral")

    def test_all_seeds_rejected(self, rng):
        g = random_graph(rng, 4)
        with pytest.raises(ValueError):
            seeded_faq(g, g, SeedSet.first(4))

    def test_tuple_unpacking(self, rng):
        g = random_graph(rng, 6)
        perm, obj, iters = seeded_faq(g, g, SeedSet.first(1))
        assert obj == 0 and iters >= 1 and perm.n == 6

    def test_brute_force_bound_n7(self):
        """n = 7, s = 2: never below the optimum; pilot equality rate 0.83."""
        rng = np.random.default_rng(1)
        hits = 0
        for _ in range(100):
            p, b = random_graph(rng, 7), random_graph(rng, 7)
            got = seeded_faq(p, b, SeedSet.first(2)).objective
            _, best = brute_force_qap(p, b, SeedSet.first(2))
            assert got >= best - 1e-9
            hits += abs(got - best) < 1e-9
        assert hits >= 60

    def test_true_p_correlated_er(self):
        exact = 0
        for rep in range(20):
            a, b_tilde, pm, q_star, seeds = correlated_er_instance(100, 0.3, 0.9, 20, rep_rng(17, rep))
            res = seeded_faq(pm, b_tilde, seeds)
            exact += matching_error(res.permutation, q_star, seeds) == 0
        assert exact >= 18


class TestBruteForce:
    def test_self_match(self, rng):
        g = random_graph(rng, 7)
        q, obj = brute_force_qap(g, g, SeedSet.first(1))
        assert obj == 0
        assert q.map.tolist() == list(range(7))

    def test_agrees_with_faq_at_zero(self, rng):
        checked = 0
        while checked < 50:
            n = int(rng.integers(3, 8))
            a = random_graph(rng, n)
            b = apply_permutation(a, Permutation(np.r_[0, 1 + rng.permutation(n - 1)]))
            res = seeded_faq(a, b, SeedSet.first(1))
            if res.objective != 0:
                continue
            assert brute_force_qap(a, b, SeedSet.first(1))[1] == 0
            checked += 1

    def test_matches_exhaustive_loop(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 7))
            p, b = rng.random((n, n)), random_graph(rng, n)
            p = np.triu(p, 1) + np.triu(p, 1).T
            seeds = SeedSet.first(int(rng.integers(0, n)))
            rest = seeds.complement(n)
            best = np.inf
            for blk in itertools.permutations(rest.tolist()):
                full = np.arange(n)
                full[rest] = blk
                best = min(best, qap_objective(p, b, Permutation(full)))
            q, obj = brute_force_qap(p, b, seeds)
            assert obj == pytest.approx(best, abs=1e-12)
            assert q.fixes(seeds.ids)

    def test_automorphism_free_unique(self, rng):
        done = 0
        while done < 10:
            g = random_graph(rng, 6)
            if automorphism_count(g) != 1:
                continue
            q, obj = brute_force_qap(g, g, SeedSet.first(0))
            assert obj == 0 and q == Permutation.identity(6)
            rest = list(range(6))
            zeros = sum(
                qap_objective(g, g, Permutation(list(p))) == 0 for p in itertools.permutations(rest)
            )
            assert zeros == 1
            done += 1

    def test_all_seeds(self, rng):
        g = random_graph(rng, 5)
        q, obj = brute_force_qap(g, g, SeedSet.first(5))
        assert q == Permutation.identity(5) and obj == 0

    def test_size_limit(self):
        with pytest.raises(ValueError):
            brute_force_qap(Graph.empty(10), Graph.empty(10), SeedSet.first(1))
