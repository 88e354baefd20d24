from types import SimpleNamespace

import pytest
from hypothesis import given, strategies as st

from outertrack.audit import (EdgeOrder, NotWithinHorizon, chi_minus, equality_example,
                              estimate_edge_order, is_immersed_loop, mixing_certificate,
                              upper_bound_audit, witness_loop)
from outertrack.construction import ConstructionParams, Gamma, big_F
from outertrack.errors import OrderViolation
from outertrack.graphs import MarkedGraph, compose, rose
from outertrack.measures import approximate_retraction, build_normalized_system
from outertrack.sequence import run_sequence


def theta():
    return MarkedGraph(2, (0, 1, 0, 1, 0, 1), ("p", "q", "r"))


def circles(k):
    return MarkedGraph(k, tuple(v for v in range(k) for _ in (0, 1)),
                       tuple(f"o_{v}" for v in range(k)))


def matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))]
            for i in range(len(A))]


class TestComplexity:
    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_rose(self, n):
        assert chi_minus(rose(n)).value == n - 1

    def test_theta(self):
        assert chi_minus(theta()).value == 1

    def test_disjoint_circles(self):
        assert chi_minus(circles(3)).value == 0

    def test_forests_count_zero(self):
        G = Gamma(5).tagged("a_0")[0]
        tree = [e for e in G.edges if G.labels[e] in ("a_0", "a_1")]
        assert chi_minus(G, tree).value == 0 and chi_minus(G, tree).components == ()

    def test_construction_graph(self):
        for n in range(4, 8):
            assert chi_minus(Gamma(n).tagged("a_0")[0]).value == n - 1

    @given(st.lists(st.integers(1, 6), min_size=1, max_size=5))
    def test_additive_over_components(self, ranks):
        # disjoint roses: chi is the sum
        origins, labels, off = [], [], 0
        for j, r in enumerate(ranks):
            for k in range(r):
                origins += [j, j]
                labels.append(f"x{j}_{k}")
        G = MarkedGraph(len(ranks), tuple(origins), tuple(labels))
        assert chi_minus(G).value == sum(r - 1 for r in ranks)

    def test_subgraph_of_gamma(self):
        G = Gamma(5).tagged("a_0")[0]
        name = {G.labels[e]: e for e in G.edges}
        sub = [name[x] for x in ("a_0", "b_0", "c", "b_1", "b_2")]
        assert chi_minus(G, sub).value == 2


class TestMixing:
    def test_uniform_depths(self):
        run = run_sequence(5, [ConstructionParams.uniform(5, 2, 2)] * 6)
        assert mixing_certificate(run, 0) == 3

    def test_against_direct_products(self):
        run = run_sequence(5, [ConstructionParams.uniform(5, 2, 2)] * 6)
        mats = [[list(M.row(i)) for i in range(M.rows)] for M in run.step_matrices]
        for K in (0, 1, 10, 100):
            d = mixing_certificate(run, K)
            P = mats[0]
            depth = 1
            while min(min(r) for r in P) <= K:
                P = matmul(P, mats[depth]) if run.direction == "folding" else matmul(mats[depth], P)
                depth += 1
            assert d == depth

    def test_monotone_in_K(self):
        run = run_sequence(5, [ConstructionParams.uniform(5, 2, 2)] * 6)
        depths = [mixing_certificate(run, K) for K in (0, 1, 10, 100, 1000)]
        assert all(isinstance(d, int) for d in depths[:4])
        ints = [d for d in depths if not isinstance(d, NotWithinHorizon)]
        assert ints == sorted(ints)

    def test_not_within_horizon(self):
        run = run_sequence(5, [ConstructionParams.uniform(5, 2, 2)] * 2)
        res = mixing_certificate(run, 0)
        assert not res and isinstance(res, NotWithinHorizon)


def fake_run(vectors, labels):
    return SimpleNamespace(horizon=len(vectors) - 1, dim=len(labels), labels=labels,
                           measure=lambda t: vectors[t])


class TestEdgeOrder:
    def order_of(self, vectors, labels, **kw):
        run = fake_run(vectors, labels)
        return estimate_edge_order(run, measure=run.measure, **kw)

    def test_geometric_rates(self):
        vecs = [[3 ** t, 2 ** t, 3 ** t + 1] for t in range(10)]
        eo = self.order_of(vecs, ("x", "y", "z"))
        assert eo.classes == [[0, 2], [1]]
        assert eo.relation(0, 1) == "<" and eo.relation(1, 0) == ">"
        assert eo.relation(0, 2) == "~"
        assert eo.complete and eo.is_transitive()

    def test_symmetric(self):
        eo = self.order_of([[5, 5]] * 6, ("x", "y"))
        assert eo.classes == [[0, 1]] and eo.relation(0, 1) == "~"

    def test_oscillation_is_unclassifiable(self):
        vecs = [[1, 1], [1, 10], [1, 1], [1, 10]]
        eo = self.order_of(vecs, ("x", "y"))
        assert not eo.complete and eo.relation(0, 1) == "?"

    def test_margin_must_exceed_one(self):
        with pytest.raises(ValueError):
            self.order_of([[1, 1]] * 4, ("x", "y"), margin=1)

    @given(st.lists(st.integers(2, 9), min_size=2, max_size=5))
    def test_transitive_for_geometric(self, rates):
        vecs = [[r ** t for r in rates] for t in range(8)]
        eo = self.order_of(vecs, tuple(f"e{k}" for k in range(len(rates))))
        assert eo.is_transitive()
        for c1, c2 in zip(eo.classes, eo.classes[1:]):
            assert rates[c1[0]] > rates[c2[0]]

    def test_game_run(self, folding_game):
        run, _ = folding_game
        dec = approximate_retraction(build_normalized_system(run))
        eo = estimate_edge_order(run, margin=4, exclude=dec.h0)
        assert eo.complete and eo.is_transitive()
        assert eo.to_json()["classes"] == [["b_1", "b_2"], ["a_1", "a_2"]]


class TestWitness:
    def setup_method(self):
        self.n = 5
        self.G = Gamma(self.n).tagged("a_0")[0]
        self.name = {self.G.labels[e]: e for e in self.G.edges}
        self.F = big_F(self.n, ConstructionParams.uniform(self.n, 2, 2))

    def labels(self, path):
        return [self.G.labels[h >> 1] if h % 2 == 0 else self.G.labels[h >> 1].upper()
                for h in path.letters()]

    def test_loop_edge_is_its_own_witness(self):
        loop = witness_loop(self.G, None, self.name["b_0"])
        assert self.labels(loop) == ["b_0"]

    def test_graph_search_fallback(self):
        a1 = self.name["a_1"]
        loop = witness_loop(self.G, self.F.image(2 * self.name["c"]), a1)
        assert self.labels(loop) == ["a_1", "a_2", "a_0"]

    def test_gap_in_image(self):
        FF = compose(self.F, self.F)
        a1 = self.name["a_1"]
        loop = witness_loop(self.G, FF.image(2 * self.name["c"]), a1)
        assert self.labels(loop) == ["a_1", "b_2", "A_1", "b_1"]
        assert is_immersed_loop(self.G, loop.letters())

    def test_forbidding_everything(self):
        a1 = self.name["a_1"]
        others = [e for e in self.G.edges if e != a1]
        assert witness_loop(self.G, None, a1, others) is None

    def test_every_edge_has_a_witness(self):
        for e in self.G.edges:
            loop = witness_loop(self.G, None, e)
            assert e in {h >> 1 for h in loop.letters()}
            assert is_immersed_loop(self.G, loop.letters())


class TestAudit:
    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_equality_example(self, n):
        G, blocks, order = equality_example(n)
        rep = upper_bound_audit(G, [], blocks, order)
        assert rep.k == 2 * n - 1 and rep.equality and rep.passed
        assert rep.s == n and rep.m == 0 and rep.slack == 0
        assert rep.chi_initial == 0 and rep.chi_total == n - 1
        assert [st.raise_ for st in rep.steps] == [1] * (n - 1)

    def test_single_block_rose(self):
        G = rose(4)
        rep = upper_bound_audit(G, [], [list(G.edges)], [list(G.edges)])
        assert rep.k == 1 and rep.s == 4 and rep.passed and rep.slack == 6

    def test_order_violation(self):
        # theta graph: adding the two bridges one at a time raises nothing the first time
        G = theta()
        blocks = [[0], [1], [2]]
        with pytest.raises(OrderViolation):
            upper_bound_audit(G, [], blocks, [[0], [1], [2]])
        rep = upper_bound_audit(G, [], blocks, [[0], [1], [2]], strict=False)
        assert rep.violation and not rep.passed

    def test_m_counts_isolated_cycles(self):
        # a bigon, a bridge and a loop: the bigon starts as its own cycle
        G = MarkedGraph(3, (0, 1, 0, 1, 1, 2, 2, 2), ("u", "v", "t", "w"))
        rep = upper_bound_audit(G, [], [[0, 1], [2], [3]], [[0, 1], [2], [3]])
        assert (rep.s, rep.m, rep.k) == (1, 1, 3)
        assert rep.passed and rep.equality
        assert [(st.chi_before, st.chi_after) for st in rep.steps] == [(0, 1)]

    def test_blocks_must_partition(self):
        G = rose(3)
        with pytest.raises(ValueError):
            upper_bound_audit(G, [], [[0], [0, 1]], [[0, 1, 2]])

    def test_game_decomposition(self, folding_game):
        run, _ = folding_game
        dec = approximate_retraction(build_normalized_system(run))
        eo = estimate_edge_order(run, margin=4, exclude=dec.h0)
        G = Gamma(5).tagged("a_0")[0]
        rep = upper_bound_audit(G, dec.h0, dec.blocks, eo)
        assert rep.passed and rep.k == 4
        assert (rep.s, rep.m, rep.chi_initial, rep.chi_total) == (2, 0, 2, 4)
        assert rep.to_json()["inequality"] == "4 <= (2+0) + (5-1) = 6 <= 9"
