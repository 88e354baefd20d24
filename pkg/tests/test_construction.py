import itertools

import pytest

from outertrack import words as W
from outertrack.construction import (ConstructionParams, Gamma, big_F, build_gamma,
                                     closed_form_M, edge_names, elementary_maps,
                                     abelian_product_is_identity, inverse_construction,
                                     inverse_elementary_maps, unfolding_names, unfolding_order,
                                     verify_construction)
from outertrack.errors import InvalidParameters, RankTooSmall
from outertrack.graphs import is_legal_path
from outertrack.matrices import UNFOLDING, ExactMatrix, abelianization, transition_matrix

GRID = [(1, 1), (2, 5), (7, 3)]


def entry(M, n, row, col):
    names = edge_names(n)
    return M[names.index(row), names.index(col)]


class TestGamma:
    @pytest.mark.parametrize("n", range(4, 10))
    def test_counts(self, n):
        G, tt = build_gamma(n)
        assert G.num_edges == 2 * n - 3
        assert G.num_vertices == n - 2
        assert G.rank == n

    def test_n6(self):
        G, _ = build_gamma(6)
        assert (G.num_edges, G.num_vertices, G.rank) == (9, 4, 6)

    def test_n4_labels(self):
        G, _ = build_gamma(4)
        assert sorted(G.labels) == ["a_0", "a_1", "b_0", "b_1", "c"]

    def test_rank_too_small(self):
        with pytest.raises(RankTooSmall):
            build_gamma(3)

    def test_unique_nontrivial_gate(self):
        g = Gamma(5)
        G, tt = build_gamma(5)
        c = g.he("c")
        assert tt.nontrivial_gates() == [frozenset({c, c ^ 1, g.he("a_0")})]

    def test_params_validated(self):
        with pytest.raises(InvalidParameters):
            ConstructionParams(5, [1, 0], [1, 1])
        with pytest.raises(InvalidParameters):
            ConstructionParams(5, [1], [1, 1])


class TestElementaryMaps:
    def test_count_and_order(self):
        n = 6
        maps = elementary_maps(n, ConstructionParams.uniform(n, 2, 3))
        assert len(maps) == 4 * n - 11
        assert [m.name for m in maps[:4]] == ["R_a_0", "L_b_1", "R_b_1", "L_a_1"]
        assert maps[-1].name == "rho"

    def test_rein_mover_b(self):
        g = Gamma(5)
        R = next(m for m in elementary_maps(5, ConstructionParams.uniform(5, 2, 3))
                 if m.name == "R_b_1")
        img = R.morphism.image(g.he("c"))
        counts = W.letter_counts(img)
        assert counts[g.index["b_1"]] == 3 and counts[g.index["c"]] == 1
        assert img == g.word("b_1^2 c B_1")

    def test_rotator_wraps(self):
        n = 6
        g = Gamma(n)
        rho = elementary_maps(n, ConstructionParams.uniform(n, 2, 3))[-1].morphism
        assert rho.image(g.he(g.a(n - 3))) == g.word("a_0")
        assert rho.image(g.he("c")) == g.word("c")

    def test_rotator_order(self):
        n = 6
        g = Gamma(n)
        rho = elementary_maps(n, ConstructionParams.uniform(n, 2, 3))[-1].morphism
        perm = {e: rho.image(2 * e)[0] >> 1 for e in range(len(g.names))}
        for e in range(len(g.names)):
            x = e
            for _ in range(n - 2):
                x = perm[x]
            assert x == e
        assert sorted(perm.values()) == list(range(len(g.names)))

    def test_looper_length(self):
        g = Gamma(5)
        L = next(m for m in elementary_maps(5, ConstructionParams.uniform(5, 2, 3))
                 if m.name == "L_a_1")
        assert W.length(L.morphism.image(g.he("a_1"))) == 10

    def test_looper_b_image(self):
        g = Gamma(5)
        L = next(m for m in elementary_maps(5, ConstructionParams.uniform(5, 2, 3))
                 if m.name == "L_b_2")
        assert L.morphism.image(g.he("b_2")) == g.word("c A_1 b_1^3 a_1 b_2")

    def test_tags_chain(self):
        maps = elementary_maps(5, ConstructionParams.uniform(5, 2, 3))
        assert maps[0].source_tag == "a_0" and maps[-1].target_tag == "a_0"
        for f, g in zip(maps, maps[1:]):
            assert f.target_tag == g.source_tag
            assert f.target_tt == g.source_tt


class TestBigF:
    def test_short_images(self):
        g = Gamma(6)
        F = big_F(6, ConstructionParams.uniform(6, 2, 3))
        assert F.image(g.he("a_0")) == g.word("a_1")
        assert F.image(g.he("b_0")) == g.word("b_1")

    def test_rein_image_n5(self):
        g = Gamma(5)
        F = big_F(5, ConstructionParams.uniform(5, 3, 4))
        assert W.expand(F.image(g.he("c"))) == g.word("a_1 b_2 b_2 a_2 b_0 b_0 c B_0 A_2 B_2 A_1")
        assert F.image(g.he("a_2")) == g.word("c (A_2 b_2 a_2 b_0)^3 a_0")

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_images_legal(self, n):
        F = big_F(n, ConstructionParams.uniform(n, 2, 3))
        _, tt = Gamma(n).tagged("a_0")
        for h in range(2 * F.source.num_edges):
            assert is_legal_path(F.path(h), tt)

    @pytest.mark.parametrize("n,ab", list(itertools.product(range(4, 8), GRID)))
    def test_matches_closed_form(self, n, ab):
        params = ConstructionParams.uniform(n, *ab)
        assert transition_matrix(big_F(n, params)) == closed_form_M(n, params)
        verify_construction(n, params)

    def test_nonuniform_params(self):
        params = ConstructionParams(7, [2, 3, 5, 7], [11, 13, 17, 19])
        assert transition_matrix(big_F(7, params)) == closed_form_M(7, params)

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_unimodular(self, n):
        F = big_F(n, ConstructionParams.uniform(n, 2, 3))
        assert abs(ExactMatrix(abelianization(F)).det()) == 1


class TestClosedForm:
    def setup_method(self):
        self.params = ConstructionParams(6, [2, 3, 4], [5, 6, 7])
        self.M = closed_form_M(6, self.params)

    def test_tier1_entries(self):
        M = self.M
        assert entry(M, 6, "b_1", "b_1") == 5
        assert entry(M, 6, "b_2", "b_1") == 4
        assert entry(M, 6, "b_3", "b_1") == 3
        assert entry(M, 6, "c", "c") == 1
        assert entry(M, 6, "a_1", "a_1") == 2 * 2
        assert entry(M, 6, "a_2", "a_1") == 3
        assert entry(M, 6, "b_0", "b_3") == 4

    def test_last_a_column_rows_a0_b0(self):
        # computed from the composed map, not read off a template
        assert entry(self.M, 6, "a_0", "a_2") == 0
        assert entry(self.M, 6, "b_0", "a_2") == 3

    def test_unfolding_is_permutation(self):
        U = closed_form_M(6, self.params, UNFOLDING)
        assert U == self.M.permuted(unfolding_order(6))
        names = edge_names(6)
        assert [names[k] for k in unfolding_order(6)] == unfolding_names(6)
        assert unfolding_names(6) == ["a_3", "a_2", "a_1", "b_3", "b_2", "b_1", "a_0", "b_0", "c"]


class TestInverse:
    def test_rein_mover_inverse(self):
        g = Gamma(5)
        em = next(m for m in inverse_elementary_maps(5, ConstructionParams.uniform(5, 2, 3))
                  if m.name == "R_b_1^-1")
        assert em.morphism.image(g.he("c")) == g.word("B_1^2 c b_1")

    def test_looper_inverse_prefix(self):
        g = Gamma(5)
        em = next(m for m in inverse_elementary_maps(5, ConstructionParams.uniform(5, 2, 3))
                  if m.name == "L_a_1^-1")
        img = em.morphism.image(g.he("a_1"))
        assert img == g.word("(B_1 A_0 B_0 a_0)^2 C a_1")

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_inverse_abelianization(self, n):
        params = ConstructionParams.uniform(n, 2, 2)
        F, Finv = big_F(n, params), inverse_construction(n, params)
        assert abelian_product_is_identity(F, Finv)
        assert abs(ExactMatrix(abelianization(Finv)).det()) == 1

    def test_inverse_undoes_F_on_words(self):
        n = 5
        params = ConstructionParams.uniform(n, 2, 2)
        F, Finv = big_F(n, params), inverse_construction(n, params)
        for e in F.source.edges:
            letters = [x for h in W.expand(F.image(2 * e)) for x in W.expand(Finv.image(h))]
            assert W.free_reduce(letters) == (2 * e,)
