import math
import random

import pytest
from gmpy2 import mpq

from outertrack.construction import ConstructionParams, closed_form_M
from outertrack.errors import InsufficientDepth, ZeroDiagonal
from outertrack.matrices import FOLDING, UNFOLDING, ExactMatrix
from outertrack.measures import (approximate_retraction, build_normalized_system,
                                 decompose_matrix, ergodic_lower_bound, idempotency_defect,
                                 normalized_tier1_columns)
from outertrack.sequence import SequenceRun, run_sequence


def direct_sum(A, B):
    n, m = A.rows, B.rows
    rows = [[A[i, j] if j < n else 0 for j in range(n + m)] for i in range(n)]
    rows += [[B[i, j - n] if j >= n else 0 for j in range(n + m)] for i in range(m)]
    return ExactMatrix(rows)


def two_block_run(steps=20, direction=FOLDING):
    A = closed_form_M(4, ConstructionParams.uniform(4, 1, 1))
    B = closed_form_M(4, ConstructionParams.uniform(4, 2, 3))
    return SequenceRun.from_matrices([direct_sum(A, B)] * steps, direction, 1)


class TestNormalizedColumns:
    def test_identity(self):
        run = SequenceRun.from_matrices([ExactMatrix.identity(3)] * 2, FOLDING, 3)
        cols = normalized_tier1_columns(run, 0, 1)
        assert cols == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]

    def test_zero_diagonal(self):
        run = SequenceRun.from_matrices([ExactMatrix([[1, 1], [1, 1]])], FOLDING, 1)
        run.products[(0, 0)] = ExactMatrix([[0, 1], [1, 1]])
        with pytest.raises(ZeroDiagonal):
            normalized_tier1_columns(run, 0, 0)

    def test_folding_columns_within_envelope(self, folding_game):
        run, _ = folding_game
        for r in (0, 2, 5):
            cols = normalized_tier1_columns(run, r, run.horizon - 1)
            for j, col in enumerate(cols):
                assert col[j] == 1
                assert all(x < mpq(1, 2 ** r) for i, x in enumerate(col[:run.m]) if i != j)

    def test_unfolding_columns_below_diagonal(self, unfolding_game):
        run, report = unfolding_game
        cols = normalized_tier1_columns(run, 0, run.horizon - 1)
        for j, col in enumerate(cols):
            assert all(x <= 3 for x in col[j + 1:run.m])


class TestErgodicBound:
    def test_identity_sequence(self):
        run = SequenceRun.from_matrices([ExactMatrix.identity(4)] * 3, FOLDING, 3)
        assert ergodic_lower_bound(run).rank == 3

    def test_folding_game(self, folding_game):
        run, _ = folding_game
        bound = ergodic_lower_bound(run)
        assert bound.rank == 4
        assert bound.tail_monotone()

    def test_rank_additive_on_direct_sum(self):
        A = ExactMatrix([[5, 1, 0], [0, 4, 1], [1, 0, 1]])
        B = ExactMatrix([[3, 1], [1, 2]])
        runA = SequenceRun.from_matrices([A] * 4, FOLDING, 2)
        runB = SequenceRun.from_matrices([B] * 4, FOLDING, 1)
        C = direct_sum(A, B).permuted([0, 1, 3, 2, 4])
        runC = SequenceRun.from_matrices([C] * 4, FOLDING, 3)
        assert ergodic_lower_bound(runC).rank == \
            ergodic_lower_bound(runA).rank + ergodic_lower_bound(runB).rank

    def test_rank_invariant_under_column_scaling(self, folding_game):
        run, _ = folding_game
        cols = normalized_tier1_columns(run, 0, run.horizon - 1)
        scaled = [[x * (k + 2) for x in col] for k, col in enumerate(cols)]
        den = math.lcm(*(int(x.denominator) for col in scaled for x in col))
        M = ExactMatrix([[int(scaled[j][i] * den) for j in range(4)] for i in range(len(cols[0]))])
        assert M.rank() == 4


class TestNormalizedSystem:
    @pytest.mark.parametrize("direction", [FOLDING, UNFOLDING])
    def test_stochastic_and_cocycle(self, direction):
        rng = random.Random(1)
        sched = [ConstructionParams(5, [rng.randint(1, 5) for _ in range(2)],
                                    [rng.randint(1, 5) for _ in range(2)]) for _ in range(5)]
        system = build_normalized_system(run_sequence(5, sched, direction))
        for r, s, t in ((0, 2, 5), (1, 3, 4), (0, 1, 2)):
            lhs = system.transition(r, t).exact()
            a, b = system.transition(r, s).exact(), system.transition(s, t).exact()
            prod = [[sum(a[i][k] * b[k][j] for k in range(len(a))) for j in range(len(a))]
                    for i in range(len(a))]
            assert lhs == prod

    def test_single_step_weights(self):
        M = closed_form_M(4, ConstructionParams.uniform(4, 2, 2))
        run = SequenceRun.from_matrices([M], UNFOLDING, 2)
        system = build_normalized_system(run)
        assert list(system.measure(1).values) == [sum(M.column(j)) for j in range(M.cols)]
        assert system.transition(0, 1).is_stochastic()

    def test_folding_uses_currents(self, folding_game):
        system = build_normalized_system(folding_game[0], check=False)
        assert system.kind == "current"
        assert set(system.measure(0).values) == {1}

    def test_stride(self, folding_game):
        system = build_normalized_system(folding_game[0], stride=3)
        assert system.horizon == 4
        assert system.transition(1, 2).r == 3


class TestRetraction:
    def test_exact_projection(self):
        S = [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]
        rep = decompose_matrix(S)
        assert rep.defect == 0
        assert rep.blocks == [[0, 1], [2]] and rep.h0 == []

    def test_ambiguous_support_reported(self):
        S = [[1.0, 0.5], [0.0, 0.5]]
        rep = decompose_matrix(S, tau=0.1)
        assert rep.ambiguous

    def test_synthetic_two_blocks(self):
        rep = approximate_retraction(build_normalized_system(two_block_run()), bound=1e-6)
        assert rep.k == 2 and rep.defect < 1e-6
        assert rep.blocks == [[0, 1, 2, 3, 4], [5, 6, 7, 8, 9]]
        assert rep.blocks_positive()

    def test_construction_blocks(self, folding_game):
        rep = approximate_retraction(build_normalized_system(folding_game[0]))
        assert rep.k >= 4
        assert rep.h0 == [4, 5, 6]
        assert rep.blocks_positive()
        assert sorted(sum(rep.partition(), [])) == list(range(7))

    def test_insufficient_depth(self, folding_game):
        with pytest.raises(InsufficientDepth):
            approximate_retraction(build_normalized_system(folding_game[0]), depth=1,
                                   bound=1e-9)

    def test_defect_helper(self):
        assert idempotency_defect([[1.0, 0.0], [0.0, 1.0]]) == 0
