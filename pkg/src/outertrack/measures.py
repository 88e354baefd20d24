"""Normalized transition matrices, ergodic rank estimates and decompositions.

With game indices both directions look alike: ``B(r,s)`` is the product of
game steps ``r..s-1`` in graph edge order, the weights ``w_t`` are the column
sums of ``B(0,t)`` (frequency current when folding, simplicial length when
unfolding) and ``M̃(r,s) = diag(w_r) B(r,s) diag(1/w_s)`` is column stochastic
with ``M̃(r,t) = M̃(r,s) M̃(s,t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr, mpq, mpz

from .errors import InsufficientDepth, ZeroDiagonal
from .matrices import FOLDING, ExactMatrix

PRECISION = 160


def _ratio(num, den):
    """num/den as a float, rounding huge integers through mpfr first."""
    if num == 0:
        return 0.0
    with gmpy2.context(gmpy2.get_context(), precision=PRECISION):
        return float(mpfr(num) / mpfr(den))


@dataclass(frozen=True)
class MeasureVector:
    kind: str
    values: tuple
    normalization: str = "unit-edge"

    def total(self):
        return sum(self.values, mpz(0))


@dataclass(frozen=True)
class NormalizedTransition:
    r: int
    s: int
    base: ExactMatrix
    left: tuple
    right: tuple

    def is_stochastic(self):
        """Exact check that every column of M̃ sums to one."""
        B = self.base
        return all(sum((self.left[i] * B[i, j] for i in range(B.rows)), mpz(0)) == self.right[j]
                   for j in range(B.cols))

    def exact(self):
        B = self.base
        return [[mpq(self.left[i] * B[i, j], self.right[j]) for j in range(B.cols)]
                for i in range(B.rows)]

    def floats(self):
        B = self.base
        return [[_ratio(self.left[i] * B[i, j], self.right[j]) for j in range(B.cols)]
                for i in range(B.rows)]


class NormalizedSystem:
    """Lazy family of M̃(r,s) over a run, optionally along a strided subsequence."""

    def __init__(self, run, stride=1):
        self.run = run
        self.stride = stride
        self.kind = "current" if run.direction == FOLDING else "length"
        self.weights = [self._weight(t) for t in range(0, run.horizon + 1)]

    def _weight(self, t):
        B = self.run.base_matrix(0, t)
        return tuple(sum(B.column(j), mpz(0)) for j in range(B.cols))

    @property
    def horizon(self):
        return self.run.horizon // self.stride

    @property
    def dim(self):
        return self.run.dim

    @property
    def labels(self):
        return self.run.labels

    def measure(self, t):
        return MeasureVector(self.kind, self.weights[t * self.stride])

    def transition(self, r, s):
        a, b = r * self.stride, s * self.stride
        return NormalizedTransition(a, b, self.run.base_matrix(a, b), self.weights[a],
                                    self.weights[b])

    def steps(self):
        return [self.transition(t, t + 1) for t in range(self.horizon)]


def build_normalized_system(run, stride=1, check=True):
    system = NormalizedSystem(run, stride)
    if check:
        for nt in system.steps():
            if not nt.is_stochastic():
                raise AssertionError(f"M̃({nt.r},{nt.s}) is not column stochastic")
    return system


# Ergodic rank -----------------------------------------------------------------

def normalized_tier1_columns(run, r, s, m=None):
    """Tier-1 columns of ``A_{r,s}`` scaled so their diagonal entry is one."""
    m = run.m if m is None else m
    A = run.game_matrix(r, s)
    cols = []
    for j in range(m):
        d = A[j, j]
        if d == 0:
            raise ZeroDiagonal(f"diagonal entry {j} vanishes")
        cols.append([mpq(A[i, j], d) for i in range(A.rows)])
    return cols


def _float_columns(A, m):
    return [[_ratio(A[i, j], A[j, j]) for i in range(A.rows)] for j in range(m)]


@dataclass
class ErgodicBound:
    rank: int
    r: int
    s: int
    cauchy: list = field(default_factory=list)

    def tail_monotone(self, k=3):
        """Whether the last ``k`` Cauchy defects are nonincreasing."""
        tail = [d for _, d in self.cauchy[-k:]]
        return len(tail) == k and all(a >= b for a, b in zip(tail, tail[1:]))

    def to_json(self):
        return {"rank": self.rank, "r": self.r, "s": self.s,
                "cauchy": [{"s": s, "defect": d} for s, d in self.cauchy]}


def ergodic_lower_bound(run, m=None, horizon=None, r=0):
    """Rank of the normalized tier-1 columns of ``A_{r,s}`` at the deepest s."""
    m = run.m if m is None else m
    horizon = run.horizon if horizon is None else horizon
    s = horizon - 1
    A = run.game_matrix(r, s)
    rank = ExactMatrix([[A[i, j] for j in range(m)] for i in range(A.rows)]).rank()
    cauchy = []
    prev = None
    for t in range(r, s + 1):
        cur = _float_columns(run.game_matrix(r, t), m)
        if prev is not None:
            cauchy.append((t, max(abs(x - y) for c1, c2 in zip(cur, prev)
                                  for x, y in zip(c1, c2))))
        prev = cur
    return ErgodicBound(rank, r, s, cauchy)


# Retraction ---------------------------------------------------------------------

@dataclass
class DecompositionReport:
    r: int
    s: int
    defect: float
    tau: float
    h0: list
    blocks: list
    ambiguous: list
    matrix: list
    labels: tuple

    @property
    def k(self):
        return len(self.blocks)

    def partition(self):
        return [self.h0] + self.blocks

    def blocks_positive(self):
        return all(self.matrix[i][j] > self.tau for b in self.blocks for i in b for j in b)

    def to_json(self):
        name = (lambda e: self.labels[e]) if self.labels else str
        return {"r": self.r, "s": self.s, "defect": self.defect, "tau": self.tau, "k": self.k,
                "H0": [name(e) for e in self.h0],
                "blocks": [[name(e) for e in b] for b in self.blocks],
                "ambiguous": [[name(e) for e in b] for b in self.ambiguous],
                "diagonal": {name(e): self.matrix[e][e] for e in range(len(self.matrix))}}


def idempotency_defect(S):
    n = len(S)
    return max(abs(sum(S[i][k] * S[k][j] for k in range(n)) - S[i][j])
               for i in range(n) for j in range(n))


def decompose_matrix(S, tau=None, labels=(), r=0, s=0):
    """Partition edges from an (approximate) retraction matrix.

    Rows whose entries never exceed ``tau`` form H⁰.  The other edges are
    grouped by the support of their column; a group whose members differ
    from that support is reported as ambiguous instead of being assigned.
    """
    defect = idempotency_defect(S)
    if tau is None:
        tau = math.sqrt(defect)
    n = len(S)
    h0 = [e for e in range(n) if max(S[e]) <= tau]
    groups = {}
    for e in range(n):
        if e in h0:
            continue
        support = frozenset(i for i in range(n) if S[i][e] > tau)
        groups.setdefault(support, []).append(e)
    blocks, ambiguous = [], []
    for support, members in sorted(groups.items(), key=lambda kv: min(kv[1])):
        (blocks if set(members) == support else ambiguous).append(sorted(members))
    return DecompositionReport(r, s, defect, tau, h0, blocks, ambiguous, S, tuple(labels))


def approximate_retraction(system, depth=None, bound=1e-3, tau=None):
    """Approximate the retraction by M̃(H-depth, H) and decompose it.

    Without ``depth`` every start point is tried and the smallest defect
    wins (ties go to the larger separation).
    """
    H = system.horizon
    if H < 1:
        raise InsufficientDepth("run has no steps")
    if depth is not None:
        if not 1 <= depth <= H:
            raise InsufficientDepth(f"depth {depth} outside 1..{H}")
        candidates = [H - depth]
    else:
        candidates = range(H)
    best = None
    for r in candidates:
        S = system.transition(r, H).floats()
        d = idempotency_defect(S)
        if best is None or d < best[0]:
            best = (d, r, S)
    defect, r, S = best
    if defect > bound:
        raise InsufficientDepth(f"idempotency defect {defect:.3g} exceeds {bound:.3g}")
    return decompose_matrix(S, tau, system.labels, r * system.stride, H * system.stride)
