"""Exact nonnegative integer matrices and diagonal-dominance certificates."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

from gmpy2 import mpq, mpz

from . import words as W
from .errors import ZeroDiagonal


class ExactMatrix:
    """Immutable matrix of arbitrary-precision integers, stored row-major."""

    __slots__ = ("rows", "cols", "entries", "_hash")

    def __init__(self, entries, cols=None):
        entries = tuple(tuple(mpz(x) for x in row) for row in entries)
        self.rows = len(entries)
        self.cols = len(entries[0]) if entries else (cols or 0)
        if any(len(r) != self.cols for r in entries):
            raise ValueError("ragged matrix")
        self.entries = entries
        self._hash = None

    @classmethod
    def identity(cls, n):
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows, cols):
        return cls([[0] * cols for _ in range(rows)], cols)

    @property
    def shape(self):
        return self.rows, self.cols

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def row(self, i):
        return self.entries[i]

    def column(self, j):
        return tuple(r[j] for r in self.entries)

    def __eq__(self, other):
        return isinstance(other, ExactMatrix) and self.entries == other.entries \
            and self.shape == other.shape

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.shape, self.entries))
        return self._hash

    def __repr__(self):
        return f"ExactMatrix({[[int(x) for x in r] for r in self.entries]})"

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        cols = [other.column(j) for j in range(other.cols)]
        out = []
        for r in self.entries:
            out.append([sum((a * b for a, b in zip(r, c) if a and b), mpz(0)) for c in cols])
        return ExactMatrix(out, other.cols)

    @property
    def T(self):
        return ExactMatrix([list(c) for c in zip(*self.entries)], self.rows)

    def permuted(self, order):
        """Simultaneous row/column permutation: new index k is old ``order[k]``."""
        return ExactMatrix([[self.entries[i][j] for j in order] for i in order])

    def diagonal(self):
        return tuple(self.entries[i][i] for i in range(min(self.shape)))

    def max_entry(self):
        return max((x for r in self.entries for x in r), default=mpz(0))

    def is_nonnegative(self):
        return all(x >= 0 for r in self.entries for x in r)

    def is_positive(self):
        return all(x > 0 for r in self.entries for x in r)

    def _bareiss(self):
        """Fraction-free elimination; returns (rank, determinant-or-None)."""
        a = [list(r) for r in self.entries]
        n, m = self.rows, self.cols
        rank = 0
        prev = mpz(1)
        sign = 1
        for col in range(m):
            piv = next((i for i in range(rank, n) if a[i][col] != 0), None)
            if piv is None:
                continue
            if piv != rank:
                a[rank], a[piv] = a[piv], a[rank]
                sign = -sign
            p = a[rank][col]
            for i in range(rank + 1, n):
                for j in range(col + 1, m):
                    a[i][j] = (a[i][j] * p - a[i][col] * a[rank][j]) // prev
                a[i][col] = mpz(0)
            prev = p
            rank += 1
        det = None
        if n == m:
            det = sign * a[n - 1][n - 1] if rank == n and n else (mpz(1) if n == 0 else mpz(0))
        return rank, det

    def rank(self):
        return self._bareiss()[0]

    def det(self):
        if self.rows != self.cols:
            raise ValueError("determinant of a non-square matrix")
        return self._bareiss()[1]

    def to_json(self):
        return {"rows": self.rows, "cols": self.cols,
                "entries": [[str(int(x)) for x in r] for r in self.entries]}

    @classmethod
    def from_json(cls, data):
        return cls([[int(x) for x in r] for r in data["entries"]], data["cols"])

    def to_csv(self, labels=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if labels:
            w.writerow([""] + list(labels))
        for i, r in enumerate(self.entries):
            w.writerow(([labels[i]] if labels else []) + [str(int(x)) for x in r])
        return buf.getvalue()


def transition_matrix(f):
    """Entry (i, j) counts crossings of target edge i by the image of edge j."""
    out = [[0] * f.source.num_edges for _ in range(f.target.num_edges)]
    for j, w in enumerate(f.images):
        for i, k in W.letter_counts(w).items():
            out[i][j] = k
    return ExactMatrix(out, f.source.num_edges)


def abelianization(f):
    """Signed crossing counts; this is the chain map on edges."""
    out = [[0] * f.source.num_edges for _ in range(f.target.num_edges)]
    for j, w in enumerate(f.images):
        for i, k in W.signed_counts(w).items():
            out[i][j] = k
    return out


# Rationals ------------------------------------------------------------------

def fmt_rational(q):
    q = mpq(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text):
    return mpq(text) if "/" in str(text) else mpq(int(text))


def _max_ratio(pairs):
    """Largest num/den over (num, den) pairs without forming fractions.

    Returns mpq(0) for an empty set.
    """
    best_n, best_d = mpz(0), mpz(1)
    for num, den in pairs:
        if num * best_d > best_n * den:
            best_n, best_d = num, den
    return mpq(best_n, best_d)


# Certificates ---------------------------------------------------------------

FOLDING = "folding"
UNFOLDING = "unfolding"


@dataclass(frozen=True)
class DominanceCert:
    """Tight dominance data of a matrix.

    Every stored value is the exact maximum of its ratio set (zero for an
    empty set), so the strict predicates of the definitions can be decided
    for any candidate tolerance.  ``p_outer`` bounds tier-1 columns below
    row ``m`` relative to their diagonal and ``tier2`` is the largest tier-2
    entry over the smallest tier-1 diagonal; both feed the product lemma.
    """

    kind: str
    m: int
    dim: int
    epsilon: mpq
    K: mpq
    p: Optional[mpq] = None
    delta: Optional[mpq] = None
    p_outer: Optional[mpq] = None
    tier2: Optional[mpq] = None

    def satisfies(self, epsilon, p=None, delta=None):
        """Strict (m, eps) or (m, p, eps, delta) predicate with candidate values."""
        if not self.epsilon < epsilon:
            return False
        if self.kind == FOLDING:
            return True
        return self.delta < delta and self.p < p and self.tier2 < p * delta

    @property
    def p_hyp(self):
        """Smallest p the product lemma can use for this matrix."""
        return max(mpq(1), self.p, self.p_outer, self.epsilon)

    @property
    def delta_hyp(self):
        return max(self.delta, self.tier2 / self.p_hyp)

    def to_json(self):
        out = {"kind": self.kind, "m": self.m, "dim": self.dim,
               "epsilon": fmt_rational(self.epsilon), "K": fmt_rational(self.K)}
        if self.kind == UNFOLDING:
            out.update(p=fmt_rational(self.p), delta=fmt_rational(self.delta),
                       p_outer=fmt_rational(self.p_outer), tier2=fmt_rational(self.tier2))
        return out

    @classmethod
    def from_json(cls, data):
        opt = {k: parse_rational(data[k]) for k in ("p", "delta", "p_outer", "tier2") if k in data}
        return cls(data["kind"], data["m"], data["dim"], parse_rational(data["epsilon"]),
                   parse_rational(data["K"]), **opt)


def _tier1_diagonal(A, m):
    if not 1 <= m <= min(A.shape):
        raise ValueError(f"tier-1 width {m} out of range")
    diag = [A[j, j] for j in range(m)]
    for j, d in enumerate(diag):
        if d <= 0:
            raise ZeroDiagonal(f"diagonal entry {j} of a tier-1 column is zero")
    return diag


def _K(A, diag):
    return mpq(A.max_entry(), min(diag))


def certify_folding(A, m):
    diag = _tier1_diagonal(A, m)
    eps = _max_ratio((A[i, j], diag[j]) for j in range(m) for i in range(A.rows) if i != j)
    return DominanceCert(FOLDING, m, A.rows, eps, _K(A, diag))


def certify_unfolding(A, m):
    diag = _tier1_diagonal(A, m)
    pairs = [(i, j) for j in range(m) for i in range(j)]
    delta = _max_ratio((diag[j], diag[i]) for i, j in pairs)
    eps = _max_ratio((A[i, j], diag[j]) for i, j in pairs)
    p = _max_ratio((A[j, i], diag[i]) for i, j in pairs)
    p_outer = _max_ratio((A[k, i], diag[i]) for i in range(m) for k in range(m, A.rows))
    tier2 = _max_ratio((A[i, j], min(diag)) for j in range(m, A.cols) for i in range(A.rows))
    return DominanceCert(UNFOLDING, m, A.rows, eps, _K(A, diag), p, delta, p_outer, tier2)


def predict_product_cert_folding(cA, cB, n=None):
    """Bound on the tight epsilon of A·A' from the two certificates."""
    n = cA.dim if n is None else n
    return cA.epsilon + n * cA.K * cB.epsilon


@dataclass(frozen=True)
class UnfoldingPrediction:
    p: mpq
    epsilon: mpq
    delta: mpq


def predict_product_cert_unfolding(cA, cB, n=None, p=None):
    """Bounds on (p, eps, delta) of A·A'.

    The lemma's constants are taken at hypothesis strength: ``p_hyp`` and
    ``delta_hyp`` of each certificate, or an explicit common ``p`` when the
    caller fixes one (it must dominate both ``p_hyp`` values).
    """
    n = cA.dim if n is None else n
    pA = cA.p_hyp if p is None else mpq(p)
    pB = cB.p_hyp if p is None else mpq(p)
    dA = max(cA.delta, cA.tier2 / pA)
    dB = max(cB.delta, cB.tier2 / pB)
    cross = n * cA.K * cB.epsilon + n * pA * dA * pB
    return UnfoldingPrediction(pA + cross, cA.epsilon + cross, n * cA.K * pB * dB)
