"""Folding and unfolding sequences built from repeated copies of F.

Steps are numbered ``0..H-1`` in game order.  For folding, step ``t`` is the
map G_t → G_{t+1}; for unfolding it is G_{-t-1} → G_{-t}.  In both cases the
certified game matrix is ``A_t`` and ``A_{r,s} = A_r ⋯ A_s``:

* folding: ``A_t`` is the transpose of the step's transition matrix;
* unfolding: ``A_t`` is the transition matrix in the unfolding edge order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .construction import (ConstructionParams, big_F, edge_names, tier1_width,
                           unfolding_order)
from .matrices import (FOLDING, UNFOLDING, ExactMatrix, certify_folding, certify_unfolding,
                       transition_matrix)

log = logging.getLogger(__name__)


def _inverse_perm(order):
    inv = [0] * len(order)
    for k, e in enumerate(order):
        inv[e] = k
    return inv


@dataclass
class SequenceRun:
    """Steps, all game products ``A_{r,s}`` and their certificates.

    ``order`` is the edge order of game matrices (unfolding order for the
    construction's unfolding runs); step matrices use graph edge order.
    """

    direction: str
    dim: int
    m: int
    order: tuple
    n: Optional[int] = None
    params: list = field(default_factory=list)
    step_matrices: list = field(default_factory=list)
    products: dict = field(default_factory=dict)
    certs: dict = field(default_factory=dict)
    insertions: list = field(default_factory=list)
    labels: tuple = ()

    @classmethod
    def for_construction(cls, n, direction):
        order = unfolding_order(n) if direction == UNFOLDING else list(range(2 * n - 3))
        return cls(direction, 2 * n - 3, tier1_width(n), tuple(order), n,
                   labels=tuple(edge_names(n)))

    @classmethod
    def from_matrices(cls, matrices, direction, m, order=None, labels=None):
        """A run driven by arbitrary square step matrices (graph edge order)."""
        dim = matrices[0].rows
        run = cls(direction, dim, m, tuple(order or range(dim)),
                  labels=tuple(labels or (f"e{i}" for i in range(dim))))
        for M in matrices:
            run.push(M)
        return run

    @property
    def horizon(self):
        return len(self.step_matrices)

    def edge_order(self):
        """Edge names in the order used by game matrices and certificates."""
        return [self.labels[e] for e in self.order]

    def morphism(self, t):
        return big_F(self.n, self.params[t])

    def game_step(self, t):
        M = self.step_matrices[t]
        return (M.T if self.direction == FOLDING else M).permuted(self.order)

    def game_matrix(self, r, s):
        """``A_{r,s}`` for ``r <= s``."""
        return self.products[(r, s)]

    def base_matrix(self, r, s):
        """``A_{r,s-1}`` back in graph edge order (identity when r == s)."""
        if s <= r:
            return ExactMatrix.identity(self.dim)
        return self.products[(r, s - 1)].permuted(_inverse_perm(self.order))

    def cumulative(self, r, s):
        """Transition matrix (graph edge order) of the composite over steps r..s-1.

        Folding: ``M_{s-1} ⋯ M_r`` so that cum(r,t) = cum(s,t)·cum(r,s).
        Unfolding: ``M_r ⋯ M_{s-1}`` (the map G_{-s} → G_{-r}) so that
        cum(r,t) = cum(r,s)·cum(s,t).
        """
        B = self.base_matrix(r, s)
        return B.T if self.direction == FOLDING else B

    def certify(self, A):
        if self.direction == FOLDING:
            return certify_folding(A, self.m)
        return certify_unfolding(A, self.m)

    def extend(self, params, jobs=1):
        """Append one copy of F with the given parameters."""
        self.params.append(params)
        return self.push(transition_matrix(big_F(self.n, params)), jobs=jobs)

    def push(self, M, jobs=1):
        """Append a step matrix and certify every product ending at it."""
        t = self.horizon
        self.step_matrices.append(M)
        At = self.game_step(t)
        self.products[(t, t)] = At
        for r in range(t):
            self.products[(r, t)] = self.products[(r, t - 1)] @ At
        pairs = [(r, t) for r in range(t + 1)]
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                certs = list(pool.map(lambda rs: self.certify(self.products[rs]), pairs))
        else:
            certs = [self.certify(self.products[rs]) for rs in pairs]
        self.certs.update(zip(pairs, certs))
        log.debug("step %d appended; largest entry has %d bits", t,
                  self.products[(0, t)].max_entry().bit_length())
        return self.certs[(t, t)]

    def check_cocycle(self, r, s, t):
        """Exact check of the composition rule on one triple r < s < t."""
        lhs = self.cumulative(r, t)
        if self.direction == FOLDING:
            return lhs == self.cumulative(s, t) @ self.cumulative(r, s)
        return lhs == self.cumulative(r, s) @ self.cumulative(s, t)

    def recheck_certs(self):
        return all(self.certify(self.products[rs]) == c for rs, c in self.certs.items())


def run_sequence(n, schedule, direction=FOLDING, horizon=None, jobs=1):
    """Build a run from explicit per-step parameters."""
    schedule = list(schedule)
    if horizon is not None and horizon != len(schedule):
        raise ValueError("schedule length must equal the horizon")
    run = SequenceRun.for_construction(n, direction)
    for params in schedule:
        if not isinstance(params, ConstructionParams):
            params = ConstructionParams(n, params["alphas"], params["betas"])
        run.extend(params, jobs=jobs)
    H = run.horizon
    if H >= 3 and not run.check_cocycle(0, H // 2, H):
        raise AssertionError("cumulative matrices violate the composition rule")
    return run
