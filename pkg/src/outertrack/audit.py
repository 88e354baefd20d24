"""Complexity, edge orders, witness loops and the counting audit for the upper bound."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
from gmpy2 import mpq

from . import words as W
from .errors import OrderViolation
from .graphs import EdgePath, MarkedGraph
from .matrices import fmt_rational

log = logging.getLogger(__name__)


# Complexity -------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexityValue:
    value: int
    components: tuple   # (sorted edges, rank) per non-contractible component

    def __int__(self):
        return self.value

    def to_json(self):
        return {"chi": self.value,
                "components": [{"edges": list(es), "rank": r} for es, r in self.components]}


def _edge_components(G, edges):
    g = nx.MultiGraph()
    for e in edges:
        g.add_edge(G.origin(2 * e), G.origin(2 * e + 1), key=e)
    out = []
    for comp in nx.connected_components(g):
        sub = g.subgraph(comp)
        es = tuple(sorted(k for _, _, k in sub.edges(keys=True)))
        out.append((es, len(es) - len(comp) + 1, frozenset(comp)))
    return sorted(out)


def chi_minus(G, edges=None):
    """Sum of rank - 1 over non-contractible components of ``G`` or of an edge subset."""
    edges = sorted(set(G.edges if edges is None else edges))
    comps = tuple((es, r) for es, r, _ in _edge_components(G, edges) if r >= 1)
    return ComplexityValue(sum(r - 1 for _, r in comps), comps)


# Mixing -------------------------------------------------------------------------

@dataclass(frozen=True)
class NotWithinHorizon:
    K: int
    horizon: int
    minimum: int

    def __bool__(self):
        return False


def mixing_certificate(run, K=0, r=0):
    """Smallest depth d with every entry of the cumulative matrix over r..r+d above K."""
    lowest = None
    for d in range(1, run.horizon - r + 1):
        A = run.base_matrix(r, r + d)
        low = min(min(A.row(i)) for i in range(A.rows))
        lowest = low
        if low > K:
            return d
    return NotWithinHorizon(K, run.horizon, int(lowest) if lowest is not None else 0)


# Edge order ---------------------------------------------------------------------

LESS, SIM, GREATER, UNKNOWN = "<", "~", ">", "?"


@dataclass
class EdgeOrder:
    """Classes ``A_1 < ... < A_k'``: an edge in a later class has vanishing
    measure relative to every edge of an earlier one."""

    classes: list
    relations: dict               # (e, f) -> symbol for e < f etc.
    ratios: dict                  # (e, f) -> list of mu(f)/mu(e) at checkpoints
    checkpoints: list
    unclassifiable: list = field(default_factory=list)
    labels: tuple = ()

    @property
    def complete(self):
        return not self.unclassifiable

    def relation(self, e, f):
        if e == f:
            return SIM
        if (e, f) in self.relations:
            return self.relations[(e, f)]
        flip = {LESS: GREATER, GREATER: LESS, SIM: SIM, UNKNOWN: UNKNOWN}
        return flip[self.relations[(f, e)]]

    def class_of(self, e):
        for j, cls in enumerate(self.classes):
            if e in cls:
                return j
        raise KeyError(e)

    def is_transitive(self):
        edges = [e for cls in self.classes for e in cls]
        rank = {e: self.class_of(e) for e in edges}
        for e in edges:
            for f in edges:
                rel = self.relation(e, f)
                want = SIM if rank[e] == rank[f] else (LESS if rank[e] < rank[f] else GREATER)
                if rel != UNKNOWN and rel != want:
                    return False
        return True

    def to_json(self):
        name = (lambda e: self.labels[e]) if self.labels else str
        return {"classes": [[name(e) for e in c] for c in self.classes],
                "checkpoints": self.checkpoints,
                "pairs": [{"e": name(e), "f": name(f), "relation": rel,
                           "ratios": [fmt_rational(x) for x in self.ratios[(e, f)]]}
                          for (e, f), rel in sorted(self.relations.items())],
                "unclassifiable": [[name(e), name(f)] for e, f in self.unclassifiable]}


def _classify(ratios, margin):
    lo, hi = 1 / margin, margin
    last = ratios[-1]
    falling = all(x > y for x, y in zip(ratios, ratios[1:]))
    rising = all(x < y for x, y in zip(ratios, ratios[1:]))
    if falling and last < lo:
        return LESS
    if rising and last > hi:
        return GREATER
    if all(lo <= x <= hi for x in ratios):
        return SIM
    return UNKNOWN


def estimate_edge_order(run, horizon=None, margin=2, stride=1, exclude=(), edges=None,
                        measure=None, npoints=3):
    """Classify edge pairs from the measure ratios at the last checkpoints.

    ``measure(t)`` gives the edge weights at step ``t`` (default: column sums
    of the cumulative matrix, i.e. the normalizing weights).  ``e < f`` when
    ``mu(f)/mu(e)`` falls strictly across the checkpoints and ends below
    ``1/margin``; ``e ~ f`` when every ratio stays within ``[1/margin, margin]``.
    """
    margin = mpq(margin)
    if margin <= 1:
        raise ValueError("margin must exceed 1")
    H = run.horizon if horizon is None else horizon
    checkpoints = [H - k * stride for k in reversed(range(npoints))]
    if checkpoints[0] < 1:
        raise ValueError("horizon too short for the requested checkpoints")
    if measure is None:
        def measure(t):
            B = run.base_matrix(0, t)
            return [sum(B.column(j)) for j in range(B.cols)]
    vecs = [measure(t) for t in checkpoints]
    pool = [e for e in (edges if edges is not None else range(run.dim)) if e not in set(exclude)]
    relations, ratios, unknown = {}, {}, []
    for x, e in enumerate(pool):
        for f in pool[x + 1:]:
            rs = [mpq(v[f], v[e]) if v[e] else None for v in vecs]
            if None in rs or any(v[f] == 0 for v in vecs):
                rel = UNKNOWN
            else:
                rel = _classify(rs, margin)
            ratios[(e, f)] = [r if r is not None else mpq(0) for r in rs]
            relations[(e, f)] = rel
            if rel == UNKNOWN:
                unknown.append((e, f))
    # classes: ~ components, then sorted by the deepest measure (largest first)
    g = nx.Graph()
    g.add_nodes_from(pool)
    g.add_edges_from(pair for pair, rel in relations.items() if rel == SIM)
    last = vecs[-1]
    classes = sorted((sorted(c) for c in nx.connected_components(g)),
                     key=lambda c: (-max(last[e] for e in c), c))
    order = EdgeOrder(classes, relations, ratios, checkpoints, unknown, tuple(run.labels))
    for e, f in relations:
        if order.class_of(e) == order.class_of(f) and relations[(e, f)] not in (SIM, UNKNOWN):
            order.unclassifiable.append((e, f))
    if not order.is_transitive():
        log.warning("edge order estimate is not transitive")
    return order


# Witness loops --------------------------------------------------------------------

def _graph_search(G, e, forbidden):
    start = 2 * e
    target = G.origin(start)
    first = (G.terminus(start), start)
    prev = {first: None}
    queue = deque([first])
    while queue:
        v, last = queue.popleft()
        if v == target and last != start ^ 1:
            path, state = [], (v, last)
            while state is not None:
                path.append(state[1])
                state = prev[state]
            return tuple(reversed(path))
        for h in G.directions(v):
            if h == last ^ 1 or (h >> 1) in forbidden:
                continue
            nxt = (G.terminus(h), h)
            if nxt not in prev:
                prev[nxt] = (v, last)
                queue.append(nxt)
    return None


def is_immersed_loop(G, letters):
    if not letters or G.origin(letters[0]) != G.terminus(letters[-1]):
        return False
    return W.is_reduced(letters) and (len(letters) == 1 or letters[-1] != letters[0] ^ 1)


def witness_loop(G, image, e, forbidden=()):
    """A cyclically reduced loop through ``e`` avoiding ``forbidden`` edges.

    The loop is first sought as a gap between two same-oriented occurrences of
    ``e`` in ``image`` (a reduced path word, or None), then by graph search.
    """
    forbidden = set(forbidden)
    if e in forbidden:
        raise ValueError("e is forbidden")
    found = None
    if G.is_loop(e):
        found = (2 * e,)
    if found is None and image is not None:
        letters = W.expand(image)
        best = None
        for h in (2 * e, 2 * e + 1):
            pos = [k for k, x in enumerate(letters) if x == h]
            for i, j in zip(pos, pos[1:]):
                gap = letters[i:j]
                if any((x >> 1) in forbidden for x in gap):
                    continue
                if best is None or len(gap) < len(best):
                    best = gap
        if best is not None:
            found = tuple(best) if best[0] == 2 * e else W.invert(tuple(best))
    if found is None:
        found = _graph_search(G, e, forbidden)
    if found is None:
        return None
    if not (is_immersed_loop(G, found) and e in {x >> 1 for x in found}
            and not any((x >> 1) in forbidden for x in found)):
        raise AssertionError("witness loop failed verification")
    return EdgePath(G, found, G.origin(found[0]), G.origin(found[0]))


# Audit ------------------------------------------------------------------------------

@dataclass
class AuditStep:
    block: int          # index i of H^i (1-based)
    order_class: int    # index j of A_j (1-based)
    edges: list
    chi_before: int
    chi_after: int
    witness_depth: Optional[int] = None

    @property
    def raise_(self):
        return self.chi_after - self.chi_before

    def to_json(self, labels):
        return {"B": f"B_{self.order_class}^{self.block}",
                "edges": [labels[e] for e in self.edges],
                "chi_before": self.chi_before, "chi_after": self.chi_after,
                "witnessed_at_depth": self.witness_depth}


@dataclass
class AuditReport:
    n: int
    k: int
    s: int
    m: int
    initial: list
    chi_initial: int
    chi_total: int
    steps: list
    labels: tuple
    violation: Optional[str] = None

    @property
    def additions(self):
        return len(self.steps)

    @property
    def bound(self):
        return (self.s + self.m) + (self.n - 1)

    @property
    def checks(self):
        return {
            "k <= s+m+additions": self.k <= self.s + self.m + self.additions,
            "additions <= chi(G)-chi(I)": self.additions <= self.chi_total - self.chi_initial,
            "chi(G) = n-1": self.chi_total == self.n - 1,
            "s+m <= n": self.s + self.m <= self.n,
            "k <= (s+m)+(n-1)": self.k <= self.bound,
            "(s+m)+(n-1) <= 2n-1": self.bound <= 2 * self.n - 1,
        }

    @property
    def passed(self):
        return self.violation is None and all(self.checks.values())

    @property
    def slack(self):
        return 2 * self.n - 1 - self.k

    @property
    def equality(self):
        return self.k == 2 * self.n - 1

    def to_json(self):
        return {"n": self.n, "k": self.k, "s": self.s, "m": self.m,
                "initial": [self.labels[e] for e in self.initial],
                "chi_initial": self.chi_initial, "chi_total": self.chi_total,
                "additions": [st.to_json(self.labels) for st in self.steps],
                "inequality": f"{self.k} <= ({self.s}+{self.m}) + ({self.n}-1) = {self.bound} "
                              f"<= {2 * self.n - 1}",
                "checks": self.checks, "slack": self.slack, "equality": self.equality,
                "passed": self.passed, "violation": self.violation}


def _vertices(G, edges):
    return {G.origin(2 * e) for e in edges} | {G.origin(2 * e + 1) for e in edges}


def upper_bound_audit(G, h0, blocks, order, witness_depth=None, strict=True):
    """Run the counting argument on a decomposition ``H^0, H^1..H^k``.

    ``order`` is an EdgeOrder or a list of classes ``A_1..A_k'`` covering the
    non-H^0 edges.  An addition that does not raise the complexity raises
    OrderViolation (or is recorded when ``strict`` is false).
    """
    classes = order.classes if isinstance(order, EdgeOrder) else [list(c) for c in order]
    if isinstance(order, EdgeOrder) and not order.complete:
        raise ValueError("edge order has unclassifiable pairs")
    h0 = set(h0)
    blocks = [set(b) for b in blocks]
    rest = set(G.edges) - h0
    if set().union(*blocks) != rest or sum(len(b) for b in blocks) != len(rest):
        raise ValueError("blocks must partition the edges outside H^0")
    if set().union(*map(set, classes)) != rest:
        raise ValueError("order classes must cover the edges outside H^0")
    n = G.rank
    loops = sorted(e for e in rest if G.is_loop(e))
    initial = set(h0) | set(loops)
    attached_to = set(h0) | set(loops)
    m = 0
    seq = []
    for j, cls in enumerate(classes, 1):
        for i, blk in enumerate(blocks, 1):
            B = sorted(set(cls) & blk)
            if B:
                seq.append((j, i, B))
    for j, i, B in seq:
        free = [e for e in B if e not in initial]
        for es, r, verts in _edge_components(G, free):
            if r == 1 and not (verts & _vertices(G, attached_to)):
                initial |= set(es)
                m += 1
        attached_to |= set(B)
    chi_I = chi_minus(G, initial).value
    current = set(initial)
    steps, violation = [], None
    for j, i, B in seq:
        add = [e for e in B if e not in current]
        if not add:
            continue
        before = chi_minus(G, current).value
        current |= set(add)
        after = chi_minus(G, current).value
        step = AuditStep(i, j, add, before, after, witness_depth)
        steps.append(step)
        if after - before < 1:
            label = f"B_{j}^{i}"
            violation = f"adding {label} did not raise the complexity"
            if strict:
                raise OrderViolation(violation, {"B": label, "edges": add,
                                                 "chi_before": before, "chi_after": after})
    labels = tuple(G.labels)
    return AuditReport(n, len(blocks), len(loops), m, sorted(initial), chi_I,
                       chi_minus(G).value, steps, labels, violation)


def audit_decomposition(G, report, order, **kw):
    """Audit a measure-lab DecompositionReport (edge indices in graph order)."""
    if report.ambiguous:
        raise ValueError("decomposition has ambiguous edges")
    return upper_bound_audit(G, report.h0, report.blocks, order, **kw)


def equality_example(n):
    """n loops at n vertices joined by a tree: every edge its own block, k = 2n-1."""
    origins, labels = [], []
    for v in range(n):
        origins += [v, v]
        labels.append(f"l_{v}")
    for v in range(1, n):
        origins += [v - 1, v]
        labels.append(f"t_{v}")
    G = MarkedGraph(n, tuple(origins), tuple(labels))
    blocks = [[e] for e in G.edges]
    order = [[e] for e in G.edges]
    return G, blocks, order
