"""Stallings cores of subgroups, their pushforward, and illegal-turn tracking."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import words as W
from .construction import Gamma, elementary_maps
from .errors import BacktrackError, MonotonicityViolation, NoIllegalTurn
from .matrices import fmt_rational, transition_matrix
from .graphs import EdgePath, MarkedGraph, Morphism, compose_all

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoreGraph:
    """An immersed core graph: edge ``k`` runs ``tails[k] -> heads[k]`` and is
    labeled by the ambient half-edge ``labels[k]`` (always a positive one)."""

    ambient: MarkedGraph = field(repr=False)
    vertex_image: tuple
    tails: tuple
    heads: tuple
    labels: tuple

    @property
    def num_vertices(self):
        return len(self.vertex_image)

    @property
    def num_edges(self):
        return len(self.labels)

    @property
    def rank(self):
        if not self.labels:
            return 0
        return self.num_edges - self.num_vertices + self.graph.num_components

    @property
    def graph(self):
        origins = []
        for t, h in zip(self.tails, self.heads):
            origins += [t, h]
        return MarkedGraph(self.num_vertices, tuple(origins),
                           tuple(f"k{i}" for i in range(self.num_edges)))

    def directions(self, v):
        """``(core half-edge, ambient label)`` pairs based at ``v``."""
        out = []
        for k, (t, h, lab) in enumerate(zip(self.tails, self.heads, self.labels)):
            if t == v:
                out.append((2 * k, lab))
            if h == v:
                out.append((2 * k + 1, lab ^ 1))
        return out

    def is_immersion(self):
        for v in range(self.num_vertices):
            labs = [lab for _, lab in self.directions(v)]
            if len(labs) != len(set(labs)):
                return False
        return True

    def valence(self, v):
        return len(self.directions(v))

    def follow(self, v, label):
        """Vertex reached by leaving ``v`` along ``label``, or None."""
        for k, (t, h, lab) in enumerate(zip(self.tails, self.heads, self.labels)):
            if t == v and lab == label:
                return h
            if h == v and lab == label ^ 1:
                return t
        return None

    def cyclic_word(self):
        """Label word around the core when it is a single cycle."""
        if self.num_edges == 0 or any(self.valence(v) != 2 for v in range(self.num_vertices)):
            return None
        word = []
        v = self.tails[0]
        used = set()
        cur = (0, self.labels[0])
        while True:
            k, lab = cur
            used.add(k)
            word.append(lab)
            v = self.heads[k] if lab == self.labels[k] else self.tails[k]
            nxt = [(hk >> 1, lab2) for hk, lab2 in self.directions(v) if (hk >> 1) not in used]
            if not nxt:
                break
            cur = nxt[0]
        return tuple(word)

    def describe(self):
        return [f"{t}->{h}:{W.letter_name(lab, self.ambient.labels)}"
                for t, h, lab in zip(self.tails, self.heads, self.labels)]


def _fold_and_core(ambient, n_vertices, vimage, edges, keep=None):
    """Fold labeled edges ``(tail, head, label)`` to an immersion and trim to the core."""
    parent = list(range(n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    alive = [True] * len(edges)
    edges = [list(e) for e in edges]
    changed = True
    while changed:
        changed = False
        seen = {}
        for k, (t, h, lab) in enumerate(edges):
            if not alive[k]:
                continue
            for d, (v, other, l) in enumerate(((t, h, lab), (h, t, lab ^ 1))):
                key = (find(v), l)
                if key not in seen:
                    seen[key] = (k, other)
                    continue
                k1, other1 = seen[key]
                if k1 == k:
                    continue
                alive[k] = False
                a, b = find(other1), find(other)
                if a != b:
                    parent[max(a, b)] = min(a, b)
                changed = True
                break
            if changed:
                break
    live = [(find(t), find(h), lab) for k, (t, h, lab) in enumerate(edges) if alive[k]]
    # trim hairs
    keep = find(keep) if keep is not None else None
    while True:
        val = {}
        for t, h, _ in live:
            val[t] = val.get(t, 0) + 1
            val[h] = val.get(h, 0) + 1
        leaves = {v for v, c in val.items() if c == 1 and v != keep}
        if not leaves:
            break
        live = [e for e in live if e[0] not in leaves and e[1] not in leaves]
    roots = sorted({v for t, h, _ in live for v in (t, h)})
    if not roots:
        roots = [keep if keep is not None else find(0)]
    renum = {v: i for i, v in enumerate(roots)}
    out = []
    for t, h, lab in live:
        if lab & 1:
            t, h, lab = h, t, lab ^ 1
        out.append((renum[t], renum[h], lab))
    out.sort(key=lambda e: (e[2], e[0], e[1]))
    images = tuple(vimage[v] for v in roots)
    return CoreGraph(ambient, images, tuple(e[0] for e in out), tuple(e[1] for e in out),
                     tuple(e[2] for e in out))


def cyclic_reduce(word):
    ls = list(W.free_reduce(W.expand(word)))
    while len(ls) > 1 and ls[0] == ls[-1] ^ 1:
        ls = ls[1:-1]
    return tuple(ls)


def same_cyclic_word(u, v):
    """Equality up to rotation and inversion of cyclically reduced words."""
    u, v = cyclic_reduce(u), cyclic_reduce(v)
    if len(u) != len(v):
        return False
    if not u:
        return True
    doubled = v + v
    vi = W.invert(v)
    doubled_inv = vi + vi
    return any(doubled[k:k + len(u)] == u or doubled_inv[k:k + len(u)] == u
               for k in range(len(v)))


def maximal_root(word):
    """``(root, k)`` with ``word`` cyclically equal to ``root^k`` and k maximal."""
    u = cyclic_reduce(word)
    L = len(u)
    for d in range(1, L + 1):
        if L % d == 0 and u[:d] * (L // d) == u:
            return u[:d], L // d
    return u, 1


def is_root_closed_cyclic(word):
    return maximal_root(word)[1] == 1


def _as_letters(g):
    if isinstance(g, EdgePath):
        return g.letters(), g.start
    return W.expand(g), None


def stallings_core(generators, ambient, basepoint=None):
    """Core of the subgroup generated by loops at a common basepoint."""
    letters = [_as_letters(g) for g in generators]
    letters = [(ls, st) for ls, st in letters if ls]
    if basepoint is None:
        basepoint = next((st if st is not None else ambient.origin(ls[0]) for ls, st in letters), 0)
    vimage = [basepoint]
    edges = []
    for ls, _ in letters:
        if ambient.origin(ls[0]) != basepoint or ambient.terminus(ls[-1]) != basepoint:
            raise ValueError("generators must be loops at the basepoint")
        prev = 0
        for j, h in enumerate(ls):
            if j == len(ls) - 1:
                nxt = 0
            else:
                nxt = len(vimage)
                vimage.append(ambient.terminus(h))
            edges.append((prev, nxt, h))
            prev = nxt
    return _fold_and_core(ambient, len(vimage), vimage, edges, keep=None if edges else 0)


def pushforward_core(core, f):
    """Image of the core under a morphism, refolded and recored."""
    if f.source != core.ambient:
        raise ValueError("core does not live in the source of the morphism")
    vimage = [f.vertex_map[v] for v in core.vertex_image]
    edges = []
    for t, h, lab in zip(core.tails, core.heads, core.labels):
        ls = W.expand(f.image(lab))
        prev = t
        for j, x in enumerate(ls):
            if j == len(ls) - 1:
                nxt = h
            else:
                nxt = len(vimage)
                vimage.append(f.target.terminus(x))
            edges.append((prev, nxt, x))
            prev = nxt
    return _fold_and_core(f.target, len(vimage), vimage, edges,
                          keep=0 if not core.labels else None)


@dataclass(frozen=True)
class IllegalTurns:
    count: int
    located: tuple

    def __int__(self):
        return self.count


def core_illegal_turns(core, tt):
    count = 0
    located = []
    for v in range(core.num_vertices):
        gates = {}
        for _, lab in core.directions(v):
            gates.setdefault(tt.gate_of[lab], []).append(lab)
        for labs in gates.values():
            if len(labs) > 1:
                count += len(labs) - 1
                located.append((v, tuple(sorted(labs))))
    return IllegalTurns(count, tuple(located))


# Insertions ---------------------------------------------------------------------

@dataclass(frozen=True)
class InsertionMove:
    case: int
    tag: str
    rule: str
    morphism: Morphism = field(repr=False)
    exponents: tuple = ()
    position: Optional[int] = None

    def to_json(self):
        return {"case": self.case, "tag": self.tag, "rule": self.rule,
                "exponents": list(self.exponents), "position": self.position}


@dataclass(frozen=True)
class Diagnosis:
    outcome: str          # "move", "rewind", "wait", "delta-copy", "not-root-closed"
    case: int
    move: Optional[InsertionMove] = None


def _insertion(n, tag, text, case, exponents=()):
    g = Gamma(n)
    G, tt = g.tagged(tag)
    images = [(2 * e,) for e in G.edges]
    images[g.index["c"]] = g.word(text)
    mor = Morphism(G, G, tuple(G.vertices), tuple(images))
    return InsertionMove(case, tag, f"c -> {text}", mor, tuple(exponents))


def _b_power(core, v, b):
    """Largest k with a path b^k from v; None when b^j closes up at v."""
    k, w = 0, v
    while True:
        nxt = core.follow(w, b)
        if nxt is None:
            return k, None
        k += 1
        if nxt == v:
            return k, "loop"
        w = nxt


def _walk(core, v, b, s):
    for _ in range(s):
        v = core.follow(v, b)
    return v


def _case1_move(core, v, n, i, tag, case, kmax):
    g = Gamma(n)
    b = g.he(g.b(i))
    k, closed = _b_power(core, v, b)
    if closed:
        return Diagnosis("rewind" if k == 1 else "not-root-closed", case)
    bi, ap, bp = g.b(i), g.a(i - 1), g.b(i - 1)
    if k <= kmax:
        head = f"{bi}^{k} " if k > 0 else ""
        text = f"{head}c {bi.upper()}^{k + 1}"
        return Diagnosis("move", case, _insertion(n, tag, text, case, (k, k + 1)))
    for s in range(0, k + 1):
        if core.valence(_walk(core, v, b, s)) == 2:
            pre = f"{bi}^{s} " if s else ""
            post = f" {bi.upper()}^{s}" if s else ""
            text = f"{pre}{ap.upper()} {bp} {ap}{post} c"
            return Diagnosis("move", case, _insertion(n, tag, text, case, (s,)))
    return Diagnosis("wait", case)


def diagnose(core, tt, n, tag, kmax=8):
    """Classify the first illegal turn of the core against the rein gate."""
    turns = core_illegal_turns(core, tt)
    if turns.count == 0:
        raise NoIllegalTurn("core has no illegal turns")
    g = Gamma(n)
    c = g.he("c")
    e = g.he(tag)
    i = int(tag[2:])
    rein_gate = tt.gate_of[c]
    for v, labs in turns.located:
        if tt.gate_of[labs[0]] != rein_gate:
            continue
        present = set(labs)
        if e in present:
            if tag.startswith("b"):
                return _case1_move(core, v, n, i, tag, 1, kmax)
            b = g.he(g.b(i))
            if core.follow(v, b) != v:
                return _case1_move(core, v, n, i, tag, 2, kmax)
            if core.follow(v, g.he(g.a(i - 1).upper())) is None:
                ap, bp = g.a(i - 1), g.b(i - 1)
                text = f"{ap.upper()} {bp} {ap} c"
                return Diagnosis("move", 2, _insertion(n, tag, text, 2))
            return Diagnosis("delta-copy", 2)
        if core.follow(v, g.he(g.b(i))) == v:
            return Diagnosis("wait", 3)
        text = f"{g.b(i)} c {g.b(i).upper()}^2"
        return Diagnosis("move", 3, _insertion(n, tag, text, 3, (1, 2)))
    return Diagnosis("wait", 0)


def propose_insertion(core, tt, n, tag, kmax=8):
    d = diagnose(core, tt, n, tag, kmax)
    return d.move


# Monitoring -----------------------------------------------------------------------

@dataclass
class MonitorRecord:
    position: int
    map_name: str
    tag: str
    edges: int
    rank: int
    illegal: int
    kind: str = "step"

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class SubgroupTrace:
    generators: list
    records: list = field(default_factory=list)
    insertions: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)
    final_core: Optional[CoreGraph] = None
    spliced: Optional[dict] = None

    @property
    def counts(self):
        return [r.illegal for r in self.records]

    @property
    def reached_zero(self):
        return bool(self.records) and self.records[-1].illegal == 0

    def to_json(self):
        return {"generators": self.generators, "records": [r.to_json() for r in self.records],
                "insertions": [m.to_json() for m in self.insertions],
                "violations": self.violations, "outcomes": self.outcomes,
                "reached_zero": self.reached_zero,
                "final_core": self.final_core.describe() if self.final_core else None,
                "spliced": self.spliced}


@dataclass
class MonitorReport:
    n: int
    steps: int
    policy: str
    traces: list

    @property
    def passed(self):
        return all(not t.violations for t in self.traces)

    def to_json(self):
        return {"n": self.n, "steps": self.steps, "policy": self.policy,
                "passed": self.passed, "subgroups": [t.to_json() for t in self.traces]}


def fine_schedule(n, params_list):
    """Elementary maps of consecutive copies of F."""
    out = []
    for params in params_list:
        out.extend(elementary_maps(n, params))
    return out


def _parse_generators(n, gens):
    g = Gamma(n)
    G, _ = g.tagged("a_0")
    return [G.path(g.word(w)) if isinstance(w, str) else w for w in gens]


def monitor_subgroup(n, params_list, generators, steps, policy="greedy", kmax=8,
                     max_moves=4, strict=False, max_edges=200_000):
    g = Gamma(n)
    G, tt = g.tagged("a_0")
    paths = _parse_generators(n, generators)
    core = stallings_core(paths, G)
    schedule = fine_schedule(n, params_list)
    if steps > len(schedule):
        raise ValueError(f"only {len(schedule)} elementary maps available")
    trace = SubgroupTrace([str(p) for p in paths])
    tag = "a_0"
    count = core_illegal_turns(core, tt).count
    trace.records.append(MonitorRecord(0, "start", tag, core.num_edges, core.rank, count))
    for pos in range(steps):
        if policy == "greedy":
            for _ in range(max_moves):
                if count == 0:
                    break
                d = diagnose(core, tt, n, tag, kmax)
                trace.outcomes.append({"position": pos, "outcome": d.outcome, "case": d.case})
                if d.move is None:
                    break
                move = InsertionMove(d.move.case, d.move.tag, d.move.rule, d.move.morphism,
                                     d.move.exponents, pos)
                new_core = pushforward_core(core, move.morphism)
                new_count = core_illegal_turns(new_core, tt).count
                if new_count >= count:
                    # not splicing a move that does not help; treat as a wait
                    trace.outcomes[-1]["outcome"] = "ineffective"
                    break
                trace.insertions.append(move)
                trace.records.append(MonitorRecord(pos, move.rule, tag, new_core.num_edges,
                                                   new_core.rank, new_count, "insertion"))
                core, count = new_core, new_count
        em = schedule[pos]
        core = pushforward_core(core, em.morphism)
        tt, tag = em.target_tt, em.target_tag
        new_count = core_illegal_turns(core, tt).count
        trace.records.append(MonitorRecord(pos + 1, em.name, tag, core.num_edges, core.rank,
                                           new_count))
        if new_count > count:
            rec = {"position": pos + 1, "kind": "increase", "map": em.name,
                   "before": count, "after": new_count}
            trace.violations.append(rec)
            if strict:
                raise MonotonicityViolation(f"illegal turns rose from {count} to {new_count} "
                                            f"along {em.name}", rec)
        count = new_count
        if core.num_edges > max_edges:
            raise ValueError("core grew beyond the configured size limit")
    trace.final_core = core
    return trace


def splice_run(run, insertions):
    """Rebuild a run with insertions spliced into its fine schedule and recertify."""
    from .sequence import SequenceRun
    per_map = len(elementary_maps(run.n, run.params[0]))
    by_pos = {}
    for mv in insertions:
        by_pos.setdefault(mv.position, []).append(mv.morphism)
    out = SequenceRun.for_construction(run.n, run.direction)
    for t, params in enumerate(run.params):
        maps = []
        for j, em in enumerate(elementary_maps(run.n, params)):
            maps.extend(by_pos.get(t * per_map + j, []))
            maps.append(em.morphism)
        try:
            f = compose_all(maps)
        except BacktrackError:
            f = compose_all(maps, tight=True)
        out.params.append(params)
        out.push(transition_matrix(f))
    out.insertions = list(insertions)
    return out


def _spliced_summary(run, trace):
    spliced = splice_run(run, trace.insertions)
    H = spliced.horizon
    certs = [spliced.certs[(r, H - 1)] for r in range(H)]
    return {"insertions": len(trace.insertions), "horizon": H,
            "epsilon": [fmt_rational(c.epsilon) for c in certs],
            "certs_recomputed": len(spliced.certs)}


def monitor(run_or_params, subgroups, steps, policy="greedy", n=None, jobs=1, **kw):
    """Track every subgroup along the first ``steps`` elementary maps.

    When a run is given, each subgroup's insertions are spliced into a copy of
    the run and the dominance certificates of the spliced run are recomputed.
    """
    run = run_or_params if hasattr(run_or_params, "params") else None
    if run is not None:
        n, params_list = run.n, run.params
    else:
        params_list = list(run_or_params)
    if policy not in ("greedy", "manual"):
        raise ValueError(f"unknown policy {policy!r}")

    def one(gens):
        tr = monitor_subgroup(n, params_list, gens, steps, policy, **kw)
        if run is not None and tr.insertions:
            tr.spliced = _spliced_summary(run, tr)
        return tr

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(one, subgroups))
    else:
        traces = [one(gens) for gens in subgroups]
    return MonitorReport(n, steps, policy, traces)
