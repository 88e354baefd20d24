"""Finite graphs, edge paths, morphisms, folds and train-track structures."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import networkx as nx

from . import words as W
from .errors import BacktrackError, InvalidFold, InvalidPath, NotHomotopyEquivalence


@dataclass(frozen=True)
class MarkedGraph:
    """A graph with vertices ``0..num_vertices-1`` and edges ``0..E-1``.

    ``origins[h]`` is the initial vertex of half-edge ``h``; edge ``e`` owns
    half-edges ``2e`` and ``2e+1``.
    """

    num_vertices: int
    origins: tuple
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "origins", tuple(self.origins))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.origins) != 2 * len(self.labels):
            raise ValueError("need two half-edges per edge")
        if any(not 0 <= v < self.num_vertices for v in self.origins):
            raise ValueError("half-edge origin out of range")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("edge labels must be distinct")
        seen = set(self.origins)
        if len(seen) != self.num_vertices:
            raise ValueError("every vertex needs valence at least 1")

    @property
    def vertices(self):
        return range(self.num_vertices)

    @property
    def edges(self):
        return range(len(self.labels))

    @property
    def num_edges(self):
        return len(self.labels)

    def origin(self, h):
        return self.origins[h]

    def terminus(self, h):
        return self.origins[h ^ 1]

    def is_loop(self, e):
        return self.origins[2 * e] == self.origins[2 * e + 1]

    @cached_property
    def _directions(self):
        out = [[] for _ in range(self.num_vertices)]
        for h, v in enumerate(self.origins):
            out[v].append(h)
        return tuple(tuple(d) for d in out)

    def directions(self, v):
        """Half-edges with initial vertex ``v`` (the direction set T_v)."""
        return self._directions[v]

    def valence(self, v):
        return len(self._directions[v])

    @cached_property
    def components(self):
        parent = list(range(self.num_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.edges:
            a, b = find(self.origins[2 * e]), find(self.origins[2 * e + 1])
            if a != b:
                parent[max(a, b)] = min(a, b)
        return tuple(find(v) for v in self.vertices)

    @property
    def num_components(self):
        return len(set(self.components))

    @property
    def rank(self):
        return self.num_edges - self.num_vertices + self.num_components

    @cached_property
    def label_index(self):
        return {name: e for e, name in enumerate(self.labels)}

    def half_edge(self, name):
        """Half-edge for a letter such as ``"a_0"`` or ``"A_0"``."""
        return W.parse_word(name, self.labels)[0]

    def word(self, text):
        return W.parse_word(text, self.labels)

    def format(self, word):
        return W.format_word(word, self.labels)

    def check_incident(self, word):
        for x, y in W.turns(word):
            if self.terminus(x) != self.origin(y):
                raise InvalidPath(
                    f"{W.letter_name(x, self.labels)} does not end where "
                    f"{W.letter_name(y, self.labels)} starts")

    def path(self, word, start=None):
        word = tuple(word)
        if not word:
            if start is None:
                raise InvalidPath("empty path needs a vertex")
            return EdgePath(self, word, start, start)
        self.check_incident(word)
        if not W.is_reduced(word):
            raise InvalidPath("path is not reduced")
        return EdgePath(self, word, self.origin(W.first(word)), self.terminus(W.last(word)))


@dataclass(frozen=True)
class EdgePath:
    graph: MarkedGraph = field(repr=False, compare=False)
    word: tuple
    start: int
    end: int

    def reversed(self):
        return EdgePath(self.graph, W.invert(self.word), self.end, self.start)

    def __len__(self):
        return W.length(self.word)

    @property
    def is_closed(self):
        return self.start == self.end

    def letters(self):
        return W.expand(self.word)

    def __str__(self):
        return self.graph.format(self.word) if self.word else f"<v{self.start}>"


def rose(n, prefix="x"):
    return MarkedGraph(1, (0,) * (2 * n), tuple(f"{prefix}_{i}" for i in range(n)))


@dataclass(frozen=True)
class Morphism:
    """Graph map sending vertices to vertices and edges to reduced paths."""

    source: MarkedGraph
    target: MarkedGraph
    vertex_map: tuple
    images: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertex_map", tuple(self.vertex_map))
        object.__setattr__(self, "images", tuple(tuple(w) for w in self.images))
        src, tgt = self.source, self.target
        if len(self.vertex_map) != src.num_vertices:
            raise InvalidPath("vertex map has the wrong length")
        if len(self.images) != src.num_edges:
            raise InvalidPath("need one image per edge")
        for e, w in enumerate(self.images):
            if not w:
                raise InvalidPath(f"empty image for {src.labels[e]}")
            tgt.check_incident(w)
            if not W.is_reduced(w):
                raise InvalidPath(f"image of {src.labels[e]} is not reduced")
            if tgt.origin(W.first(w)) != self.vertex_map[src.origin(2 * e)]:
                raise InvalidPath(f"image of {src.labels[e]} starts at the wrong vertex")
            if tgt.terminus(W.last(w)) != self.vertex_map[src.terminus(2 * e)]:
                raise InvalidPath(f"image of {src.labels[e]} ends at the wrong vertex")

    def image(self, h):
        w = self.images[h >> 1]
        return W.invert(w) if h & 1 else w

    def path(self, h):
        return self.target.path(self.image(h))

    def first_letter(self, h):
        w = self.images[h >> 1]
        return W.first(W.invert(w[-1:])) if h & 1 else W.first(w)

    def equivalent(self, other):
        """Same map, ignoring how images are compressed into powers."""
        return (self.source == other.source and self.target == other.target
                and self.vertex_map == other.vertex_map
                and all(W.expand(u) == W.expand(v) for u, v in zip(self.images, other.images)))

    def edge_map(self):
        """Images keyed by source label, in text form."""
        return {self.source.labels[e]: self.target.format(w) for e, w in enumerate(self.images)}

    def apply(self, word):
        return W.substitute(word, self.image)

    def __call__(self, word):
        return self.apply(word)


def identity(G):
    return Morphism(G, G, tuple(G.vertices), tuple((2 * e,) for e in G.edges))


def compose(f, g):
    """Return ``g∘f``.  Raises BacktrackError if substitution cancels."""
    if f.target != g.source:
        raise ValueError("target of f is not the source of g")
    cache = {}

    def img(h):
        if h not in cache:
            cache[h] = g.image(h)
        return cache[h]

    images = tuple(W.substitute(w, img) for w in f.images)
    vmap = tuple(g.vertex_map[v] for v in f.vertex_map)
    return Morphism(f.source, g.target, vmap, images)


def compose_tight(f, g):
    """``g∘f`` with each image freely reduced (images are expanded)."""
    if f.target != g.source:
        raise ValueError("target of f is not the source of g")
    images = []
    for w in f.images:
        letters = []
        for h in W.expand(w):
            letters.extend(W.expand(g.image(h)))
        images.append(W.compress_runs(W.free_reduce(letters)))
    vmap = tuple(g.vertex_map[v] for v in f.vertex_map)
    return Morphism(f.source, g.target, vmap, tuple(images))


def compose_all(maps, tight=False):
    maps = list(maps)
    out = maps[0]
    for g in maps[1:]:
        out = compose_tight(out, g) if tight else compose(out, g)
    return out


# Train tracks ---------------------------------------------------------------

@dataclass(frozen=True)
class TrainTrack:
    """Gate structure: ``gate_of[h]`` is the gate id of direction ``h``.

    Gate ids are canonical (numbered by first appearance over half-edges), so
    equal partitions compare equal.
    """

    graph: MarkedGraph
    gate_of: tuple

    def __post_init__(self):
        g = tuple(self.gate_of)
        if len(g) != 2 * self.graph.num_edges:
            raise ValueError("need a gate for every direction")
        relabel = {}
        canon = []
        for h, gid in enumerate(g):
            key = (self.graph.origin(h), gid)
            if key not in relabel:
                relabel[key] = len(relabel)
            canon.append(relabel[key])
        seen = {}
        for h, gid in enumerate(canon):
            if seen.setdefault(gid, self.graph.origin(h)) != self.graph.origin(h):
                raise ValueError("a gate spans two vertices")
        object.__setattr__(self, "gate_of", tuple(canon))

    @classmethod
    def from_gates(cls, graph, gates=()):
        """Build from the non-singleton gates; everything else is a singleton."""
        gate_of = list(range(2 * graph.num_edges))
        for gate in gates:
            gate = list(gate)
            base = graph.origin(gate[0])
            for h in gate:
                if graph.origin(h) != base:
                    raise ValueError("gate directions must share a vertex")
                gate_of[h] = gate[0]
        return cls(graph, tuple(gate_of))

    def gates(self, v=None):
        groups = {}
        hs = self.graph.directions(v) if v is not None else range(len(self.gate_of))
        for h in hs:
            groups.setdefault(self.gate_of[h], []).append(h)
        return [frozenset(g) for g in groups.values()]

    def nontrivial_gates(self):
        return [g for g in self.gates() if len(g) > 1]

    def is_legal_turn(self, x, y):
        """Turn taken by a path crossing ``x`` and then ``y``."""
        return self.gate_of[x ^ 1] != self.gate_of[y]

    def same_gate(self, d1, d2):
        return self.gate_of[d1] == self.gate_of[d2]


def illegal_turn_count(G, tt):
    return 2 * G.num_edges - len(set(tt.gate_of))


def is_legal_path(p, tt):
    word = p.word if isinstance(p, EdgePath) else p
    return all(tt.is_legal_turn(x, y) for x, y in W.turns(word))


def induced_train_track(f):
    keys = {}
    gate_of = []
    for h in range(2 * f.source.num_edges):
        key = (f.source.origin(h), f.first_letter(h))
        gate_of.append(keys.setdefault(key, len(keys)))
    return TrainTrack(f.source, tuple(gate_of))


@dataclass(frozen=True)
class Recurrence:
    recurrent: bool
    witness: Optional[EdgePath] = None

    def __bool__(self):
        return self.recurrent


def legal_turn_digraph(G, tt):
    D = nx.DiGraph()
    D.add_nodes_from(range(2 * G.num_edges))
    for x in range(2 * G.num_edges):
        for y in G.directions(G.terminus(x)):
            if y != x ^ 1 and tt.is_legal_turn(x, y):
                D.add_edge(x, y)
    return D


def is_recurrent(G, tt):
    """Decide whether a legal loop crosses every edge; return a witness."""
    if G.num_edges == 0:
        return Recurrence(False)
    D = legal_turn_digraph(G, tt)
    for comp in nx.strongly_connected_components(D):
        if {h >> 1 for h in comp} != set(G.edges):
            continue
        start = min(comp)
        if len(comp) == 1 and not D.has_edge(start, start):
            continue
        sub = D.subgraph(comp)
        # one representative per edge, then stitch shortest paths into a circuit
        need = sorted({min(h for h in comp if h >> 1 == e) for e in G.edges})
        walk = [start]
        for target in need[1:] + [start]:
            if target == walk[-1] and len(walk) > 1:
                continue
            if target == walk[-1]:
                cyc = next(iter(sub.successors(target)))
                seg = [cyc] + nx.shortest_path(sub, cyc, target)[1:]
            else:
                seg = nx.shortest_path(sub, walk[-1], target)[1:]
            walk.extend(seg)
        loop = tuple(walk[:-1])
        return Recurrence(True, G.path(loop))
    return Recurrence(False)


# Folding --------------------------------------------------------------------

FOLD_TYPE_I = "I"
FOLD_TYPE_II = "II"


def fold_once(G, d1, d2):
    """Fold the edges of directions ``d1`` and ``d2`` (same initial vertex)."""
    n_half = 2 * G.num_edges
    if not (0 <= d1 < n_half and 0 <= d2 < n_half):
        raise InvalidFold("direction out of range")
    if d1 == d2 or d1 == d2 ^ 1 or (d1 >> 1) == (d2 >> 1):
        raise InvalidFold("directions must belong to distinct edges")
    if G.origin(d1) != G.origin(d2):
        raise InvalidFold("directions must share an initial vertex")
    t1, t2 = G.terminus(d1), G.terminus(d2)
    kind = FOLD_TYPE_II if t1 == t2 else FOLD_TYPE_I
    if kind == FOLD_TYPE_I:
        keep, gone = min(t1, t2), max(t1, t2)
        vmap = [v - (v > gone) for v in G.vertices]
        vmap[gone] = vmap[keep]
        n_vertices = G.num_vertices - 1
    else:
        vmap = list(G.vertices)
        n_vertices = G.num_vertices
    e2 = d2 >> 1
    emap = {}
    origins, labels = [], []
    for e in G.edges:
        if e == e2:
            continue
        emap[e] = len(labels)
        labels.append(G.labels[e])
        origins.extend((vmap[G.origins[2 * e]], vmap[G.origins[2 * e + 1]]))
    H = MarkedGraph(n_vertices, tuple(origins), tuple(labels))
    d1_new = 2 * emap[d1 >> 1] + (d1 & 1)
    images = []
    for e in G.edges:
        if e == e2:
            images.append((d1_new,) if d2 % 2 == 0 else (d1_new ^ 1,))
        else:
            images.append((2 * emap[e],))
    return H, Morphism(G, H, tuple(vmap), tuple(images)), kind


@dataclass(frozen=True)
class Fold:
    graph: MarkedGraph
    d1: int
    d2: int
    kind: str
    quotient: Morphism


@dataclass(frozen=True)
class FoldDecomposition:
    """Folds of a subdivided source followed by an isomorphism.

    ``pieces[e]`` lists the half-edges of the subdivided graph that make up
    original edge ``e``; subdivision vertices come after the original ones.
    """

    original: Morphism
    subdivided: MarkedGraph
    pieces: tuple
    folds: tuple
    isomorphism: Morphism

    def composite(self):
        """Folds then isomorphism, as a morphism of the subdivided graph."""
        return compose_all([fd.quotient for fd in self.folds] + [self.isomorphism]) if self.folds \
            else self.isomorphism

    def recompose(self):
        """Undo the subdivision and return a morphism on the original source."""
        comp = self.composite()
        src = self.original.source
        images = tuple(W.concat(*(comp.image(h) for h in self.pieces[e])) for e in src.edges)
        vmap = tuple(comp.vertex_map[v] for v in src.vertices)
        return Morphism(src, comp.target, vmap, images)


def _subdivide(f):
    src = f.source
    origins = []
    labels = []
    pieces = []
    letter_of = []
    n_vertices = src.num_vertices
    for e in src.edges:
        letters = W.expand(f.images[e])
        chain = [src.origins[2 * e]]
        for _ in range(len(letters) - 1):
            chain.append(n_vertices)
            n_vertices += 1
        chain.append(src.origins[2 * e + 1])
        row = []
        for k, h in enumerate(letters):
            row.append(2 * len(labels))
            labels.append(src.labels[e] if len(letters) == 1 else f"{src.labels[e]}.{k}")
            origins.extend((chain[k], chain[k + 1]))
            letter_of.append(h)
        pieces.append(tuple(row))
    S = MarkedGraph(n_vertices, tuple(origins), tuple(labels))
    vimage = list(f.vertex_map) + [None] * (n_vertices - src.num_vertices)
    for e in src.edges:
        row = pieces[e]
        for h in row[1:]:
            vimage[S.origin(h)] = f.target.origin(letter_of[h >> 1])
    return S, tuple(pieces), letter_of, vimage


def fold_decomposition(f):
    """Stallings folding of a homotopy equivalence into type I folds."""
    if f.source.rank != f.target.rank:
        raise NotHomotopyEquivalence(f"rank {f.source.rank} != rank {f.target.rank}")
    S, pieces, letter_of, vimage = _subdivide(f)
    G = S
    phi = list(letter_of)  # edge -> target half-edge (positive orientation)
    folds = []

    def dir_image(h):
        return phi[h >> 1] ^ (h & 1)

    while True:
        pair = None
        for v in G.vertices:
            seen = {}
            for h in G.directions(v):
                img = dir_image(h)
                if img in seen:
                    pair = (seen[img], h)
                    break
                seen[img] = h
            if pair:
                break
        if pair is None:
            break
        d1, d2 = pair
        H, q, kind = fold_once(G, d1, d2)
        if kind == FOLD_TYPE_II:
            raise NotHomotopyEquivalence("a type II fold is forced; the map is not injective on pi_1")
        new_phi = [None] * H.num_edges
        new_vimage = [None] * H.num_vertices
        for e in G.edges:
            h = q.images[e][0]
            new_phi[h >> 1] = phi[e] ^ (h & 1)
        for v in G.vertices:
            new_vimage[q.vertex_map[v]] = vimage[v]
        folds.append(Fold(G, d1, d2, kind, q))
        G, phi, vimage = H, new_phi, new_vimage
    tgt = f.target
    if G.num_edges != tgt.num_edges or G.num_vertices != tgt.num_vertices \
            or len({p >> 1 for p in phi}) != tgt.num_edges or len(set(vimage)) != tgt.num_vertices:
        raise NotHomotopyEquivalence("folded map is an immersion but not an isomorphism")
    iso = Morphism(G, tgt, tuple(vimage), tuple((p,) for p in phi))
    return FoldDecomposition(f, S, pieces, tuple(folds), iso)
