"""The rank-n graph with its rein loop, the elementary maps, and the map F.

Edges are numbered in the folding order ``b_1..b_{n-3}, a_1..a_{n-3}, a_0,
b_0, c`` and vertex ``i`` is v_i.  ``a_i`` runs from v_i to v_{i+1} (indices
mod n-2), ``b_i`` is a loop at v_i and ``c`` is a loop at the vertex where
the rein currently sits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from gmpy2 import mpz

from . import words as W
from .errors import ConstructionMismatch, InvalidParameters, RankTooSmall
from .graphs import MarkedGraph, Morphism, TrainTrack, compose, compose_all, identity
from .matrices import (FOLDING, UNFOLDING, ExactMatrix, abelianization, certify_folding,
                       certify_unfolding, transition_matrix)


def _check_rank(n):
    if n < 4:
        raise RankTooSmall(f"construction needs n >= 4, got {n}")


def edge_names(n):
    _check_rank(n)
    k = n - 3
    return ([f"b_{i}" for i in range(1, k + 1)] + [f"a_{i}" for i in range(1, k + 1)]
            + ["a_0", "b_0", "c"])


def unfolding_names(n):
    k = n - 3
    return ([f"a_{i}" for i in range(k, 0, -1)] + [f"b_{i}" for i in range(k, 0, -1)]
            + ["a_0", "b_0", "c"])


def unfolding_order(n):
    """Position k of the unfolding order holds folding-order edge ``order[k]``."""
    idx = {name: e for e, name in enumerate(edge_names(n))}
    return [idx[name] for name in unfolding_names(n)]


def tier1_width(n):
    return 2 * n - 6


@dataclass(frozen=True)
class ConstructionParams:
    n: int
    alphas: tuple
    betas: tuple

    def __post_init__(self):
        _check_rank(self.n)
        object.__setattr__(self, "alphas", tuple(int(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(int(b) for b in self.betas))
        if len(self.alphas) != self.n - 3 or len(self.betas) != self.n - 3:
            raise InvalidParameters(f"need {self.n - 3} alphas and betas")
        if min(self.alphas + self.betas) < 1:
            raise InvalidParameters("parameters must be positive")

    @classmethod
    def uniform(cls, n, alpha, beta):
        return cls(n, (alpha,) * (n - 3), (beta,) * (n - 3))

    def alpha(self, i):
        return self.alphas[i - 1]

    def beta(self, i):
        return self.betas[i - 1]

    def to_json(self):
        return {"n": self.n, "alphas": [str(a) for a in self.alphas],
                "betas": [str(b) for b in self.betas]}

    @classmethod
    def from_json(cls, data):
        return cls(data["n"], [int(a) for a in data["alphas"]], [int(b) for b in data["betas"]])


class Gamma:
    """Helper bundling the names and vertex layout for a fixed rank."""

    def __init__(self, n):
        _check_rank(n)
        self.n = n
        self.nv = n - 2
        self.names = tuple(edge_names(n))
        self.index = {name: e for e, name in enumerate(self.names)}

    def a(self, i):
        return f"a_{i % self.nv}"

    def b(self, i):
        return f"b_{i % self.nv}"

    def graph(self, c_vertex):
        origins = []
        for name in self.names:
            if name == "c":
                origins += [c_vertex, c_vertex]
            else:
                i = int(name[2:])
                origins += [i, (i + 1) % self.nv] if name[0] == "a" else [i, i]
        return MarkedGraph(self.nv, tuple(origins), self.names)

    def he(self, letter):
        """Half-edge of a letter like ``"a_2"`` or ``"A_2"`` (reverse)."""
        return 2 * self.index[letter[0].lower() + letter[1:]] + (1 if letter[0].isupper() else 0)

    def tagged(self, tag):
        """Γ_e: rein at the initial vertex of ``tag``, gate {c, c̄, tag}."""
        G0 = self.graph(0)
        v = G0.origin(self.he(tag))
        G = self.graph(v)
        c = self.he("c")
        return G, TrainTrack.from_gates(G, [(c, c ^ 1, self.he(tag))])

    def two_gate(self, e1, e2):
        """Γ_{e1,e2}: graph Γ_{e1} with the two illegal turns of the inverse maps.

        If neither letter is the rein, the gates are {e1, e2} and {c, c̄};
        otherwise the rein joins them in a single gate.
        """
        G, _ = self.tagged(e1)
        c = self.he("c")
        h1, h2 = self.he(e1), self.he(e2)
        if {h1 >> 1, h2 >> 1} & {c >> 1}:
            gates = [{h1, h2, c, c ^ 1}]
        else:
            gates = [(h1, h2), (c, c ^ 1)]
        return G, TrainTrack.from_gates(G, gates)

    def word(self, text):
        return W.parse_word(text, self.names)


def build_gamma(n):
    """Γ_{a_0} and its train track."""
    return Gamma(n).tagged("a_0")


@dataclass(frozen=True)
class ElementaryMap:
    name: str
    morphism: Morphism = field(repr=False)
    source_tt: TrainTrack = field(repr=False)
    target_tt: TrainTrack = field(repr=False)
    source_tag: str = ""
    target_tag: str = ""


def _substitution(g, source_tag, target_tag, changes, vertex_shift=0, relabel=None):
    S, stt = g.tagged(source_tag)
    T, ttt = g.tagged(target_tag)
    images = []
    for name in g.names:
        if name in changes:
            images.append(changes[name])
        elif relabel:
            images.append(g.word(relabel(name)))
        else:
            images.append(g.word(name))
    vmap = tuple((v + vertex_shift) % g.nv for v in S.vertices)
    return Morphism(S, T, vmap, tuple(images)), stt, ttt, source_tag, target_tag


def _loop_word(g, i):
    """ā_{i-1} b_{i-1} a_{i-1} b_i."""
    return g.word(f"{g.a(i - 1).upper()} {g.b(i - 1)} {g.a(i - 1)} {g.b(i)}")


def rein_mover_a(g, i):
    """R_{a_i}: Γ_{a_i} → Γ_{b_{i+1}}, c ↦ a_i c ā_i."""
    w = g.word(f"{g.a(i)} c {g.a(i).upper()}")
    return ElementaryMap(f"R_{g.a(i)}", *_substitution(g, g.a(i), g.b(i + 1), {"c": w}))


def rein_mover_b(g, i):
    """R_{b_i}: Γ_{b_i} → Γ_{a_i}, c ↦ b_i² c b̄_i."""
    w = g.word(f"{g.b(i)}^2 c {g.b(i).upper()}")
    return ElementaryMap(f"R_{g.b(i)}", *_substitution(g, g.b(i), g.a(i), {"c": w}))


def looper_a(g, i, alpha):
    w = W.concat(g.word("c"), W.power(_loop_word(g, i), alpha), g.word(g.a(i)))
    return ElementaryMap(f"L_{g.a(i)}", *_substitution(g, g.a(i), g.a(i), {g.a(i): w}))


def looper_b(g, i, beta):
    a, b = g.a(i - 1), g.b(i - 1)
    w = W.concat(g.word(f"c {a.upper()}"), W.power(g.word(b), beta), g.word(f"{a} {g.b(i)}"))
    return ElementaryMap(f"L_{g.b(i)}", *_substitution(g, g.b(i), g.b(i), {g.b(i): w}))


def rotator(g):
    def shift(name):
        return name if name == "c" else f"{name[0]}_{(int(name[2:]) + 1) % g.nv}"
    return ElementaryMap("rho", *_substitution(g, g.a(g.n - 3), "a_0", {}, vertex_shift=1,
                                               relabel=shift))


def elementary_maps(n, params):
    """The 4n-11 maps whose composite is F, in the order they are applied."""
    g = Gamma(n)
    out = []
    for i in range(1, n - 2):
        out += [rein_mover_a(g, i - 1), looper_b(g, i, params.beta(i)),
                rein_mover_b(g, i), looper_a(g, i, params.alpha(i))]
    out.append(rotator(g))
    return out


def big_F(n, params):
    if params.n != n:
        raise InvalidParameters("params are for a different rank")
    return compose_all([em.morphism for em in elementary_maps(n, params)])


def closed_form_images(n, params):
    """F-images written out directly, keyed by edge name."""
    g = Gamma(n)
    k = n - 3

    def q(start, square):
        # a_start b_{start+1}^e a_{start+1} ... b_{n-3}^e a_{n-3} b_0^e, starting at a letter
        parts = []
        for j in range(start, k + 1):
            parts.append(g.word(f"a_{j}"))
            parts.append(W.power(g.word(g.b(j + 1)), square))
        return W.concat(*parts)

    def tail_from(letter_kind, j):
        # Q[x_j]: the suffix of Q beginning at a_j or b_j
        if letter_kind == "a":
            return q(j, 2), q(j, 1)
        return (W.concat(W.power(g.word(f"b_{j}"), 2), q(j, 2)),
                W.concat(g.word(f"b_{j}"), q(j, 1)))

    c = g.word("c")
    out = {"a_0": g.word("a_1"), "b_0": g.word("b_1")}
    q2, q1 = q(1, 2), q(1, 1)
    out["c"] = W.concat(q2, c, W.invert(q1))
    for i in range(1, k):
        t2, t1 = tail_from("a", i + 1)
        out[f"a_{i}"] = W.concat(t2, c, W.invert(t1), W.power(g.word(f"A_{i} b_{i} a_{i} b_{i + 1}"), params.alpha(i)),
                                 g.word(f"a_{i + 1}"))
        t2, t1 = tail_from("b", i + 1)
        out[f"b_{i}"] = W.concat(t2, c, W.invert(t1), g.word(f"A_{i}"),
                                 W.power(g.word(f"b_{i}"), params.beta(i)),
                                 g.word(f"a_{i} b_{i + 1}"))
    out[f"a_{k}"] = W.concat(c, W.power(g.word(f"A_{k} b_{k} a_{k} b_0"), params.alpha(k)),
                             g.word("a_0"))
    out[f"b_{k}"] = W.concat(g.word("b_0^2 c B_0"), g.word(f"A_{k}"),
                             W.power(g.word(f"b_{k}"), params.beta(k)), g.word(f"a_{k} b_0"))
    return out


def closed_form_M(n, params, direction=FOLDING):
    """Transition matrix of F coded column by column from the image analysis."""
    _check_rank(n)
    k = n - 3
    names = edge_names(n)
    idx = {name: e for e, name in enumerate(names)}
    M = [[0] * len(names) for _ in names]

    def put(row, col, val):
        M[idx[row]][idx[col]] = val

    for j in range(1, k + 1):
        put(f"a_{j}", "c", 2)
        if j >= 2:
            put(f"b_{j}", "c", 3)
    put("b_0", "c", 3)
    put("c", "c", 1)
    put("a_1", "a_0", 1)
    put("b_1", "b_0", 1)
    for i in range(1, k):
        col = f"a_{i}"
        al = params.alpha(i)
        put(f"a_{i}", col, 2 * al)
        put(f"a_{i + 1}", col, 3)
        for j in range(i + 2, k + 1):
            put(f"a_{j}", col, 2)
        put(f"b_{i}", col, al)
        put(f"b_{i + 1}", col, al)
        for j in range(i + 2, k + 1):
            put(f"b_{j}", col, 3)
        put("b_0", col, 3)
        put("c", col, 1)
        col = f"b_{i}"
        put(f"b_{i}", col, params.beta(i))
        put(f"b_{i + 1}", col, 4)
        for j in range(i + 2, k + 1):
            put(f"b_{j}", col, 3)
        put("b_0", col, 3)
        for j in range(i, k + 1):
            put(f"a_{j}", col, 2)
        put("c", col, 1)
    al = params.alpha(k)
    put(f"a_{k}", f"a_{k}", 2 * al)
    put(f"b_{k}", f"a_{k}", al)
    put("b_0", f"a_{k}", al)
    put("a_0", f"a_{k}", 1)
    put("c", f"a_{k}", 1)
    put(f"b_{k}", f"b_{k}", params.beta(k))
    put("b_0", f"b_{k}", 4)
    put(f"a_{k}", f"b_{k}", 2)
    put("c", f"b_{k}", 1)
    out = ExactMatrix(M)
    if direction == UNFOLDING:
        return out.permuted(unfolding_order(n))
    if direction != FOLDING:
        raise InvalidParameters(f"unknown direction {direction!r}")
    return out


def same_path(u, v, limit=200_000):
    """Compare two compressed words letter by letter when that is affordable."""
    if W.letter_counts(u) != W.letter_counts(v):
        return False
    if W.length(u) <= limit:
        return W.expand(u) == W.expand(v)
    return W.first(u) == W.first(v) and W.last(u) == W.last(v) and \
        set(W.turns(u)) == set(W.turns(v))


def verify_construction(n, params):
    """Compose the elementary maps and compare with both closed forms."""
    F = big_F(n, params)
    M = transition_matrix(F)
    expected = closed_form_M(n, params)
    if M != expected:
        raise ConstructionMismatch(f"transition matrix of F differs from the closed form at n={n}")
    images = closed_form_images(n, params)
    for e, name in enumerate(F.source.labels):
        if not same_path(F.images[e], images[name]):
            raise ConstructionMismatch(f"image of {name} differs from the closed form")
    return F, M


# Inverse maps ----------------------------------------------------------------

def inverse_elementary_maps(n, params):
    """Inverses of the elementary maps, in the order F⁻¹ applies them."""
    g = Gamma(n)
    out = []

    def inv_map(name, src_tag, tgt_tag, changes, shift=0, relabel=None, src_gates=None,
                tgt_gates=None):
        mor = _substitution(g, src_tag, tgt_tag, changes, shift, relabel)[0]
        return ElementaryMap(name, mor, g.two_gate(*src_gates)[1], g.two_gate(*tgt_gates)[1],
                             src_gates[0], tgt_gates[0])

    def unshift(name):
        return name if name == "c" else f"{name[0]}_{(int(name[2:]) - 1) % g.nv}"

    out.append(inv_map("rho^-1", "a_0", g.a(n - 3), {}, -1, unshift,
                       ("a_0", "c"), (g.a(n - 3), "c")))
    for i in range(n - 3, 0, -1):
        a, b, ap, bp = g.a(i), g.b(i), g.a(i - 1), g.b(i - 1)
        w = W.concat(W.power(g.word(f"{b.upper()} {ap.upper()} {bp.upper()} {ap}"),
                             params.alpha(i)), g.word(f"C {a}"))
        out.append(inv_map(f"L_{a}^-1", a, a, {a: w}, src_gates=(a, "c"), tgt_gates=(a, "c")))
        w = g.word(f"{b.upper()}^2 c {b}")
        out.append(inv_map(f"R_{b}^-1", a, b, {"c": w}, src_gates=(a, "c"),
                           tgt_gates=(b, "c")))
        w = W.concat(g.word(ap.upper()), W.power(g.word(bp.upper()), params.beta(i)),
                     g.word(f"{ap} C {b}"))
        out.append(inv_map(f"L_{b}^-1", b, b, {b: w}, src_gates=(b, "c"), tgt_gates=(b, "c")))
        w = g.word(f"{ap.upper()} c {ap}")
        out.append(inv_map(f"R_{ap}^-1", b, ap, {"c": w}, src_gates=(bp.upper(), ap),
                           tgt_gates=(bp.upper(), ap)))
    return out


def inverse_construction(n, params):
    """F⁻¹ as a morphism of Γ_{a_0}.

    The factorization through inverse elementary maps cancels at seams (for
    instance ``a_0 B_1`` meets the image ``B_1 c A_0 ...``), so images are
    tightened after each substitution.  Parameters should stay small since
    tightening works on expanded words.
    """
    return compose_all([em.morphism for em in inverse_elementary_maps(n, params)], tight=True)


def abelian_product_is_identity(F, Finv):
    """Signed edge-crossing matrices of F and F⁻¹ multiply to the identity."""
    A = abelianization(F)
    B = abelianization(Finv)
    size = len(A)
    prod = [[sum(A[i][k] * B[k][j] for k in range(size)) for j in range(size)]
            for i in range(size)]
    return all(prod[i][j] == (i == j) for i in range(size) for j in range(size))
