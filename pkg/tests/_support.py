"""Shared generators for the test modules."""

from outertrack.construction import ConstructionParams
from outertrack.graphs import Morphism, compose_tight, rose


def uniform(n, a=2, b=2):
    return ConstructionParams.uniform(n, a, b)


def nielsen_automorphism(n, moves, rng):
    """Random composite of Nielsen moves on the rose, tightened."""
    R = rose(n)
    f = Morphism(R, R, (0,), tuple((2 * e,) for e in range(n)))
    for _ in range(moves):
        i, j = rng.sample(range(n), 2)
        kind = rng.randrange(3)
        images = [(2 * e,) for e in range(n)]
        if kind == 0:
            images[i] = (2 * i, 2 * j + rng.randrange(2))
        elif kind == 1:
            images[i] = (2 * j + rng.randrange(2), 2 * i)
        else:
            images[i] = (2 * i + 1,)
        g = Morphism(R, R, (0,), tuple(images))
        f = compose_tight(f, g)
    return f


def random_reduced_loop(G, rng, length, base=0):
    while True:
        w, v = [], base
        for _ in range(length):
            opts = [h for h in G.directions(v) if not w or h != w[-1] ^ 1]
            h = rng.choice(opts)
            w.append(h)
            v = G.terminus(h)
        if v == base and (len(w) == 1 or w[0] != w[-1] ^ 1):
            return tuple(w)
