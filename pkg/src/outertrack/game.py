"""Alice's tolerance strategies and Bob's construction-backed answers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from gmpy2 import mpq, mpz

from .construction import ConstructionParams, closed_form_M, tier1_width
from .errors import CertificateViolation, InvalidParameters
from .matrices import FOLDING, UNFOLDING, certify_folding, certify_unfolding, fmt_rational
from .sequence import SequenceRun

log = logging.getLogger(__name__)

TAIL_TERMS = 64


@dataclass
class GameState:
    n: int
    m: int
    direction: str
    p: mpq = mpq(2)
    history: list = field(default_factory=list)
    P: mpq = mpq(0)

    @property
    def dim(self):
        return 2 * self.n - 3

    @property
    def s(self):
        return len(self.history)


@dataclass(frozen=True)
class Move:
    epsilon: mpq
    delta: object
    params: ConstructionParams
    cert: object


def alice_move_folding(state):
    s = state.s
    if s == 0:
        return mpq(1, 2)
    return mpq(1, 2 ** (s + 2)) / (state.dim * state.P)


def alice_move_unfolding(state):
    s = state.s
    if s == 0:
        return mpq(1, 2), mpq(1)
    eps = mpq(1, 2 ** (s + 2)) / (state.dim * state.P)
    delta = mpq(1, 2 ** (s + 1)) / (state.dim * state.P * state.p)
    return eps, delta


def _smallest_above(bound):
    """Smallest positive integer strictly greater than a nonnegative rational."""
    bound = mpq(bound)
    return max(1, int(bound.numerator // bound.denominator) + 1)


def _bob_folding(n, eps):
    m = tier1_width(n)
    k = n - 3
    base = closed_form_M(n, ConstructionParams.uniform(n, 1, 1)).T
    # a-columns of the transpose are positions k..2k-1, b-columns 0..k-1
    a_off = max(base[i, j] for j in range(k, 2 * k) for i in range(base.rows) if i != j)
    alpha = _smallest_above(mpq(a_off) / (2 * eps))
    with_alpha = closed_form_M(n, ConstructionParams.uniform(n, alpha, 1)).T
    b_off = max(with_alpha[i, j] for j in range(k) for i in range(base.rows) if i != j)
    beta = _smallest_above(mpq(b_off) / eps)
    while True:
        params = ConstructionParams.uniform(n, alpha, beta)
        cert = certify_folding(closed_form_M(n, params).T, m)
        if cert.epsilon < eps:
            return params, cert
        alpha, beta = 2 * alpha, 2 * beta


def _unfolding_ok(cert, eps, delta, p):
    return cert.satisfies(eps, p, delta) and cert.p_outer < p and cert.epsilon < p


def _bob_unfolding(n, eps, delta, p):
    m = tier1_width(n)
    k = n - 3
    base = closed_form_M(n, ConstructionParams.uniform(n, 1, 1), UNFOLDING)
    above = [max((base[i, j] for i in range(j)), default=0) for j in range(m)]
    tier2 = max(base[i, j] for j in range(m, base.cols) for i in range(base.rows))
    # diagonal positions: 0..k-1 hold 2α_{k..1}, k..2k-1 hold β_{k..1}
    betas = {}
    prev = None
    for j in range(1, k + 1):
        pos = m - j
        lower = mpq(above[pos]) / eps
        if prev is None:
            lower = max(lower, mpq(tier2) / (p * delta))
        else:
            lower = max(lower, mpq(prev) / delta)
        betas[j] = _smallest_above(lower)
        prev = betas[j]
    alphas = {}
    for j in range(1, k + 1):
        pos = k - j
        lower = max(mpq(above[pos]) / (2 * eps), mpq(prev) / (2 * delta))
        alphas[j] = _smallest_above(lower)
        prev = 2 * alphas[j]
    scale = 1
    while True:
        params = ConstructionParams(n, [alphas[j] * scale for j in range(1, k + 1)],
                                    [betas[j] * scale for j in range(1, k + 1)])
        cert = certify_unfolding(closed_form_M(n, params, UNFOLDING), m)
        if _unfolding_ok(cert, eps, delta, p):
            return params, cert
        log.info("escalating Bob's unfolding parameters")
        scale *= 2
        # keep the cascade ratios while scaling the top of it
        alphas = {j: alphas[j] * (2 ** j) for j in alphas}


def bob_move_construction(n, m, eps, delta=None, p=mpq(2)):
    if m != tier1_width(n):
        raise InvalidParameters(f"construction certifies m = {tier1_width(n)}, not {m}")
    if eps <= 0 or (delta is not None and delta <= 0):
        raise InvalidParameters("tolerances must be positive")
    if delta is None:
        return _bob_folding(n, mpq(eps))
    return _bob_unfolding(n, mpq(eps), mpq(delta), mpq(p))


# Envelopes -------------------------------------------------------------------

def product_bound(r, c):
    """Rational upper bound for ∏_{k>=r} (1 + c/2^k).

    The first TAIL_TERMS factors are multiplied exactly; the rest are bounded
    by exp(x) <= 1 + 2x with x = c/2^(r+TAIL_TERMS-1) <= 1.
    """
    c = mpq(c)
    out = mpq(1)
    for k in range(r, r + TAIL_TERMS):
        out *= 1 + c / 2 ** k
    x = c / 2 ** (r + TAIL_TERMS - 1)
    if x > 1:
        raise ValueError("tail estimate needs more terms")
    return out * (1 + 2 * x)


def p_envelope(r, dim, p):
    return mpq(p) * product_bound(r, dim * mpq(p))


def eps_envelope(r, eps_r, dim, p):
    """ε_r + Σ_{k>=r} dim·p·p̄_r / 2^k."""
    return mpq(eps_r) + dim * mpq(p) * p_envelope(r, dim, p) * mpq(2, 2 ** r)


@dataclass
class GameReport:
    n: int
    m: int
    direction: str
    steps: int
    moves: list
    rows: list
    passed: bool

    def to_json(self):
        return {"n": self.n, "m": self.m, "direction": self.direction, "steps": self.steps,
                "passed": self.passed,
                "moves": [dict(s=i, epsilon=fmt_rational(mv.epsilon),
                               delta=None if mv.delta is None else fmt_rational(mv.delta),
                               params=mv.params.to_json())
                          for i, mv in enumerate(self.moves)],
                "pairs": self.rows}


def _pair_row(run, state, r, s, moves):
    cert = run.certs[(r, s)]
    row = {"r": r, "s": s, "cert": cert.to_json()}
    if run.direction == FOLDING:
        env = mpq(1, 2 ** r)
        row["envelope_epsilon"] = fmt_rational(env)
        row["ok"] = bool(cert.epsilon < env)
    else:
        p = state.p
        checks = {}
        if s > r:
            checks["delta"] = bool(cert.delta < mpq(1, 2 ** s))
        pbar = p_envelope(r, state.dim, p)
        checks["p"] = bool(cert.p_hyp <= pbar)
        ebar = eps_envelope(r, moves[r].epsilon, state.dim, p)
        checks["epsilon"] = bool(cert.epsilon <= ebar)
        row["envelope_delta"] = fmt_rational(mpq(1, 2 ** s))
        row["checks"] = checks
        row["ok"] = all(checks.values())
    return row


def run_game(n, m=None, direction=FOLDING, steps=1, p=2, jobs=1, strict=True):
    if steps < 1:
        raise InvalidParameters("need at least one step")
    m = tier1_width(n) if m is None else m
    state = GameState(n, m, direction, mpq(p))
    run = SequenceRun.for_construction(n, direction)
    moves = []
    for s in range(steps):
        if direction == FOLDING:
            eps, delta = alice_move_folding(state), None
        else:
            eps, delta = alice_move_unfolding(state)
        params, cert = bob_move_construction(n, m, eps, delta, state.p)
        step_cert = run.extend(params, jobs=jobs)
        if step_cert != cert:
            raise AssertionError("step certificate differs from Bob's closed-form check")
        mv = Move(eps, delta, params, cert)
        moves.append(mv)
        state.history.append(mv)
        state.P = max([state.P] + [run.certs[(r, s)].K for r in range(s + 1)])
        log.info("step %d: eps=%s bits=%d", s, fmt_rational(eps),
                 run.products[(0, s)].max_entry().bit_length())
    rows = [_pair_row(run, state, r, s, moves) for r in range(steps) for s in range(r, steps)]
    passed = all(row["ok"] for row in rows)
    report = GameReport(n, m, direction, steps, moves, rows, passed)
    if strict and not passed:
        bad = next(row for row in rows if not row["ok"])
        raise CertificateViolation(f"pair ({bad['r']},{bad['s']}) left its envelope")
    return run, report
