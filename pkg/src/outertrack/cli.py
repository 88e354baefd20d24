"""Command-line entry point: ``outertrack <command> --config cfg.json``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import random
import sys

import jsonschema

from . import __version__
from .audit import (audit_decomposition, estimate_edge_order, mixing_certificate,
                    upper_bound_audit)
from .construction import (ConstructionParams, Gamma, big_F, closed_form_M, edge_names,
                           elementary_maps, tier1_width)
from .errors import (CertificateViolation, ConstructionMismatch, InsufficientDepth,
                     InvalidConfig, InvalidParameters, MonotonicityViolation, OrderViolation,
                     OutertrackError)
from .game import run_game
from .io import morphism_to_json, rows_to_csv, train_track_to_json, write_json, atomic_write, \
    graph_to_json
from .matrices import FOLDING, UNFOLDING, fmt_rational, parse_rational, transition_matrix
from .measures import (approximate_retraction, build_normalized_system, ergodic_lower_bound)
from .monitor import monitor
from .sequence import run_sequence

log = logging.getLogger("outertrack")

EXIT_OK, EXIT_MISMATCH, EXIT_VIOLATION, EXIT_INCONCLUSIVE = 0, 2, 3, 4

_RATIONAL = {"type": ["string", "integer"]}
_PARAMS = {
    "type": "object",
    "properties": {"alphas": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                   "betas": {"type": "array", "items": {"type": "integer", "minimum": 1}}},
    "required": ["alphas", "betas"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer"},
        "m": {"type": "integer", "minimum": 1},
        "direction": {"enum": [FOLDING, UNFOLDING]},
        "steps": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "schedule": {"oneOf": [{"enum": ["alice-bob", "uniform"]},
                               {"type": "array", "items": _PARAMS}]},
        "alphas": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "betas": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "alpha": {"type": "integer", "minimum": 1},
        "beta": {"type": "integer", "minimum": 1},
        "p": _RATIONAL,
        "stride": {"type": "integer", "minimum": 1},
        "margin": _RATIONAL,
        "depth": {"type": "integer", "minimum": 1},
        "bound": {"type": "number", "exclusiveMinimum": 0},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "K": {"type": "integer", "minimum": 0},
        "targets": {"type": "object", "additionalProperties": False,
                    "properties": {"epsilon": _RATIONAL, "p": _RATIONAL, "delta": _RATIONAL}},
        "subgroups": {"type": "array",
                      "items": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
        "random_subgroups": {"type": "object", "additionalProperties": False,
                             "properties": {"count": {"type": "integer", "minimum": 1},
                                            "generators": {"type": "integer", "minimum": 1},
                                            "length": {"type": "integer", "minimum": 1}},
                             "required": ["count"]},
        "policy": {"enum": ["greedy", "manual"]},
        "kmax": {"type": "integer", "minimum": 0},
        "decomposition": {"type": "object", "additionalProperties": False,
                          "properties": {"H0": {"type": "array", "items": {"type": "string"}},
                                         "blocks": {"type": "array", "items": {
                                             "type": "array", "items": {"type": "string"}}}},
                          "required": ["H0", "blocks"]},
        "order": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
        "seed": {"type": "integer"},
        "outputs": {"type": "object", "additionalProperties": {"type": "string"}},
    },
    "required": ["n"],
}


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InvalidConfig(f"invalid config: {exc.message}") from exc
    if cfg["n"] < 4:
        raise InvalidConfig("the construction needs n >= 4")
    return cfg


# Runs ---------------------------------------------------------------------------

def _params(cfg):
    n = cfg["n"]
    if "alphas" in cfg or "betas" in cfg:
        return ConstructionParams(n, cfg.get("alphas"), cfg.get("betas"))
    return ConstructionParams.uniform(n, cfg.get("alpha", 2), cfg.get("beta", 2))


def build_run(cfg, jobs=1):
    """A run from the config's schedule; the default is the game schedule."""
    n = cfg["n"]
    direction = cfg.get("direction", FOLDING)
    steps = cfg.get("steps", cfg.get("horizon", 4))
    schedule = cfg.get("schedule", "alice-bob")
    if schedule == "alice-bob":
        run, report = run_game(n, cfg.get("m"), direction, steps, parse_rational(cfg.get("p", 2)),
                               jobs=jobs, strict=False)
        return run, report
    if schedule == "uniform":
        schedule = [_params(cfg)] * steps
    else:
        schedule = [ConstructionParams(n, s["alphas"], s["betas"]) for s in schedule]
    run = run_sequence(n, schedule, direction, jobs=jobs)
    return run, None


# Commands -----------------------------------------------------------------------

def cmd_construct(cfg, args):
    n = cfg["n"]
    params = _params(cfg)
    g = Gamma(n)
    F = big_F(n, params)
    computed = transition_matrix(F)
    closed = closed_form_M(n, params)
    names = edge_names(n)
    diff = [{"row": names[i], "col": names[j], "computed": int(computed[i, j]),
             "closed_form": int(closed[i, j])}
            for i in range(computed.rows) for j in range(computed.cols)
            if computed[i, j] != closed[i, j]]
    G, tt = g.tagged("a_0")
    report = {
        "n": n, "params": params.to_json(),
        "gamma": graph_to_json(G), "gates": train_track_to_json(tt),
        "elementary_maps": [{"name": em.name, "source_tag": em.source_tag,
                             "target_tag": em.target_tag, "map": morphism_to_json(em.morphism)}
                            for em in elementary_maps(n, params)],
        "F": morphism_to_json(F),
        "matrix": computed.to_json(), "labels": names, "diff": diff,
    }
    _emit(args, "construct", report)
    atomic_write(os.path.join(args.out, "construct_matrix.csv"), computed.to_csv(names))
    if diff:
        raise ConstructionMismatch(f"{len(diff)} entries differ from the closed form")
    return EXIT_OK


def cmd_game(cfg, args):
    run, report = run_game(cfg["n"], cfg.get("m"), cfg.get("direction", FOLDING),
                           cfg.get("steps", 1), parse_rational(cfg.get("p", 2)),
                           jobs=args.jobs, strict=False)
    _emit(args, "game", report.to_json())
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_certify(cfg, args):
    run, _ = build_run(cfg, args.jobs)
    targets = {k: parse_rational(v) for k, v in cfg.get("targets", {}).items()}
    pairs = []
    ok = True
    for (r, s), cert in sorted(run.certs.items()):
        row = {"r": r, "s": s, "cert": cert.to_json()}
        if "epsilon" in targets:
            row["satisfies"] = cert.satisfies(targets["epsilon"], targets.get("p"),
                                              targets.get("delta"))
            ok &= row["satisfies"]
        pairs.append(row)
    _emit(args, "certify", {"n": run.n, "direction": run.direction, "m": run.m,
                            "order": run.edge_order(), "targets": cfg.get("targets", {}),
                            "pairs": pairs, "passed": ok})
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_estimate(cfg, args):
    run, _ = build_run(cfg, args.jobs)
    bound = ergodic_lower_bound(run, cfg.get("m"))
    system = build_normalized_system(run, _stride(cfg, args))
    out = bound.to_json()
    out["cauchy"] = [{"s": s, "defect": repr(d)} for s, d in bound.cauchy]
    out.update({"n": run.n, "direction": run.direction, "expected": tier1_width(run.n),
                "tail_monotone": bound.tail_monotone()})
    _emit(args, "estimate", out)
    header = ["t"] + list(run.labels)
    rows = [[t * system.stride] + [str(w) for w in system.measure(t).values]
            for t in range(system.horizon + 1)]
    atomic_write(os.path.join(args.out, "estimate_weights.csv"), rows_to_csv(header, rows))
    return EXIT_OK if bound.tail_monotone() else EXIT_INCONCLUSIVE


def cmd_decompose(cfg, args):
    run, _ = build_run(cfg, args.jobs)
    system = build_normalized_system(run, _stride(cfg, args))
    report = approximate_retraction(system, cfg.get("depth"), cfg.get("bound", 1e-3),
                                    cfg.get("tau"))
    out = report.to_json()
    out["blocks_positive"] = report.blocks_positive()
    _emit(args, "decompose", out)
    S = system.transition(report.r // system.stride, system.horizon).floats()
    rows = [[run.labels[i]] + [repr(x) for x in S[i]] for i in range(len(S))]
    atomic_write(os.path.join(args.out, "decompose_columns.csv"),
                 rows_to_csv([""] + list(run.labels), rows))
    return EXIT_INCONCLUSIVE if report.ambiguous else EXIT_OK


def _random_subgroups(n, opts, seed):
    rng = random.Random(seed)
    g = Gamma(n)
    G, _ = g.tagged("a_0")
    out = []
    for _ in range(opts["count"]):
        gens = []
        for _ in range(opts.get("generators", 2)):
            while True:
                w, v = [], 0
                for _ in range(rng.randint(1, opts.get("length", 5))):
                    choices = [h for h in G.directions(v) if not w or h != w[-1] ^ 1]
                    h = rng.choice(choices)
                    w.append(h)
                    v = G.terminus(h)
                if v == 0 and (len(w) == 1 or w[0] != w[-1] ^ 1):
                    break
            gens.append(G.format(tuple(w)))
        out.append(gens)
    return out


def cmd_monitor(cfg, args):
    n = cfg["n"]
    subgroups = list(cfg.get("subgroups", []))
    if "random_subgroups" in cfg:
        subgroups += _random_subgroups(n, cfg["random_subgroups"], cfg.get("seed", 0))
    if not subgroups:
        raise InvalidConfig("monitor needs subgroups or random_subgroups")
    per_copy = len(elementary_maps(n, ConstructionParams.uniform(n, 1, 1)))
    steps = cfg.get("steps", per_copy)
    copies = -(-steps // per_copy)
    schedule = cfg.get("schedule", "uniform")
    if schedule == "alice-bob":
        run, _ = run_game(n, cfg.get("m"), FOLDING, copies, jobs=args.jobs, strict=False)
    else:
        if schedule == "uniform":
            params = [_params(cfg)] * copies
        else:
            params = [ConstructionParams(n, s["alphas"], s["betas"]) for s in schedule]
        run = run_sequence(n, params[:max(copies, 1)], FOLDING)
    report = monitor(run, subgroups, steps, cfg.get("policy", "greedy"), jobs=args.jobs,
                     kmax=cfg.get("kmax", 8))
    _emit(args, "monitor", report.to_json())
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_audit(cfg, args):
    run, _ = build_run(cfg, args.jobs)
    n = run.n
    G, _ = Gamma(n).tagged("a_0")
    index = {name: e for e, name in enumerate(run.labels)}
    if "decomposition" in cfg:
        h0 = [index[x] for x in cfg["decomposition"]["H0"]]
        blocks = [[index[x] for x in b] for b in cfg["decomposition"]["blocks"]]
    else:
        dec = approximate_retraction(build_normalized_system(run, _stride(cfg, args)),
                                     cfg.get("depth"), cfg.get("bound", 1e-3), cfg.get("tau"))
        if dec.ambiguous:
            raise InsufficientDepth("decomposition has ambiguous edges")
        h0, blocks = dec.h0, dec.blocks
    if "order" in cfg:
        order = [[index[x] for x in c] for c in cfg["order"]]
        order_json = cfg["order"]
    else:
        eo = estimate_edge_order(run, margin=parse_rational(cfg.get("margin", 4)),
                                 stride=_stride(cfg, args), exclude=h0)
        order_json = eo.to_json()
        if not eo.complete:
            _emit(args, "audit", {"edge_order": order_json, "passed": False,
                                  "inconclusive": "unclassifiable edge pairs"})
            return EXIT_INCONCLUSIVE
        order = eo
    depth = mixing_certificate(run, cfg.get("K", 0))
    report = upper_bound_audit(G, h0, blocks, order, witness_depth=depth or None)
    out = report.to_json()
    out["edge_order"] = order_json
    _emit(args, "audit", out)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_export(cfg, args):
    run, game = build_run(cfg, args.jobs)
    names = list(run.labels)
    bundle = {"n": run.n, "direction": run.direction, "m": run.m, "order": run.edge_order(),
              "params": [p.to_json() for p in run.params],
              "steps": [f"step_{t:03d}.csv" for t in range(run.horizon)],
              "certs": [{"r": r, "s": s, "cert": c.to_json()}
                        for (r, s), c in sorted(run.certs.items())]}
    for t, M in enumerate(run.step_matrices):
        atomic_write(os.path.join(args.out, f"step_{t:03d}.csv"), M.to_csv(names))
    _emit(args, "export", bundle)
    return EXIT_OK


COMMANDS = {"construct": cmd_construct, "game": cmd_game, "certify": cmd_certify,
            "estimate": cmd_estimate, "decompose": cmd_decompose, "monitor": cmd_monitor,
            "audit": cmd_audit, "export": cmd_export}


def _stride(cfg, args):
    return args.stride or cfg.get("stride", 1)


def _emit(args, command, payload):
    doc = {"command": command, "version": __version__, "report": payload}
    if not args.no_timestamp:
        doc["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    write_json(os.path.join(args.out, f"{command}.json"), doc)


def build_parser():
    parser = argparse.ArgumentParser(prog="outertrack",
                                     description="Folding/unfolding sequences of graph maps.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker cap")
        p.add_argument("--stride", type=int, default=None, help="checkpoint stride")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the generation time for byte-identical reports")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = os.environ.get("OUTERTRACK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return EXIT_MISMATCH
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (InvalidConfig, InvalidParameters, ConstructionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (CertificateViolation, OrderViolation, MonotonicityViolation) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except InsufficientDepth as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except OutertrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
