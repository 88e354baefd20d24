"""Canonical JSON for graphs, morphisms and train tracks, plus atomic file output."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

from . import words as W
from .graphs import MarkedGraph, Morphism, TrainTrack


def graph_to_json(G):
    return {
        "vertices": list(G.vertices),
        "edges": [{"label": G.labels[e], "origin": G.origin(2 * e), "terminus": G.origin(2 * e + 1)}
                  for e in G.edges],
        "involution": [[2 * e, 2 * e + 1] for e in G.edges],
    }


def graph_from_json(data):
    origins = []
    for e in data["edges"]:
        origins += [e["origin"], e["terminus"]]
    G = MarkedGraph(len(data["vertices"]), tuple(origins), tuple(e["label"] for e in data["edges"]))
    if data.get("involution", [[2 * e, 2 * e + 1] for e in G.edges]) != \
            [[2 * e, 2 * e + 1] for e in G.edges]:
        raise ValueError("involution pairs must be (2e, 2e+1)")
    return G


def train_track_to_json(tt):
    G = tt.graph
    gates = {}
    for h in range(2 * G.num_edges):
        gates.setdefault((G.origin(h), tt.gate_of[h]), []).append(W.letter_name(h, G.labels))
    return [{"vertex": v, "directions": ds} for (v, _), ds in sorted(gates.items())]


def train_track_from_json(G, data):
    groups = [[G.half_edge(name) for name in g["directions"]] for g in data]
    return TrainTrack.from_gates(G, groups)


def morphism_to_json(f, tt=None):
    out = {
        "source": graph_to_json(f.source),
        "target": graph_to_json(f.target),
        "vertex_map": list(f.vertex_map),
        "edge_map": {f.source.labels[e]: W.format_word(f.image(2 * e), f.target.labels)
                     for e in f.source.edges},
    }
    if tt is not None:
        out["gates"] = train_track_to_json(tt)
    return out


def morphism_from_json(data):
    S = graph_from_json(data["source"])
    T = graph_from_json(data["target"])
    images = []
    for e in S.edges:
        w = W.parse_word(data["edge_map"][S.labels[e]], T.labels)
        images.append(w)
    return Morphism(S, T, tuple(data["vertex_map"]), tuple(images))


def canonical_dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, canonical_dumps(obj))


def rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()
