"""Tree interchange: one JSON object per document with child/parent edges."""

from __future__ import annotations

import json
from typing import Iterable, TextIO

from .blocks import ROOT


def tree_to_dict(doc_id: str, parent: dict[int, int], scores: dict[int, float] | None = None) -> dict:
    edges = []
    for child in sorted(parent):
        p = parent[child]
        edge = {"child": child, "parent": "ROOT" if p == ROOT else p}
        if scores is not None:
            edge["score"] = scores.get(child, 0.0)
        edges.append(edge)
    return {"doc_id": doc_id, "edges": edges}


def tree_from_dict(obj: dict) -> tuple[str, dict[int, int]]:
    parent = {}
    for e in obj["edges"]:
        p = e["parent"]
        parent[int(e["child"])] = ROOT if p == "ROOT" else int(p)
    return obj["doc_id"], parent


def write_trees(items: Iterable[dict], fh: TextIO) -> None:
    for obj in items:
        fh.write(json.dumps(obj) + "\n")


def read_trees(fh: TextIO) -> dict[str, dict[int, int]]:
    out = {}
    for line in fh:
        line = line.strip()
        if not line:
            continue
        doc_id, parent = tree_from_dict(json.loads(line))
        out[doc_id] = parent
    return out
