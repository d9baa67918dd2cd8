"""Boundary-aware pooling of page token grids into block embeddings.

Tokens inside a block box get weights proportional to
``(u'(1-u'))^alpha * (v'(1-v'))^alpha`` in box-local coordinates, normalized
to sum 1; the block embedding is the weighted sum of token vectors. alpha=0
reduces to uniform mean pooling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .blocks import Block, BlockType, Document
from .errors import DimMismatch, EmptyROI, MissingGrid

BLOCK_TYPES = list(BlockType)
TYPE_INDEX = {t: i for i, t in enumerate(BLOCK_TYPES)}


@dataclass
class TokenGrid:
    page: int
    dim: int
    coords: np.ndarray  # (n, 2) page-normalized (u, v)
    vectors: np.ndarray  # (n, dim)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise DimMismatch(f"grid vectors shape {self.vectors.shape} vs dim {self.dim}")
        if len(self.coords) != len(self.vectors):
            raise DimMismatch("coords/vectors length mismatch")


@dataclass
class BlockEmbedding:
    block_id: int
    e: np.ndarray
    tau: np.ndarray


class TypeEmbeddingTable:
    """One trainable row per block type."""

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.shape[0] != len(BLOCK_TYPES):
            raise DimMismatch(f"type table needs {len(BLOCK_TYPES)} rows, got {rows.shape[0]}")
        self.rows = rows

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def row(self, t: BlockType) -> np.ndarray:
        return self.rows[TYPE_INDEX[t]]

    @classmethod
    def init(cls, dim: int = 16, seed: int = 0) -> "TypeEmbeddingTable":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-0.1, 0.1, size=(len(BLOCK_TYPES), dim)))


def roi_weights(
    block_bbox: tuple[float, float, float, float],
    grid: TokenGrid,
    alpha: float = 1.0,
) -> list[tuple[int, float]]:
    """Select in-box tokens and return normalized boundary-aware weights.

    Raises EmptyROI when no token lies inside the box. Tokens exactly on the
    border get raw weight 0 for alpha > 0; if every raw weight is 0 the
    selection falls back to uniform weights.
    """
    x0, y0, x1, y1 = block_bbox
    u, v = grid.coords[:, 0], grid.coords[:, 1]
    inside = (u >= x0) & (u <= x1) & (v >= y0) & (v <= y1)
    idx = np.nonzero(inside)[0]
    if idx.size == 0:
        raise EmptyROI(f"no token inside {block_bbox}")
    ul = (u[idx] - x0) / (x1 - x0)
    vl = (v[idx] - y0) / (y1 - y0)
    if alpha == 0.0:
        w = np.ones(idx.size)
    else:
        w = np.power(ul * (1.0 - ul), alpha) * np.power(vl * (1.0 - vl), alpha)
    total = w.sum()
    if total <= 0.0:
        w = np.ones(idx.size)
        total = w.sum()
    w = w / total
    return [(int(i), float(wi)) for i, wi in zip(idx, w)]


def embed_block(
    block: Block,
    grid: TokenGrid,
    alpha: float,
    table: TypeEmbeddingTable,
) -> BlockEmbedding:
    """Pool the grid over the block box; on an empty ROI copy the token nearest the box center."""
    tau = table.row(block.type).copy()
    try:
        pairs = roi_weights(block.bbox, grid, alpha)
    except EmptyROI:
        x0, y0, x1, y1 = block.bbox
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        d2 = (grid.coords[:, 0] - cx) ** 2 + (grid.coords[:, 1] - cy) ** 2
        e = grid.vectors[int(np.argmin(d2))].copy()
        return BlockEmbedding(block_id=block.id, e=e, tau=tau)
    idx = np.array([i for i, _ in pairs], dtype=np.int64)
    w = np.array([wi for _, wi in pairs])
    e = w @ grid.vectors[idx]
    return BlockEmbedding(block_id=block.id, e=e, tau=tau)


def embed_document(
    doc: Document,
    grids: list[TokenGrid],
    alpha: float,
    table: TypeEmbeddingTable,
) -> list[BlockEmbedding]:
    by_page = {g.page: g for g in grids}
    out = []
    for b in doc.blocks:
        if b.page not in by_page:
            raise MissingGrid(f"doc {doc.doc_id}: no token grid for page {b.page}")
        out.append(embed_block(b, by_page[b.page], alpha, table))
    return out


# ---------------------------------------------------------------------------
# interchange I/O


def write_grids(grids: Iterable[TokenGrid], fh: TextIO) -> None:
    for g in grids:
        tokens = [
            [float(u), float(v), [float(x) for x in z]]
            for (u, v), z in zip(g.coords, g.vectors)
        ]
        fh.write(json.dumps({"page": g.page, "dim": g.dim, "tokens": tokens}) + "\n")


def read_grids(fh: TextIO) -> list[TokenGrid]:
    grids = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        toks = obj["tokens"]
        coords = np.array([[t[0], t[1]] for t in toks], dtype=np.float64)
        vectors = np.array([t[2] for t in toks], dtype=np.float64)
        grids.append(TokenGrid(page=int(obj["page"]), dim=int(obj["dim"]), coords=coords, vectors=vectors))
    return grids


def write_embeddings(embs: Iterable[BlockEmbedding], fh: TextIO) -> None:
    for be in embs:
        fh.write(
            json.dumps(
                {"block_id": be.block_id, "e": [float(x) for x in be.e], "tau": [float(x) for x in be.tau]}
            )
            + "\n"
        )


def read_embeddings(fh: TextIO) -> list[BlockEmbedding]:
    out = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        out.append(
            BlockEmbedding(
                block_id=int(obj["block_id"]),
                e=np.array(obj["e"], dtype=np.float64),
                tau=np.array(obj["tau"], dtype=np.float64),
            )
        )
    return out
