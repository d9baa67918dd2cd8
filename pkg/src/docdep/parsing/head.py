"""Biaffine edge-scoring head: MLP encoder, bilinear scorer, loss and gradients.

The head maps each block's concatenated [pooled embedding; type embedding]
through a two-layer relu MLP, scores candidate parent edges with a
bias-augmented bilinear form plus a linear term over pairwise geometry, and
scores ROOT edges with a separate linear readout. Training minimizes
cross-entropy of the per-child softmax over candidates + ROOT.

Gradients are computed analytically (hand-derived backprop over numpy);
tests check every component against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np

from ..blocks import ROOT, Document
from ..errors import DimMismatch, NotACandidate
from ..softroi import BLOCK_TYPES, TYPE_INDEX, BlockEmbedding, TypeEmbeddingTable
from .candidates import CandidateSet, geo_features, N_GEO_FEATURES

CHECKPOINT_VERSION = 1


@dataclass
class HeadParams:
    W1: np.ndarray  # (H, D + D_type)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, H)
    b2: np.ndarray  # (H,)
    U: np.ndarray  # (H+1, H+1)
    w_geo: np.ndarray  # (N_GEO_FEATURES,)
    r: np.ndarray  # (H,)
    b_r: np.ndarray  # scalar, kept as shape-() array
    type_table: np.ndarray  # (n_types, D_type)

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.W1.shape[1] - self.type_table.shape[1]

    def named(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "HeadParams":
        return HeadParams(**{k: v.copy() for k, v in self.named().items()})

    def zeros_like(self) -> "HeadParams":
        return HeadParams(**{k: np.zeros_like(v) for k, v in self.named().items()})

    @classmethod
    def init(cls, embed_dim: int, type_dim: int = 16, hidden: int = 64, seed: int = 0) -> "HeadParams":
        rng = np.random.default_rng(seed)
        din = embed_dim + type_dim
        return cls(
            W1=rng.normal(0.0, np.sqrt(2.0 / din), size=(hidden, din)),
            b1=np.zeros(hidden),
            W2=rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, hidden)),
            b2=np.zeros(hidden),
            U=rng.uniform(-0.05, 0.05, size=(hidden + 1, hidden + 1)),
            w_geo=rng.uniform(-0.05, 0.05, size=N_GEO_FEATURES),
            r=rng.uniform(-0.05, 0.05, size=hidden),
            b_r=np.zeros(()),
            type_table=rng.uniform(-0.1, 0.1, size=(len(BLOCK_TYPES), type_dim)),
        )

    @property
    def table(self) -> TypeEmbeddingTable:
        return TypeEmbeddingTable(self.type_table)

    # checkpoint round-trips exactly: Python float repr is lossless for f64
    def save(self, path: str) -> None:
        payload = {
            "version": CHECKPOINT_VERSION,
            "tensors": {
                k: {"shape": list(v.shape), "data": np.asarray(v, dtype=np.float64).ravel().tolist()}
                for k, v in self.named().items()
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path: str) -> "HeadParams":
        with open(path) as fh:
            payload = json.load(fh)
        tensors = {
            k: np.array(t["data"], dtype=np.float64).reshape(t["shape"])
            for k, t in payload["tensors"].items()
        }
        return cls(**tensors)


def hidden(x: np.ndarray, params: HeadParams) -> np.ndarray:
    """h = W2 relu(W1 x + b1) + b2 for a single input vector."""
    if x.shape[-1] != params.W1.shape[1]:
        raise DimMismatch(f"input dim {x.shape[-1]} vs W1 {params.W1.shape}")
    z = np.maximum(params.W1 @ x + params.b1, 0.0)
    return params.W2 @ z + params.b2


def child_softmax(scores) -> np.ndarray:
    """Numerically stable softmax over a child's candidate scores."""
    s = np.asarray(scores, dtype=np.float64)
    s = s - s.max()
    e = np.exp(s)
    return e / e.sum()


def edge_score(
    u: int,
    v: int,
    h: dict[int, np.ndarray],
    geo: np.ndarray | None,
    params: HeadParams,
    candidates: CandidateSet | None = None,
) -> float:
    """Score a single candidate edge u -> v (u may be ROOT)."""
    if candidates is not None and u not in candidates.candidates:
        raise NotACandidate(f"{u} is not a candidate parent of {v}")
    hv = h[v]
    if u == ROOT:
        return float(params.r @ hv + params.b_r)
    au = np.append(h[u], 1.0)
    av = np.append(hv, 1.0)
    s = float(au @ params.U @ av)
    if geo is not None:
        s += float(params.w_geo @ geo)
    return s


@dataclass
class ScoredCandidates:
    child: int
    candidates: list[int]  # includes ROOT
    scores: np.ndarray


class _DocForward:
    """Cached forward pass over one document (inputs, activations, geometry)."""

    def __init__(
        self,
        doc: Document,
        embeddings: list[BlockEmbedding],
        cand_sets: list[CandidateSet],
        params: HeadParams,
        m_pages: int,
        dropout: float = 0.0,
        rng: np.random.Generator | None = None,
    ):
        self.doc = doc
        self.cand_sets = cand_sets
        n = len(doc.blocks)
        d_type = params.type_table.shape[1]
        e_by_id = {be.block_id: be.e for be in embeddings}
        self.type_idx = np.array([TYPE_INDEX[b.type] for b in doc.blocks])
        self.X = np.zeros((n, params.W1.shape[1]))
        for b in doc.blocks:
            self.X[b.id, :-d_type] = e_by_id[b.id]
            self.X[b.id, -d_type:] = params.type_table[self.type_idx[b.id]]
        self.A = self.X @ params.W1.T + params.b1  # pre-activation
        self.Z = np.maximum(self.A, 0.0)
        if dropout > 0.0:
            if rng is None:
                rng = np.random.default_rng(0)
            self.mask = (rng.random(self.Z.shape) >= dropout) / (1.0 - dropout)
        else:
            self.mask = None
        Zd = self.Z if self.mask is None else self.Z * self.mask
        self.Zd = Zd
        self.H = Zd @ params.W2.T + params.b2
        self.Haug = np.concatenate([self.H, np.ones((n, 1))], axis=1)
        # per-edge geometry, cached by (u, v)
        blocks = doc.blocks
        self.geo: dict[tuple[int, int], np.ndarray] = {}
        for cs in cand_sets:
            for u in cs.candidates:
                if u != ROOT:
                    self.geo[(u, cs.child)] = geo_features(blocks[u], blocks[cs.child], m_pages)

    def score_child(self, cs: CandidateSet, params: HeadParams) -> np.ndarray:
        av = self.Haug[cs.child]
        scores = np.empty(len(cs.candidates))
        for j, u in enumerate(cs.candidates):
            if u == ROOT:
                scores[j] = params.r @ self.H[cs.child] + params.b_r
            else:
                scores[j] = self.Haug[u] @ params.U @ av + params.w_geo @ self.geo[(u, cs.child)]
        return scores


def score_document(
    doc: Document,
    embeddings: list[BlockEmbedding],
    cand_sets: list[CandidateSet],
    params: HeadParams,
    m_pages: int = 3,
) -> list[ScoredCandidates]:
    """Inference-time edge scores for every child of a document (no dropout)."""
    fwd = _DocForward(doc, embeddings, cand_sets, params, m_pages)
    return [
        ScoredCandidates(child=cs.child, candidates=list(cs.candidates), scores=fwd.score_child(cs, params))
        for cs in cand_sets
    ]


@dataclass
class LossStats:
    n_children: int = 0
    n_retained: int = 0
    n_gold_pruned: int = 0

    @property
    def gold_coverage(self) -> float:
        return self.n_retained / self.n_children if self.n_children else 1.0


def loss_and_grad(
    batch: list[tuple[Document, list[BlockEmbedding], dict[int, int]]],
    params: HeadParams,
    cand_fn,
    m_pages: int = 3,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[float, HeadParams, LossStats]:
    """Mean cross-entropy over retained children and its exact gradient.

    ``cand_fn(doc) -> list[CandidateSet]``. Children whose gold parent was
    pruned from the candidate pool are skipped and counted in the stats.
    """
    grads = params.zeros_like()
    stats = LossStats()
    total = 0.0
    entries = []  # (fwd, cs, gold_idx)
    for doc, embeddings, gold in batch:
        cand_sets = cand_fn(doc)
        fwd = _DocForward(doc, embeddings, cand_sets, params, m_pages, dropout=dropout, rng=rng)
        for cs in cand_sets:
            stats.n_children += 1
            g = gold[cs.child]
            if g not in cs.candidates:
                stats.n_gold_pruned += 1
                continue
            stats.n_retained += 1
            entries.append((fwd, cs, cs.candidates.index(g)))
    if not entries:
        return 0.0, grads, stats
    inv = 1.0 / len(entries)

    dH: dict[int, np.ndarray] = {}  # id(fwd) -> (n, H) accumulator
    fwds = []
    for fwd, cs, gold_idx in entries:
        key = id(fwd)
        if key not in dH:
            dH[key] = np.zeros_like(fwd.H)
            fwds.append(fwd)
        scores = fwd.score_child(cs, params)
        p = child_softmax(scores)
        total += -np.log(max(p[gold_idx], 1e-300))
        ds = p.copy()
        ds[gold_idx] -= 1.0
        ds *= inv
        av = fwd.Haug[cs.child]
        acc = dH[key]
        for j, u in enumerate(cs.candidates):
            dsj = ds[j]
            if dsj == 0.0:
                continue
            if u == ROOT:
                grads.r += dsj * fwd.H[cs.child]
                grads.b_r += dsj
                acc[cs.child] += dsj * params.r
            else:
                au = fwd.Haug[u]
                grads.U += dsj * np.outer(au, av)
                grads.w_geo += dsj * fwd.geo[(u, cs.child)]
                acc[u] += dsj * (params.U @ av)[:-1]
                acc[cs.child] += dsj * (params.U.T @ au)[:-1]

    d_type = params.type_table.shape[1]
    for fwd in fwds:
        dh = dH[id(fwd)]
        grads.W2 += dh.T @ fwd.Zd
        grads.b2 += dh.sum(axis=0)
        dzd = dh @ params.W2
        dz = dzd if fwd.mask is None else dzd * fwd.mask
        da = dz * (fwd.A > 0.0)
        grads.W1 += da.T @ fwd.X
        grads.b1 += da.sum(axis=0)
        dx = da @ params.W1
        dtau = dx[:, -d_type:]
        np.add.at(grads.type_table, fwd.type_idx, dtau)

    return float(total * inv), grads, stats
