"""Corpus-level chunk index with BM25 and exact-scan dense cosine search."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, DuplicateChunkId, NoDenseVectors

INDEX_VERSION = 1
_TOKEN_RE = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; punctuation acts as a separator."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class ChunkIndex:
    chunk_ids: list[str]
    lengths: dict[str, int]
    postings: dict[str, list[tuple[str, int]]]  # term -> [(chunk_id, tf)]
    doc_freq: dict[str, int]
    avg_len: float
    dense: dict[str, np.ndarray] | None = None

    @property
    def n_chunks(self) -> int:
        return len(self.chunk_ids)


def build_index(
    chunks: list[tuple[str, str]],
    dense: dict[str, list[float]] | None = None,
) -> ChunkIndex:
    """Build postings from (chunk_id, text) pairs; optional dense vectors attach verbatim."""
    seen = set()
    postings: dict[str, list[tuple[str, int]]] = {}
    lengths: dict[str, int] = {}
    ids = []
    for cid, text in chunks:
        if cid in seen:
            raise DuplicateChunkId(cid)
        seen.add(cid)
        ids.append(cid)
        toks = tokenize(text)
        lengths[cid] = len(toks)
        tf: dict[str, int] = {}
        for t in toks:
            tf[t] = tf.get(t, 0) + 1
        for t, c in tf.items():
            postings.setdefault(t, []).append((cid, c))
    doc_freq = {t: len(pl) for t, pl in postings.items()}
    avg_len = sum(lengths.values()) / len(lengths) if lengths else 0.0
    dv = None
    if dense is not None:
        dv = {}
        dim = None
        for cid, vec in dense.items():
            arr = np.asarray(vec, dtype=np.float64)
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DimMismatch("dense vectors disagree in dimensionality")
            dv[cid] = arr
    return ChunkIndex(chunk_ids=ids, lengths=lengths, postings=postings, doc_freq=doc_freq, avg_len=avg_len, dense=dv)


def bm25_search(
    index: ChunkIndex,
    query: str,
    k: int,
    k1: float = 1.2,
    b: float = 0.75,
) -> list[tuple[str, float]]:
    """Top-k chunks by BM25 with idf = ln(1 + (N-df+0.5)/(df+0.5)); ties by lower chunk id."""
    terms = tokenize(query)
    if not terms:
        return []
    n = index.n_chunks
    scores: dict[str, float] = {}
    for t in terms:
        pl = index.postings.get(t)
        if not pl:
            continue
        df = index.doc_freq[t]
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for cid, tf in pl:
            denom = tf + k1 * (1.0 - b + b * index.lengths[cid] / index.avg_len)
            scores[cid] = scores.get(cid, 0.0) + idf * tf * (k1 + 1.0) / denom
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def dense_search(index: ChunkIndex, query_vector, k: int) -> list[tuple[str, float]]:
    """Exact cosine scan over the attached vectors; ties by lower chunk id."""
    if index.dense is None:
        raise NoDenseVectors("index was built without dense vectors")
    q = np.asarray(query_vector, dtype=np.float64)
    qn = np.linalg.norm(q)
    out = []
    for cid in sorted(index.dense):
        v = index.dense[cid]
        if v.shape != q.shape:
            raise DimMismatch(f"query dim {q.shape} vs chunk dim {v.shape}")
        vn = np.linalg.norm(v)
        score = float(q @ v / (qn * vn)) if qn > 0 and vn > 0 else 0.0
        out.append((cid, score))
    out.sort(key=lambda kv: (-kv[1], kv[0]))
    return out[:k]


# ---------------------------------------------------------------------------
# persistence


def save_index(index: ChunkIndex, path: str) -> None:
    payload = {
        "version": INDEX_VERSION,
        "tokenization": "lowercase \\w+ word tokens, punctuation separates",
        "chunk_ids": index.chunk_ids,
        "lengths": index.lengths,
        "postings": {t: [[cid, tf] for cid, tf in pl] for t, pl in index.postings.items()},
        "avg_len": index.avg_len,
        "dense": {cid: v.tolist() for cid, v in index.dense.items()} if index.dense is not None else None,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def load_index(path: str) -> ChunkIndex:
    with open(path) as fh:
        payload = json.load(fh)
    postings = {t: [(cid, int(tf)) for cid, tf in pl] for t, pl in payload["postings"].items()}
    dense = payload.get("dense")
    return ChunkIndex(
        chunk_ids=payload["chunk_ids"],
        lengths={k: int(v) for k, v in payload["lengths"].items()},
        postings=postings,
        doc_freq={t: len(pl) for t, pl in postings.items()},
        avg_len=float(payload["avg_len"]),
        dense={cid: np.asarray(v, dtype=np.float64) for cid, v in dense.items()} if dense is not None else None,
    )
