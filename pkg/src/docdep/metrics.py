"""Evaluation metrics: parent accuracy, tree similarity, retrieval, answer scoring."""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from enum import Enum

from .blocks import ROOT, Document, VISUAL_TYPES
from .errors import IdMismatch
from .parsing.decode import DependencyTree


class EdgeSubsetTag(str, Enum):
    LOCAL = "Local"
    CROSS_PAGE = "CrossPage"
    FIG_TABLE = "FigTable"


def _parent_map(t) -> dict[int, int]:
    return t.parent if isinstance(t, DependencyTree) else dict(t)


def parent_f1(
    pred,
    gold,
    doc: Document | None = None,
    subset: EdgeSubsetTag | None = None,
) -> float:
    """Fraction of non-ROOT-gold blocks with the correct predicted parent.

    Each block gets exactly one prediction, so precision = recall = F1.
    """
    p, g = _parent_map(pred), _parent_map(gold)
    if set(p) != set(g):
        raise IdMismatch("predicted and gold trees cover different block ids")
    ids = [i for i in g if g[i] != ROOT]
    if subset is not None:
        if doc is None:
            raise ValueError("subset filtering needs the document")
        if subset is EdgeSubsetTag.LOCAL:
            ids = [i for i in ids if doc.blocks[i].page == doc.blocks[g[i]].page]
        elif subset is EdgeSubsetTag.CROSS_PAGE:
            ids = [i for i in ids if doc.blocks[i].page != doc.blocks[g[i]].page]
        else:
            ids = [i for i in ids if doc.blocks[i].type in VISUAL_TYPES]
    if not ids:
        return 1.0
    return sum(1 for i in ids if p[i] == g[i]) / len(ids)


# ---------------------------------------------------------------------------
# tree edit distance (Zhang-Shasha, ordered, unit costs)


class _TedTree:
    """Postorder arrays for the Zhang-Shasha algorithm."""

    def __init__(self, parent: dict[int, int]):
        kids: dict[int, list[int]] = {ROOT: []}
        for c in sorted(parent):
            kids.setdefault(c, [])
            kids[parent[c]] = kids.get(parent[c], [])
        for c in sorted(parent):
            kids[parent[c]].append(c)
        self.labels: list[int] = []
        self.lmld: list[int] = []  # leftmost leaf descendant, postorder index

        def walk(node: int) -> int:
            first = None
            for ch in kids.get(node, []):
                leaf = walk(ch)
                if first is None:
                    first = leaf
            self.labels.append(node)
            idx = len(self.labels) - 1
            self.lmld.append(first if first is not None else idx)
            return self.lmld[idx]

        walk(ROOT)
        self.n = len(self.labels)
        # keyroots: highest postorder index per distinct leftmost-leaf value
        seen: set[int] = set()
        roots = []
        for i in range(self.n - 1, -1, -1):
            if self.lmld[i] not in seen:
                roots.append(i)
                seen.add(self.lmld[i])
        self.keyroots = sorted(roots)


def tree_edit_distance(pa: dict[int, int], pb: dict[int, int]) -> int:
    """Ordered tree edit distance with unit insert/delete/relabel costs."""
    ta, tb = _TedTree(pa), _TedTree(pb)
    la, lb = ta.lmld, tb.lmld
    n, m = ta.n, tb.n
    td = [[0] * m for _ in range(n)]

    for i in ta.keyroots:
        for j in tb.keyroots:
            ioff, joff = la[i], lb[j]
            rows, cols = i - ioff + 2, j - joff + 2
            fd = [[0] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, cols):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, rows):
                for y in range(1, cols):
                    ai, bj = x + ioff - 1, y + joff - 1
                    if la[ai] == ioff and lb[bj] == joff:
                        rel = 0 if ta.labels[ai] == tb.labels[bj] else 1
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[x - 1][y - 1] + rel,
                        )
                        td[ai][bj] = fd[x][y]
                    else:
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[la[ai] - ioff][lb[bj] - joff] + td[ai][bj],
                        )
    return td[n - 1][m - 1]


def steds(pred, gold) -> float:
    """1 - TED(pred, gold) / (|pred| + |gold|); 1.0 for identical trees."""
    p, g = _parent_map(pred), _parent_map(gold)
    if set(p) != set(g):
        raise IdMismatch("predicted and gold trees cover different block ids")
    size = (len(p) + 1) + (len(g) + 1)  # ROOT included
    ted = tree_edit_distance(p, g)
    return 1.0 - ted / size


# ---------------------------------------------------------------------------
# retrieval


@dataclass
class RelevanceJudgment:
    query_id: str
    relevant_chunk_ids: set[str]


@dataclass
class RetrievalReport:
    k: int
    precision: float
    recall: float
    ndcg: float
    n_queries: int
    n_skipped: int
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)


def retrieval_metrics(
    rankings: dict[str, list[str]],
    judgments: dict[str, set[str]],
    k: int,
) -> RetrievalReport:
    """Macro-averaged P@k, R@k, nDCG@k with binary gains.

    Queries whose relevant set is empty are skipped and counted.
    """
    per_query: dict[str, dict[str, float]] = {}
    skipped = 0
    for qid, rel in judgments.items():
        if not rel:
            skipped += 1
            continue
        top = rankings.get(qid, [])[:k]
        hits = [1.0 if c in rel else 0.0 for c in top]
        p = sum(hits) / k
        r = sum(hits) / len(rel)
        dcg = sum(h / math.log2(i + 2) for i, h in enumerate(hits))
        ideal = sum(1.0 / math.log2(i + 2) for i in range(min(len(rel), k)))
        ndcg = dcg / ideal if ideal > 0 else 0.0
        per_query[qid] = {"precision": p, "recall": r, "ndcg": ndcg}
    n = len(per_query)
    if n == 0:
        return RetrievalReport(k, 0.0, 0.0, 0.0, 0, skipped)
    return RetrievalReport(
        k=k,
        precision=sum(q["precision"] for q in per_query.values()) / n,
        recall=sum(q["recall"] for q in per_query.values()) / n,
        ndcg=sum(q["ndcg"] for q in per_query.values()) / n,
        n_queries=n,
        n_skipped=skipped,
        per_query=per_query,
    )


# ---------------------------------------------------------------------------
# answer scoring

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def normalize_answer(s: str) -> str:
    """Lowercase, strip ASCII punctuation, collapse whitespace."""
    return re.sub(r"\s+", " ", s.lower().translate(_PUNCT_TABLE)).strip()


def levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def anls(pred: str, golds: list[str], threshold: float = 0.5) -> float:
    """Max normalized Levenshtein similarity over golds, floored at the threshold."""
    np_ = normalize_answer(pred)
    best = 0.0
    for g in golds:
        ng = normalize_answer(g)
        denom = max(len(np_), len(ng))
        if denom == 0:
            sim = 1.0
        else:
            sim = 1.0 - levenshtein(np_, ng) / denom
        best = max(best, sim)
    return best if best >= threshold else 0.0


def _lcs(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pred: str, gold: str) -> float:
    """LCS-based F1 over whitespace tokens."""
    pt, gt = pred.split(), gold.split()
    if not pt or not gt:
        return 0.0
    lcs = _lcs(pt, gt)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(pt), lcs / len(gt)
    return 2 * p * r / (p + r)


def resolve_judgments(
    raw: list[dict],
    chunk_texts: dict[str, str],
) -> tuple[dict[str, set[str]], int]:
    """Turn judgment records into relevant chunk sets.

    Records carry either explicit ``relevant_chunk_ids`` or ``answer_spans``;
    for spans, a chunk is relevant when its normalized text contains the
    normalized span. Returns (judgments, n_span_queries).
    """
    out: dict[str, set[str]] = {}
    n_span = 0
    norm_cache = {cid: normalize_answer(t) for cid, t in chunk_texts.items()}
    for rec in raw:
        qid = rec["query_id"]
        if "relevant_chunk_ids" in rec:
            out[qid] = set(rec["relevant_chunk_ids"])
        else:
            n_span += 1
            rel = set()
            for span in rec.get("answer_spans", []):
                ns = normalize_answer(span)
                if not ns:
                    continue
                for cid, nt in norm_cache.items():
                    if ns in nt:
                        rel.add(cid)
            out[qid] = rel
    return out, n_span
