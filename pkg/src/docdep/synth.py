"""Seeded synthetic corpora with known hierarchy and a planted embedding signal.

Each document is a title, a handful of sections (header + paragraphs, with
occasional figure+caption pairs) laid out top-to-bottom across pages, so
section subtrees regularly cross page boundaries. Token vectors carry a
planted signal: the first half encodes the owning block's identity, the
second half its gold parent's identity, scaled by ``signal_strength`` and
mixed with seeded noise. Parent identity is therefore recoverable from
pooled embeddings, which gives the trainer and the end-to-end acceptance
experiment a desk-scale ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import ROOT, Block, BlockType, Document
from .errors import ConfigInvalid
from .softroi import TokenGrid


@dataclass
class SynthConfig:
    seed: int = 0
    n_docs: int = 10
    pages_per_doc: tuple[int, int] = (2, 4)
    sections_per_doc: tuple[int, int] = (2, 4)
    blocks_per_section: tuple[int, int] = (2, 5)
    figure_rate: float = 0.25
    embedding_dim: int = 16  # even: [own identity; parent identity]
    signal_strength: float = 0.8
    grid_size: int = 16
    questions_per_doc: int = 2
    blocks_per_page: int = 5  # vertical capacity; lower values raise cross-page rate
    expected_cross_page_rate: float = 0.45  # empirical for the default layout

    def validate(self) -> None:
        for name, (lo, hi) in (
            ("pages_per_doc", self.pages_per_doc),
            ("sections_per_doc", self.sections_per_doc),
            ("blocks_per_section", self.blocks_per_section),
        ):
            if lo < 1 or hi < lo:
                raise ConfigInvalid(f"{name} range {lo, hi} is empty")
        if not (0.0 <= self.figure_rate <= 1.0):
            raise ConfigInvalid("figure_rate outside [0,1]")
        if not (0.0 < self.signal_strength <= 1.0):
            raise ConfigInvalid("signal_strength outside (0,1]")
        if self.embedding_dim % 2 or self.embedding_dim < 2:
            raise ConfigInvalid("embedding_dim must be even and >= 2")
        if self.n_docs < 1 or self.grid_size < 2 or self.blocks_per_page < 1:
            raise ConfigInvalid("n_docs, grid_size, blocks_per_page out of range")


@dataclass
class SynthDoc:
    document: Document
    grids: list[TokenGrid]
    gold: dict[int, int]
    queries: list[dict] = field(default_factory=list)  # {query_id, text}
    judgments: list[dict] = field(default_factory=list)  # {query_id, answer_spans}


def _words(rng: np.random.Generator, n: int) -> str:
    return " ".join(f"w{int(i)}" for i in rng.integers(0, 400, size=n))


def _root_identity(d: int) -> np.ndarray:
    return np.ones(d) / np.sqrt(d)


def generate_document(cfg: SynthConfig, doc_index: int, rng: np.random.Generator) -> SynthDoc:
    doc_id = f"synth{cfg.seed}-{doc_index}"
    n_sections = int(rng.integers(cfg.sections_per_doc[0], cfg.sections_per_doc[1] + 1))

    # plan blocks in reading order: (type, parent slot index)
    plan: list[tuple[BlockType, int]] = [(BlockType.TITLE, -1)]  # parent slot -1 = ROOT
    for _ in range(n_sections):
        header_slot = len(plan)
        plan.append((BlockType.SECTION_HEADER, 0))
        n_body = int(rng.integers(cfg.blocks_per_section[0], cfg.blocks_per_section[1] + 1))
        for _ in range(n_body):
            if rng.random() < cfg.figure_rate:
                fig_slot = len(plan)
                plan.append((BlockType.FIGURE, header_slot))
                plan.append((BlockType.CAPTION, fig_slot))
            else:
                plan.append((BlockType.PARAGRAPH, header_slot))

    # vertical layout across pages
    row_h = 0.9 / cfg.blocks_per_page
    blocks: list[Block] = []
    page, row = 1, 0
    for slot, (btype, _) in enumerate(plan):
        if row >= cfg.blocks_per_page:
            page += 1
            row = 0
        y0 = 0.05 + row * row_h
        y1 = y0 + row_h * 0.8
        if btype in (BlockType.TITLE, BlockType.SECTION_HEADER):
            x0, x1 = 0.15, 0.85
        elif btype is BlockType.CAPTION:
            x0, x1 = 0.2, 0.8
        else:
            x0, x1 = 0.1, 0.9
        if btype is BlockType.TITLE:
            text = f"Document {doc_id} title"
        elif btype is BlockType.SECTION_HEADER:
            text = f"Section {slot} {_words(rng, 2)}"
        elif btype is BlockType.FIGURE:
            text = ""
        elif btype is BlockType.CAPTION:
            text = f"Caption {slot} {_words(rng, int(rng.integers(4, 9)))}"
        else:
            text = _words(rng, int(rng.integers(8, 21)))
        blocks.append(Block(id=slot, page=page, bbox=(x0, y0, x1, y1), type=btype, text=text))
        row += 1

    n_pages = max(page, cfg.pages_per_doc[0])
    doc = Document(doc_id=doc_id, page_sizes=[(800.0, 1000.0)] * n_pages, blocks=blocks)
    gold = {slot: (ROOT if parent_slot < 0 else parent_slot) for slot, (_, parent_slot) in enumerate(plan)}

    # planted token grids
    d = cfg.embedding_dim // 2
    ident = rng.normal(size=(len(blocks), d))
    ident /= np.linalg.norm(ident, axis=1, keepdims=True)
    root_ident = _root_identity(d)
    s = cfg.signal_strength
    g = cfg.grid_size
    lattice = (np.arange(g) + 0.5) / g
    grids = []
    for p in range(1, n_pages + 1):
        page_blocks = [b for b in blocks if b.page == p]
        coords = np.array([(u, v) for v in lattice for u in lattice])
        vectors = (1.0 - s) * rng.normal(size=(len(coords), cfg.embedding_dim)) / np.sqrt(d)
        for b in page_blocks:
            x0, y0, x1, y1 = b.bbox
            inside = (
                (coords[:, 0] >= x0)
                & (coords[:, 0] <= x1)
                & (coords[:, 1] >= y0)
                & (coords[:, 1] <= y1)
            )
            par = root_ident if gold[b.id] == ROOT else ident[gold[b.id]]
            signal = np.concatenate([ident[b.id], par])
            vectors[inside] += s * signal
        grids.append(TokenGrid(page=p, dim=cfg.embedding_dim, coords=coords, vectors=vectors))

    # planted questions: a unique token appended to a non-header block
    queries, judgments = [], []
    candidates = [b.id for b in blocks if b.type in (BlockType.PARAGRAPH, BlockType.CAPTION)]
    n_q = min(cfg.questions_per_doc, len(candidates))
    chosen = rng.choice(len(candidates), size=n_q, replace=False) if n_q else []
    for qi, ci in enumerate(sorted(int(c) for c in np.atleast_1d(chosen))):
        bid = candidates[ci]
        token = f"qtok{cfg.seed}x{doc_index}x{qi}"
        b = blocks[bid]
        blocks[bid] = Block(
            id=b.id, page=b.page, bbox=b.bbox, type=b.type, text=(b.text + " " + token).strip(),
            confidence=b.confidence,
        )
        qid = f"{doc_id}-q{qi}"
        queries.append({"query_id": qid, "text": token})
        judgments.append({"query_id": qid, "answer_spans": [token]})
    doc.blocks = blocks

    return SynthDoc(document=doc, grids=grids, gold=gold, queries=queries, judgments=judgments)


def generate_corpus(cfg: SynthConfig) -> list[SynthDoc]:
    """Deterministic per seed; one generator chain drives every draw."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    return [generate_document(cfg, i, rng) for i in range(cfg.n_docs)]


def cross_page_edge_rate(docs: list[SynthDoc]) -> float:
    cross = total = 0
    for sd in docs:
        for child, parent in sd.gold.items():
            if parent == ROOT:
                continue
            total += 1
            if sd.document.blocks[child].page != sd.document.blocks[parent].page:
                cross += 1
    return cross / total if total else 0.0


def greedy_conflict_corpus(seed: int, n_docs: int = 8) -> list[tuple[list[tuple[int, int, float]], dict[int, int]]]:
    """Scored-edge instances where local argmax forms a figure/caption 2-cycle.

    Candidate sets here include a forward caption->figure edge (closely
    related blocks may be linked in either direction), so per-child argmax
    picks the mutual pair and breaks the tree; the arborescence decoder must
    fall back to the globally consistent attachment.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_docs):
        base = float(rng.uniform(1.0, 2.0))
        # blocks: 0 header, 1 figure, 2 caption
        gold = {0: ROOT, 1: 0, 2: 1}
        scored = [
            (0, ROOT, base + 2.0),
            (1, ROOT, base - 1.0),
            (1, 0, base + 0.5),
            (1, 2, base + 1.5),  # forward edge: caption as parent of figure
            (2, ROOT, base - 1.0),
            (2, 0, base + 0.2),
            (2, 1, base + 2.0),
        ]
        out.append((scored, gold))
    return out
