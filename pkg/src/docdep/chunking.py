"""Tree-guided chunking: section anchors, buffer splitting, visual-caption binding.

A decoded dependency tree is converted deterministically into retrieval
chunks: DFS from each section anchor accumulates block texts into a buffer
that is flushed at block boundaries before the token budget is exceeded;
figure/table blocks and their captions are pulled into dedicated visual
chunks; each chunk carries its section path and page span.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, TextIO

from .blocks import ROOT, Block, BlockType, Document, HEADER_TYPES, VISUAL_TYPES
from .parsing.decode import DependencyTree

PREAMBLE = -2  # synthetic anchor for blocks governed by no header
_PATH_TEXT_LIMIT = 120


class ChunkKind(str, Enum):
    TEXT = "Text"
    VISUAL_WITH_CAPTION = "VisualWithCaption"


@dataclass
class Chunk:
    chunk_id: str
    block_ids: list[int]
    section_path: list[tuple[BlockType, str]]
    page_span: tuple[int, int]
    kind: ChunkKind = ChunkKind.TEXT


@dataclass
class SerializedChunk:
    chunk_id: str
    text: str
    token_count: int


def count_tokens(text: str) -> int:
    return len(text.split())


def _header_chain(tree: DependencyTree, doc: Document, block_id: int) -> list[int]:
    """Header ancestors of a block (including itself), root-first."""
    chain = []
    node = block_id
    while node != ROOT:
        if doc.blocks[node].type in HEADER_TYPES:
            chain.append(node)
        node = tree.parent[node]
    return list(reversed(chain))


def section_roots(tree: DependencyTree, doc: Document) -> list[int]:
    """Section anchors in reading order; PREAMBLE stands in for headerless content."""
    anchors = [b.id for b in doc.blocks if b.type in HEADER_TYPES]
    has_preamble = any(
        not _header_chain(tree, doc, b.id) for b in doc.blocks if b.type not in HEADER_TYPES
    )
    out = sorted(anchors)
    if has_preamble:
        out = [PREAMBLE] + out
    return out


def _path_pairs(doc: Document, path_ids: list[int]) -> list[tuple[BlockType, str]]:
    return [(doc.blocks[i].type, doc.blocks[i].text[:_PATH_TEXT_LIMIT]) for i in path_ids]


def _body_tokens(b: Block) -> int:
    if b.type in HEADER_TYPES:
        return 0  # headers render through the section path
    n = count_tokens(b.text)
    if b.type in VISUAL_TYPES:
        n += 1  # marker line
    return n


def _path_overhead(doc: Document, path_ids: list[int]) -> int:
    # "#"*depth counts as one token per line, plus the header text tokens,
    # plus the two tokens of the pages line
    return sum(1 + count_tokens(doc.blocks[i].text[:_PATH_TEXT_LIMIT]) for i in path_ids) + 2


def _page_span(doc: Document, ids: list[int]) -> tuple[int, int]:
    pages = [doc.blocks[i].page for i in ids]
    return (min(pages), max(pages))


def dfs_chunk(tree: DependencyTree, doc: Document, max_len: int = 550) -> list[Chunk]:
    """Depth-first buffer chunking; chunk ids are assigned later by finalize_chunks."""
    if not doc.blocks:
        return []
    kids = tree.children()
    anchor_of: dict[int, int] = {}
    path_of: dict[int, list[int]] = {}
    for b in doc.blocks:
        chain = _header_chain(tree, doc, b.id)
        path_of[b.id] = chain
        anchor_of[b.id] = chain[-1] if chain else PREAMBLE

    order: list[int] = []

    def visit(node: int) -> None:
        if node != ROOT:
            order.append(node)
        for c in kids.get(node, []):
            visit(c)

    visit(ROOT)

    chunks: list[Chunk] = []
    cur: list[int] = []
    cur_tokens = 0
    cur_anchor: int | None = None
    cur_path: list[int] = []

    def flush() -> None:
        nonlocal cur, cur_tokens
        if cur:
            ids = sorted(cur)
            chunks.append(
                Chunk(
                    chunk_id="",
                    block_ids=ids,
                    section_path=_path_pairs(doc, cur_path),
                    page_span=_page_span(doc, ids),
                )
            )
        cur = []
        cur_tokens = 0

    for bid in order:
        b = doc.blocks[bid]
        t = _body_tokens(b)
        anchor = anchor_of[bid]
        if cur and anchor != cur_anchor:
            flush()
        if cur and cur_tokens + t > max_len - _path_overhead(doc, cur_path):
            flush()
        if not cur:
            cur_anchor = anchor
            cur_path = path_of[bid]
        cur.append(bid)
        cur_tokens += t
    flush()
    return chunks


def _tree_linked_caption(tree: DependencyTree, doc: Document, visual: int) -> int | None:
    parent = tree.parent[visual]
    if parent != ROOT and doc.blocks[parent].type is BlockType.CAPTION:
        return parent
    children = [c for c, p in tree.parent.items() if p == visual and doc.blocks[c].type is BlockType.CAPTION]
    return min(children) if children else None


def bind_visuals(tree: DependencyTree, doc: Document, chunks: list[Chunk]) -> list[Chunk]:
    """Pull each figure/table (plus its caption) into a dedicated visual chunk.

    Captions come from a tree edge in either direction; otherwise the nearest
    unbound same-page caption by center distance, greedily in ascending
    distance with ties toward lower ids.
    """
    visuals = [b.id for b in doc.blocks if b.type in VISUAL_TYPES]
    if not visuals:
        return chunks
    bound_caption: dict[int, int | None] = {}
    taken: set[int] = set()
    for vid in visuals:
        cap = _tree_linked_caption(tree, doc, vid)
        if cap is not None and cap not in taken:
            bound_caption[vid] = cap
            taken.add(cap)
        else:
            bound_caption[vid] = None

    # spatial fallback for visuals with no tree-linked caption
    def center(b: Block) -> tuple[float, float]:
        return ((b.bbox[0] + b.bbox[2]) / 2.0, (b.bbox[1] + b.bbox[3]) / 2.0)

    free_caps = [
        b.id for b in doc.blocks if b.type is BlockType.CAPTION and b.id not in taken
    ]
    pending = [v for v in visuals if bound_caption[v] is None]
    pairs = []
    for vid in pending:
        vb = doc.blocks[vid]
        for cid in free_caps:
            cb = doc.blocks[cid]
            if cb.page != vb.page:
                continue
            (vx, vy), (cx, cy) = center(vb), center(cb)
            d = ((vx - cx) ** 2 + (vy - cy) ** 2) ** 0.5
            pairs.append((d, vid, cid))
    pairs.sort()
    used_v: set[int] = set()
    for _, vid, cid in pairs:
        if vid in used_v or cid in taken:
            continue
        bound_caption[vid] = cid
        taken.add(cid)
        used_v.add(vid)

    moved = set(visuals) | {c for c in bound_caption.values() if c is not None}
    out: list[Chunk] = []
    for ch in chunks:
        rest = [i for i in ch.block_ids if i not in moved]
        if rest:
            out.append(
                Chunk(
                    chunk_id="",
                    block_ids=rest,
                    section_path=ch.section_path,
                    page_span=_page_span(doc, rest),
                    kind=ch.kind,
                )
            )
    for vid in visuals:
        ids = sorted([vid] + ([bound_caption[vid]] if bound_caption[vid] is not None else []))
        chain = _header_chain(tree, doc, vid)
        out.append(
            Chunk(
                chunk_id="",
                block_ids=ids,
                section_path=_path_pairs(doc, chain),
                page_span=_page_span(doc, ids),
                kind=ChunkKind.VISUAL_WITH_CAPTION,
            )
        )
    out.sort(key=lambda c: c.block_ids[0])
    return out


def finalize_chunks(doc: Document, chunks: list[Chunk]) -> list[Chunk]:
    """Assign doc-scoped ordinal chunk ids."""
    for i, ch in enumerate(chunks):
        ch.chunk_id = f"{doc.doc_id}#{i}"
    return chunks


def chunk_document(
    tree: DependencyTree,
    doc: Document,
    max_len: int = 550,
) -> list[Chunk]:
    return finalize_chunks(doc, bind_visuals(tree, doc, dfs_chunk(tree, doc, max_len)))


_MARKERS = {BlockType.FIGURE: "[figure]", BlockType.TABLE: "[table]"}


def serialize_chunk(chunk: Chunk, doc: Document, include_metadata: bool = True) -> SerializedChunk:
    lines: list[str] = []
    if include_metadata:
        for depth, (_, text) in enumerate(chunk.section_path, start=1):
            lines.append("#" * depth + " " + text)
        p0, p1 = chunk.page_span
        lines.append(f"pages: {p0}" if p0 == p1 else f"pages: {p0}-{p1}")

    members = [doc.blocks[i] for i in chunk.block_ids]
    if chunk.kind is ChunkKind.VISUAL_WITH_CAPTION:
        members = sorted(members, key=lambda b: (b.type is BlockType.CAPTION, b.id))
    for b in members:
        if b.type in HEADER_TYPES:
            # a header member is its chunk's anchor: shown as a path line when
            # metadata is on, as a plain body line under the fairness control
            if not include_metadata and b.text:
                lines.append(b.text)
            continue
        if b.type in _MARKERS:
            lines.append(_MARKERS[b.type])
        if b.text:
            lines.append(b.text)
    text = "\n".join(lines)
    return SerializedChunk(chunk_id=chunk.chunk_id, text=text, token_count=count_tokens(text))


def length_chunks(doc: Document, max_len: int = 550) -> list[Chunk]:
    """Structure-blind baseline: sequential blocks packed up to the token budget."""
    chunks: list[Chunk] = []
    cur: list[int] = []
    cur_tokens = 0
    for b in doc.blocks:
        t = count_tokens(b.text)
        if cur and cur_tokens + t > max_len - 2:  # pages line
            chunks.append(Chunk("", list(cur), [], _page_span(doc, cur)))
            cur, cur_tokens = [], 0
        cur.append(b.id)
        cur_tokens += t
    if cur:
        chunks.append(Chunk("", list(cur), [], _page_span(doc, cur)))
    return finalize_chunks(doc, chunks)


# ---------------------------------------------------------------------------
# chunk store I/O


def write_chunks(
    doc: Document,
    chunks: list[Chunk],
    fh: TextIO,
    include_metadata: bool = True,
) -> None:
    for ch in chunks:
        sc = serialize_chunk(ch, doc, include_metadata)
        fh.write(
            json.dumps(
                {
                    "chunk_id": ch.chunk_id,
                    "text": sc.text,
                    "token_count": sc.token_count,
                    "block_ids": ch.block_ids,
                    "section_path": [[t.value, txt] for t, txt in ch.section_path],
                    "page_span": list(ch.page_span),
                    "kind": ch.kind.value,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


def read_chunk_store(fh: TextIO) -> list[dict]:
    return [json.loads(line) for line in fh if line.strip()]
