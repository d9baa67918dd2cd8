"""Global document blocks: detection filtering and canvas construction.

Raw detector/OCR output is confidence-filtered, de-duplicated with per-page
NMS, capped per page, then mapped into a single normalized coordinate frame
shared by every downstream stage. Block ids are dense 0..N-1 in reading
order: page ascending, then y0, then x0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, TextIO

from .errors import DegenerateBox, InvalidPage

ROOT = -1  # virtual root sentinel used across the pipeline


class BlockType(str, Enum):
    TITLE = "Title"
    SECTION_HEADER = "SectionHeader"
    PARAGRAPH = "Paragraph"
    TABLE = "Table"
    FIGURE = "Figure"
    CAPTION = "Caption"
    LIST_ITEM = "ListItem"
    OTHER = "Other"


HEADER_TYPES = frozenset({BlockType.TITLE, BlockType.SECTION_HEADER})
VISUAL_TYPES = frozenset({BlockType.FIGURE, BlockType.TABLE})

_TYPE_ALIASES = {
    "title": BlockType.TITLE,
    "doc_title": BlockType.TITLE,
    "document_title": BlockType.TITLE,
    "section_header": BlockType.SECTION_HEADER,
    "section-header": BlockType.SECTION_HEADER,
    "sectionheader": BlockType.SECTION_HEADER,
    "sec-title": BlockType.SECTION_HEADER,
    "sec_title": BlockType.SECTION_HEADER,
    "heading": BlockType.SECTION_HEADER,
    "header": BlockType.SECTION_HEADER,
    "paragraph": BlockType.PARAGRAPH,
    "para": BlockType.PARAGRAPH,
    "text": BlockType.PARAGRAPH,
    "plain_text": BlockType.PARAGRAPH,
    "table": BlockType.TABLE,
    "figure": BlockType.FIGURE,
    "image": BlockType.FIGURE,
    "picture": BlockType.FIGURE,
    "chart": BlockType.FIGURE,
    "caption": BlockType.CAPTION,
    "figure_caption": BlockType.CAPTION,
    "table_caption": BlockType.CAPTION,
    "list": BlockType.LIST_ITEM,
    "list_item": BlockType.LIST_ITEM,
    "list-item": BlockType.LIST_ITEM,
    "other": BlockType.OTHER,
}


def normalize_type(type_label: str) -> BlockType:
    """Map a free-form detector label onto the block type enum (total function)."""
    return _TYPE_ALIASES.get(type_label.strip().lower(), BlockType.OTHER)


@dataclass(frozen=True)
class RawDetection:
    page: int  # 1-based
    box: tuple[float, float, float, float]  # pixel x0, y0, x1, y1
    type_label: str
    confidence: float
    text: str = ""


@dataclass(frozen=True)
class Block:
    id: int
    page: int
    bbox: tuple[float, float, float, float]  # normalized x0, y0, x1, y1
    type: BlockType
    text: str
    confidence: float = 1.0


@dataclass
class Document:
    doc_id: str
    page_sizes: list[tuple[float, float]]  # (width, height) per page, 1-based pages
    blocks: list[Block] = field(default_factory=list)

    @property
    def n_pages(self) -> int:
        return len(self.page_sizes)


def iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    """Intersection-over-union of two axis-aligned rectangles."""
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    iw, ih = max(0.0, ix1 - ix0), max(0.0, iy1 - iy0)
    inter = iw * ih
    if inter <= 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def shared_det_filter(
    dets: list[RawDetection],
    tau_det: float = 0.5,
    tau_nms: float = 0.5,
    k_max: int = 64,
) -> list[RawDetection]:
    """Confidence threshold, per-page greedy NMS, and per-page cap.

    Kept detections are returned page by page (ascending), each page sorted by
    confidence descending. Ties in confidence keep input order.
    """
    by_page: dict[int, list[RawDetection]] = {}
    for d in dets:
        if d.confidence < tau_det:
            continue
        by_page.setdefault(d.page, []).append(d)

    out: list[RawDetection] = []
    for page in sorted(by_page):
        # stable sort: equal confidences stay in input order
        ranked = sorted(by_page[page], key=lambda d: -d.confidence)
        kept: list[RawDetection] = []
        for d in ranked:
            if any(iou(d.box, k.box) > tau_nms for k in kept):
                continue
            kept.append(d)
            if len(kept) >= k_max:
                break
        out.extend(kept)
    return out


def _reading_order_key(b: Block) -> tuple[int, float, float]:
    return (b.page, b.bbox[1], b.bbox[0])


def build_canvas(doc_id: str, page_sizes: list[tuple[float, float]], dets: list[RawDetection]) -> Document:
    """Normalize filtered detections into a Document with dense reading-order ids."""
    staged: list[Block] = []
    for d in dets:
        if not (1 <= d.page <= len(page_sizes)):
            raise InvalidPage(f"detection on page {d.page}, document has {len(page_sizes)} pages")
        w, h = page_sizes[d.page - 1]
        x0, y0, x1, y1 = d.box
        bbox = (
            min(max(x0 / w, 0.0), 1.0),
            min(max(y0 / h, 0.0), 1.0),
            min(max(x1 / w, 0.0), 1.0),
            min(max(y1 / h, 0.0), 1.0),
        )
        if bbox[0] >= bbox[2] or bbox[1] >= bbox[3]:
            raise DegenerateBox(f"box {d.box} on page {d.page} collapses under page size {(w, h)}")
        staged.append(
            Block(
                id=-1,
                page=d.page,
                bbox=bbox,
                type=normalize_type(d.type_label),
                text=d.text,
                confidence=d.confidence,
            )
        )
    staged.sort(key=_reading_order_key)
    blocks = [
        Block(id=i, page=b.page, bbox=b.bbox, type=b.type, text=b.text, confidence=b.confidence)
        for i, b in enumerate(staged)
    ]
    return Document(doc_id=doc_id, page_sizes=[(float(w), float(h)) for w, h in page_sizes], blocks=blocks)


# ---------------------------------------------------------------------------
# interchange I/O


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "page_sizes": [list(p) for p in doc.page_sizes],
        "blocks": [
            {
                "id": b.id,
                "page": b.page,
                "bbox": list(b.bbox),
                "type": b.type.value,
                "text": b.text,
                "confidence": b.confidence,
            }
            for b in doc.blocks
        ],
    }


def document_from_dict(obj: dict) -> Document:
    blocks = [
        Block(
            id=int(b["id"]),
            page=int(b["page"]),
            bbox=tuple(float(v) for v in b["bbox"]),
            type=BlockType(b["type"]),
            text=b.get("text", ""),
            confidence=float(b.get("confidence", 1.0)),
        )
        for b in obj.get("blocks", [])
    ]
    return Document(
        doc_id=obj["doc_id"],
        page_sizes=[(float(w), float(h)) for w, h in obj["page_sizes"]],
        blocks=blocks,
    )


def read_detection_stream(fh: TextIO) -> tuple[str, list[tuple[float, float]], list[RawDetection]]:
    """Parse a detections file: one header line, then one RawDetection per line."""
    header = json.loads(fh.readline())
    doc_id = header["doc_id"]
    page_sizes = [(float(w), float(h)) for w, h in header["page_sizes"]]
    dets = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        dets.append(
            RawDetection(
                page=int(obj["page"]),
                box=tuple(float(v) for v in obj["box"]),
                type_label=obj["type_label"],
                confidence=float(obj["confidence"]),
                text=obj.get("text", ""),
            )
        )
    return doc_id, page_sizes, dets


def write_documents(docs: Iterable[Document], fh: TextIO) -> None:
    for doc in docs:
        fh.write(json.dumps(document_to_dict(doc), ensure_ascii=False) + "\n")


def read_documents(fh: TextIO) -> list[Document]:
    return [document_from_dict(json.loads(line)) for line in fh if line.strip()]
