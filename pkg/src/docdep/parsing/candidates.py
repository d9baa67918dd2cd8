"""Parent-candidate construction and pairwise geometric features."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..blocks import ROOT, Block, BlockType, Document, HEADER_TYPES

N_GEO_FEATURES = 8

# priority bonus for header-like parents; --no-header-prior zeroes these
DEFAULT_HEADER_BONUS = {
    BlockType.TITLE: 2.0,
    BlockType.SECTION_HEADER: 1.0,
    BlockType.CAPTION: 0.5,
}

_WEAK_PARENTS = {BlockType.PARAGRAPH, BlockType.LIST_ITEM, BlockType.OTHER}


@dataclass
class CandidateSet:
    child: int
    candidates: list[int] = field(default_factory=list)  # block ids, ROOT appended last

    def __post_init__(self):
        if ROOT not in self.candidates:
            self.candidates = list(self.candidates) + [ROOT]


def _center(b: Block) -> tuple[float, float]:
    return ((b.bbox[0] + b.bbox[2]) / 2.0, (b.bbox[1] + b.bbox[3]) / 2.0)


def horizontal_overlap_fraction(u: Block, v: Block) -> float:
    """Overlap of the x-extents relative to the narrower block, in [0, 1]."""
    lo = max(u.bbox[0], v.bbox[0])
    hi = min(u.bbox[2], v.bbox[2])
    if hi <= lo:
        return 0.0
    wu = u.bbox[2] - u.bbox[0]
    wv = v.bbox[2] - v.bbox[0]
    return min(1.0, (hi - lo) / min(wu, wv))


def geo_features(u: Block, v: Block, m_pages: int) -> np.ndarray:
    """8-vector of pairwise geometry for a candidate edge u -> v (u = parent)."""
    cu, cv = _center(u), _center(v)
    wu, hu = u.bbox[2] - u.bbox[0], u.bbox[3] - u.bbox[1]
    wv, hv = v.bbox[2] - v.bbox[0], v.bbox[3] - v.bbox[1]
    m = max(m_pages, 1)
    page_dist = float(np.clip(v.page - u.page, -m, m)) / m
    return np.array(
        [
            cv[0] - cu[0],
            cv[1] - cu[1],
            math.log(wu / wv),
            math.log(hu / hv),
            page_dist,
            1.0 if u.page == v.page else 0.0,
            horizontal_overlap_fraction(u, v),
            1.0 if u.id < v.id else 0.0,
        ]
    )


def build_candidates(
    doc: Document,
    k: int = 16,
    m_pages: int = 3,
    y_tol: float = 0.05,
    header_bonus: dict[BlockType, float] | None = None,
) -> list[CandidateSet]:
    """Per-child top-k parent candidates plus ROOT.

    Pool: reading-order predecessors within the last ``m_pages`` pages.
    Same-page non-header parents must start no lower than ``y_tol`` below the
    child and overlap it horizontally (column proxy). Weak block types never
    parent headers. Ranking: header bonus minus page+vertical distance.
    ``m_pages=0`` disables cross-page edges entirely.
    """
    if header_bonus is None:
        header_bonus = DEFAULT_HEADER_BONUS
    out = []
    for v in doc.blocks:
        scored: list[tuple[float, int]] = []
        for u in doc.blocks[: v.id]:
            if v.page - u.page > m_pages:
                continue
            if u.page == v.page and u.type not in HEADER_TYPES:
                if u.bbox[1] > v.bbox[1] + y_tol:
                    continue
                if horizontal_overlap_fraction(u, v) <= 0.0:
                    continue
            if u.type in _WEAK_PARENTS and v.type in HEADER_TYPES:
                continue
            dist = abs(u.page - v.page) + abs(u.bbox[1] - v.bbox[1])
            prio = header_bonus.get(u.type, 0.0) - dist
            scored.append((prio, u.id))
        # highest priority first; equal priorities keep the lower id first
        scored.sort(key=lambda t: (-t[0], t[1]))
        out.append(CandidateSet(child=v.id, candidates=[i for _, i in scored[:k]]))
    return out
