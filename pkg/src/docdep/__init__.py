"""Dependency-tree recovery and structure-aware chunking for multi-page documents."""

__version__ = "0.1.0"

from .blocks import (
    ROOT,
    Block,
    BlockType,
    Document,
    RawDetection,
    build_canvas,
    normalize_type,
    shared_det_filter,
)
from .chunking import (
    Chunk,
    ChunkKind,
    SerializedChunk,
    bind_visuals,
    chunk_document,
    dfs_chunk,
    length_chunks,
    section_roots,
    serialize_chunk,
)
from .metrics import anls, parent_f1, retrieval_metrics, rouge_l, steds
from .parsing import (
    CandidateSet,
    DependencyTree,
    HeadParams,
    TrainConfig,
    build_candidates,
    child_softmax,
    decode_argmax,
    decode_mst,
    loss_and_grad,
    score_document,
    train,
)
from .retrieval import ChunkIndex, bm25_search, build_index, dense_search
from .softroi import BlockEmbedding, TokenGrid, TypeEmbeddingTable, embed_block, embed_document, roi_weights
from .synth import SynthConfig, generate_corpus
