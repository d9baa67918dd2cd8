from .candidates import CandidateSet, build_candidates, geo_features, horizontal_overlap_fraction
from .decode import (
    DependencyTree,
    ValidityReport,
    argmax_as_tree,
    decode_argmax,
    decode_mst,
    total_score,
)
from .head import (
    HeadParams,
    ScoredCandidates,
    child_softmax,
    edge_score,
    hidden,
    loss_and_grad,
    score_document,
)
from .trainer import Adam, EpochLog, TrainConfig, parent_accuracy, train

__all__ = [
    "CandidateSet",
    "build_candidates",
    "geo_features",
    "horizontal_overlap_fraction",
    "DependencyTree",
    "ValidityReport",
    "argmax_as_tree",
    "decode_argmax",
    "decode_mst",
    "total_score",
    "HeadParams",
    "ScoredCandidates",
    "child_softmax",
    "edge_score",
    "hidden",
    "loss_and_grad",
    "score_document",
    "Adam",
    "EpochLog",
    "TrainConfig",
    "parent_accuracy",
    "train",
]
