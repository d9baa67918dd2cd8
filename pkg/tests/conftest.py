import numpy as np
import pytest

from docdep.parsing import HeadParams, TrainConfig, build_candidates, train
from docdep.softroi import embed_document
from docdep.synth import SynthConfig, generate_corpus

# trainer settings used for the planted-corpus experiments; desk-scale dims
# need a larger step size than the full-scale defaults
PLANTED_TRAIN = dict(lr=3e-3, epochs=5, batch_size=8, dropout=0.1, hidden=64, type_dim=16)


def default_cand_fn(m_pages=3, k=16):
    return lambda doc: build_candidates(doc, k=k, m_pages=m_pages)


@pytest.fixture(scope="session")
def planted_corpus():
    """250 planted documents pooled with the default table: 200 train / 50 test."""
    cfg = SynthConfig(seed=7, n_docs=250, signal_strength=0.8)
    docs = generate_corpus(cfg)
    table = HeadParams.init(cfg.embedding_dim, 16, 64, 0).table
    corpus = [
        (sd.document, embed_document(sd.document, sd.grids, 1.0, table), sd.gold) for sd in docs
    ]
    return docs, corpus[:200], corpus[200:]


@pytest.fixture(scope="session")
def trained_head(planted_corpus):
    _, trainset, _ = planted_corpus
    tcfg = TrainConfig(seed=0, **PLANTED_TRAIN)
    return train(trainset, tcfg, default_cand_fn(), m_pages=3)
