"""Adam training loop for the edge-scoring head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..blocks import Document
from ..errors import Diverged
from ..softroi import BlockEmbedding
from .head import HeadParams, loss_and_grad, score_document


@dataclass
class TrainConfig:
    seed: int = 0
    lr: float = 3e-5
    epochs: int = 5
    batch_size: int = 8
    weight_decay: float = 1e-4
    dropout: float = 0.1
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    val_fraction: float = 0.1
    hidden: int = 64
    type_dim: int = 16


@dataclass
class EpochLog:
    epoch: int
    loss: float
    val_accuracy: float


TrainingDoc = tuple[Document, list[BlockEmbedding], dict[int, int]]  # doc, embeddings, gold parents


class Adam:
    """Adaptive moment estimation with bias correction and decoupled weight decay."""

    def __init__(self, params: HeadParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def step(self, params: HeadParams, grads: HeadParams) -> None:
        self.t += 1
        b1, b2 = self.cfg.betas
        for name, p in params.named().items():
            g = getattr(grads, name)
            m = getattr(self.m, name)
            v = getattr(self.v, name)
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            p -= self.cfg.lr * (mhat / (np.sqrt(vhat) + self.cfg.eps) + self.cfg.weight_decay * p)


def parent_accuracy(
    docs: list[TrainingDoc],
    params: HeadParams,
    cand_fn,
    m_pages: int,
) -> float:
    """Fraction of children whose top-scoring candidate equals the gold parent."""
    correct = total = 0
    for doc, embeddings, gold in docs:
        for sc in score_document(doc, embeddings, cand_fn(doc), params, m_pages):
            total += 1
            best = int(np.argmax(sc.scores))
            # ties toward the smaller candidate id
            top = min(c for c, s in zip(sc.candidates, sc.scores) if s == sc.scores[best])
            if top == gold[sc.child]:
                correct += 1
    return correct / total if total else 1.0


def train(
    corpus: list[TrainingDoc],
    config: TrainConfig,
    cand_fn,
    m_pages: int = 3,
    init_params: HeadParams | None = None,
    log: list[EpochLog] | None = None,
) -> HeadParams:
    """Train the head; returns the params with the best held-out parent accuracy.

    Deterministic given the seed: shuffling, dropout masks, and init all come
    from one seeded generator chain.
    """
    if not corpus:
        raise ValueError("empty training corpus")
    embed_dim = len(corpus[0][1][0].e) if corpus[0][1] else 0
    params = (
        init_params.copy()
        if init_params is not None
        else HeadParams.init(embed_dim, type_dim=config.type_dim, hidden=config.hidden, seed=config.seed)
    )
    n_val = max(1, int(round(len(corpus) * config.val_fraction))) if len(corpus) > 1 else 0
    val = corpus[:n_val]
    trainset = corpus[n_val:] or corpus

    best = params.copy()
    best_acc = parent_accuracy(val, params, cand_fn, m_pages) if val else 0.0
    opt = Adam(params, config)
    rng = np.random.default_rng(config.seed + 1)

    for epoch in range(config.epochs):
        order = rng.permutation(len(trainset))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [trainset[i] for i in order[start : start + config.batch_size]]
            loss, grads, _ = loss_and_grad(
                batch, params, cand_fn, m_pages, dropout=config.dropout, rng=rng
            )
            if not np.isfinite(loss):
                raise Diverged(f"non-finite loss at epoch {epoch}")
            opt.step(params, grads)
            epoch_loss += loss
            n_batches += 1
        acc = parent_accuracy(val, params, cand_fn, m_pages) if val else 0.0
        if log is not None:
            log.append(EpochLog(epoch=epoch, loss=epoch_loss / max(n_batches, 1), val_accuracy=acc))
        if not val or acc >= best_acc:
            best_acc = acc
            best = params.copy()
    return best
