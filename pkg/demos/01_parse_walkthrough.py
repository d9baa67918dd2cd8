"""Walkthrough: generate a tiny planted corpus, train the head, decode trees.

Run from the repo root after `pip install -e .`:

    python3 demos/01_parse_walkthrough.py

The corpus plants each block's gold parent identity into its token grid, so
a few epochs of training recover the document hierarchy almost perfectly.
"""

import numpy as np

from docdep.blocks import ROOT
from docdep.metrics import parent_f1, steds
from docdep.parsing import (
    HeadParams,
    TrainConfig,
    build_candidates,
    decode_mst,
    score_document,
    train,
)
from docdep.softroi import embed_document
from docdep.synth import SynthConfig, generate_corpus


def main():
    cfg = SynthConfig(seed=7, n_docs=60)
    docs = generate_corpus(cfg)
    table = HeadParams.init(cfg.embedding_dim, 16, 64, 0).table
    corpus = [
        (sd.document, embed_document(sd.document, sd.grids, 1.0, table), sd.gold)
        for sd in docs
    ]
    trainset, testset = corpus[:48], corpus[48:]

    cand_fn = lambda doc: build_candidates(doc)
    tcfg = TrainConfig(seed=0, lr=3e-3, epochs=5, batch_size=8, hidden=64, type_dim=16)
    print(f"training on {len(trainset)} docs ...")
    params = train(trainset, tcfg, cand_fn)

    f1s, ss = [], []
    for doc, embs, gold in testset:
        scored = score_document(doc, embs, cand_fn(doc), params)
        edges = [(s.child, c, float(w)) for s in scored for c, w in zip(s.candidates, s.scores)]
        tree = decode_mst(edges)
        f1s.append(parent_f1(tree, gold))
        ss.append(steds(tree, gold))
    print(f"held-out parent F1 = {np.mean(f1s):.3f}, STEDS = {np.mean(ss):.3f}")

    doc, embs, gold = testset[0]
    scored = score_document(doc, embs, cand_fn(doc), params)
    edges = [(s.child, c, float(w)) for s in scored for c, w in zip(s.candidates, s.scores)]
    tree = decode_mst(edges)
    print(f"\ndecoded tree for {doc.doc_id}:")
    for b in doc.blocks:
        parent = tree.parent[b.id]
        pname = "ROOT" if parent == ROOT else f"block {parent}"
        mark = "" if tree.parent[b.id] == gold[b.id] else "   <- gold: " + str(gold[b.id])
        print(f"  [{b.id:2d}] {b.type.value:14s} p{b.page} -> {pname}{mark}")


if __name__ == "__main__":
    main()
