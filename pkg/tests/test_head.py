import numpy as np
import pytest
from mpmath import mp, mpf

from docdep.blocks import ROOT, Block, BlockType, Document
from docdep.errors import DimMismatch, NotACandidate
from docdep.parsing import (
    CandidateSet,
    HeadParams,
    build_candidates,
    child_softmax,
    edge_score,
    hidden,
    loss_and_grad,
    score_document,
)
from docdep.softroi import BlockEmbedding
from docdep.synth import SynthConfig, generate_corpus


def tiny_params(embed_dim=4, type_dim=3, hidden_dim=5, seed=0):
    return HeadParams.init(embed_dim, type_dim, hidden_dim, seed)


def synth_batch(seed=0, n_docs=2, dim=8):
    docs = generate_corpus(SynthConfig(seed=seed, n_docs=n_docs, embedding_dim=dim))
    out = []
    for sd in docs:
        from docdep.softroi import embed_document

        table = HeadParams.init(dim, 4, 6, seed=1).table
        out.append((sd.document, embed_document(sd.document, sd.grids, 1.0, table), sd.gold))
    return out


class TestHidden:
    def test_zero_weights_give_bias(self):
        p = tiny_params()
        p.W1[:] = 0
        p.W2[:] = 0
        p.b2[:] = 7.0
        assert np.allclose(hidden(np.ones(7), p), 7.0)

    def test_dual_implementation_oracle(self):
        p = tiny_params(seed=3)
        x = np.random.default_rng(0).normal(size=7)
        # spelled out with explicit loops
        z = [max(sum(p.W1[i, j] * x[j] for j in range(7)) + p.b1[i], 0.0) for i in range(5)]
        h = [sum(p.W2[i, k] * z[k] for k in range(5)) + p.b2[i] for i in range(5)]
        assert np.allclose(hidden(x, p), h, atol=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            hidden(np.ones(3), tiny_params())


class TestChildSoftmax:
    def test_equal_scores_uniform(self):
        assert np.allclose(child_softmax([2.0, 2.0, 2.0, 2.0]), 0.25)

    def test_overflow_safe(self):
        p = child_softmax([1e4, 1e4 - 1.0])
        assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0)

    def test_high_precision_oracle(self):
        scores = [0.5, 1.5, -1.0]
        mp.dps = 50
        es = [mp.e ** mpf(s) for s in scores]
        tot = sum(es)
        expected = [float(e / tot) for e in es]
        assert np.allclose(child_softmax(scores), expected, atol=1e-15)

    def test_shift_invariance(self):
        s = np.array([0.3, -2.0, 5.1, 0.0])
        assert np.allclose(child_softmax(s), child_softmax(s + 123.456), atol=1e-12)


class TestEdgeScore:
    def test_bilinear_expansion(self):
        p = tiny_params(hidden_dim=2)
        h = {0: np.array([1.0, 2.0]), 1: np.array([-1.0, 0.5])}
        geo = np.arange(8, dtype=float) / 10
        au = np.array([1.0, 2.0, 1.0])
        av = np.array([-1.0, 0.5, 1.0])
        expected = float(au @ p.U @ av + p.w_geo @ geo)
        assert edge_score(0, 1, h, geo, p) == pytest.approx(expected, abs=1e-12)

    def test_corner_entry_is_constant_offset(self):
        p = tiny_params(hidden_dim=2)
        h = {0: np.zeros(2), 1: np.zeros(2)}
        # with zero hidden vectors only the bias-bias corner survives
        assert edge_score(0, 1, h, np.zeros(8), p) == pytest.approx(float(p.U[-1, -1]))

    def test_root_score_linear(self):
        p = tiny_params(hidden_dim=3)
        hv = np.array([0.2, -1.0, 3.0])
        assert edge_score(ROOT, 1, {1: hv}, None, p) == pytest.approx(float(p.r @ hv + p.b_r))

    def test_not_a_candidate(self):
        cs = CandidateSet(child=2, candidates=[0])
        with pytest.raises(NotACandidate):
            edge_score(1, 2, {1: np.zeros(2), 2: np.zeros(2)}, None, tiny_params(hidden_dim=2), cs)


class TestLoss:
    def test_uniform_scores_give_log_n(self):
        # one child, 3 candidates (2 blocks + ROOT), all scores forced equal by zero params
        batch = synth_batch(n_docs=1)
        doc, emb, gold = batch[0]
        p = HeadParams.init(8, 4, 6, seed=1)
        for arr in p.named().values():
            arr[...] = 0.0
        cand_fn = lambda d: build_candidates(d)
        loss, _, stats = loss_and_grad([(doc, emb, gold)], p, cand_fn)
        # every child's distribution is uniform over its own candidate count
        sizes = [len(cs.candidates) for cs in cand_fn(doc) if gold[cs.child] in cs.candidates]
        assert loss == pytest.approx(float(np.mean([np.log(n) for n in sizes])), abs=1e-12)
        assert stats.n_retained == len(sizes)

    def test_gold_coverage_counts(self):
        batch = synth_batch(n_docs=3)
        p = HeadParams.init(8, 4, 6, seed=1)
        _, _, stats = loss_and_grad(batch, p, lambda d: build_candidates(d))
        assert stats.n_children == stats.n_retained + stats.n_gold_pruned
        assert 0.0 < stats.gold_coverage <= 1.0

    def test_finite_difference_gradients(self):
        # >= 20 randomly chosen components of every tensor vs central differences
        batch = synth_batch(seed=5, n_docs=2)
        p = HeadParams.init(8, 4, 6, seed=2)
        cand_fn = lambda d: build_candidates(d)
        _, grads, _ = loss_and_grad(batch, p, cand_fn)
        rng = np.random.default_rng(0)
        eps = 1e-6
        checked = 0
        for name, tensor in p.named().items():
            flat = tensor.reshape(-1)
            gflat = getattr(grads, name).reshape(-1)
            picks = rng.choice(flat.size, size=min(4, flat.size), replace=False)
            for idx in picks:
                orig = flat[idx]
                flat[idx] = orig + eps
                lp, _, _ = loss_and_grad(batch, p, cand_fn)
                flat[idx] = orig - eps
                lm, _, _ = loss_and_grad(batch, p, cand_fn)
                flat[idx] = orig
                fd = (lp - lm) / (2 * eps)
                assert gflat[idx] == pytest.approx(fd, abs=1e-6, rel=1e-4), f"{name}[{idx}]"
                checked += 1
        assert checked >= 20

    def test_dropout_zero_matches_no_dropout(self):
        batch = synth_batch(n_docs=1)
        p = HeadParams.init(8, 4, 6, seed=1)
        l0, _, _ = loss_and_grad(batch, p, lambda d: build_candidates(d))
        l1, _, _ = loss_and_grad(batch, p, lambda d: build_candidates(d), dropout=0.0,
                                 rng=np.random.default_rng(0))
        assert l0 == l1


class TestScoreDocument:
    def test_matches_edge_score(self):
        batch = synth_batch(n_docs=1)
        doc, emb, _ = batch[0]
        p = HeadParams.init(8, 4, 6, seed=1)
        cand_sets = build_candidates(doc)
        scored = score_document(doc, emb, cand_sets, p)
        from docdep.parsing.candidates import geo_features
        from docdep.parsing.head import _DocForward

        fwd = _DocForward(doc, emb, cand_sets, p, 3)
        h = {b.id: fwd.H[b.id] for b in doc.blocks}
        for sc in scored:
            for j, u in enumerate(sc.candidates):
                geo = None if u == ROOT else geo_features(doc.blocks[u], doc.blocks[sc.child], 3)
                assert sc.scores[j] == pytest.approx(edge_score(u, sc.child, h, geo, p), abs=1e-10)


def test_checkpoint_round_trip(tmp_path):
    p = HeadParams.init(8, 4, 6, seed=9)
    path = str(tmp_path / "head.json")
    p.save(path)
    q = HeadParams.load(path)
    for name, arr in p.named().items():
        assert np.array_equal(arr, getattr(q, name)), name
