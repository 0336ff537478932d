import numpy as np
import pytest

from bove import synth
from bove.encoding import (
    SparsePropertyMatrix,
    SparseRelationTensor,
    from_dense,
    reconstruction_loss,
)
from bove.errors import DimensionMismatch
from bove.inference import infer_bove, infer_corpus
from bove.model import Hyperparams, TypeEmbeddings


def relation_free(n):
    """An X with no edges at all."""
    return SparseRelationTensor(d=1, n=n, rels=np.array([], dtype=np.int64),
                                heads=np.array([], dtype=np.int64),
                                deps=np.array([], dtype=np.int64))


def make_model(p, r_tensor, hyper):
    p = np.asarray(p, dtype=np.float64)
    r_tensor = np.asarray(r_tensor, dtype=np.float64)
    return TypeEmbeddings(
        P=p,
        R=r_tensor,
        frozen_p_rows=np.zeros(len(p), dtype=bool),
        hyper=hyper,
    )


class TestInferBove:
    def test_relation_free_closed_form(self):
        # with no relations every refresh returns the ridge solution, so
        # averaging is a no-op at every iteration count
        rng = np.random.default_rng(0)
        p = rng.normal(size=(5, 3))
        w, _ = from_dense(rng.normal(size=(5, 4)), np.zeros((1, 4, 4)))
        x = relation_free(4)
        hyper = Hyperparams(r=3, lambda_e=0.2)
        model = make_model(p, np.zeros((1, 3, 3)), hyper)
        expect = w.to_dense().T @ p @ np.linalg.inv(p.T @ p + 0.2 * np.eye(3))
        for iters in (1, 2, 7, 30):
            got = infer_bove(w, x, model, iters=iters)
            np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_orthonormal_p_no_ridge(self):
        # orthonormal columns and lambda_e=0: E = W^T P exactly
        q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(6, 3)))
        w, _ = from_dense(np.random.default_rng(2).normal(size=(6, 4)),
                          np.zeros((1, 4, 4)))
        hyper = Hyperparams(r=3, lambda_e=0.0)
        model = make_model(q, np.zeros((1, 3, 3)), hyper)
        got = infer_bove(w, relation_free(4), model, iters=1)
        np.testing.assert_allclose(got, w.to_dense().T @ q, atol=1e-12)

    def test_token_exchangeability(self):
        # tokens with identical rows/edges get bit-identical embeddings
        w_dense = np.zeros((4, 3))
        w_dense[1, 0] = w_dense[1, 2] = 1.0  # tokens 0 and 2 identical
        w_dense[2, 1] = 1.0
        x_dense = np.zeros((2, 3, 3))
        x_dense[0, 0, 1] = x_dense[0, 2, 1] = 1.0
        w, x = from_dense(w_dense, x_dense)
        rng = np.random.default_rng(3)
        hyper = Hyperparams(r=2)
        model = make_model(rng.normal(size=(4, 2)),
                           rng.normal(size=(2, 2, 2)) * 0.3, hyper)
        e = infer_bove(w, x, model)
        np.testing.assert_array_equal(e[0], e[2])

    def test_context_sensitivity(self):
        # same token row, different incident edges: embeddings must differ
        w_dense = np.zeros((3, 2))
        w_dense[0, 0] = w_dense[0, 1] = 1.0
        x_a = np.zeros((1, 2, 2))
        x_b = x_a.copy()
        x_b[0, 0, 1] = 1.0
        w, xa = from_dense(w_dense, x_a)
        _, xb = from_dense(w_dense, x_b)
        rng = np.random.default_rng(4)
        hyper = Hyperparams(r=2)
        model = make_model(rng.normal(size=(3, 2)),
                           rng.normal(size=(1, 2, 2)), hyper)
        ea = infer_bove(w, xa, model)
        eb = infer_bove(w, xb, model)
        assert np.max(np.abs(ea - eb)) > 1e-6

    def test_iteration_count_conventions(self):
        data = synth.generate(5, n_sentences=1, n_tokens=4, c=6, d=2, r=3,
                              mode="discrete")
        _, w, x = data.sentences[0]
        raw = data.model.hyper
        hyper_raw = Hyperparams(r=raw.r, iters_count_raw_solves=True)
        hyper_avg = Hyperparams(r=raw.r, iters_count_raw_solves=False)
        # counting raw solves: t total solves; counting averaged updates:
        # t averaged updates after the first solve, i.e. t+1 raw solves
        a = infer_bove(w, x, data.model, hyper=hyper_raw, iters=4)
        b = infer_bove(w, x, data.model, hyper=hyper_avg, iters=3)
        np.testing.assert_array_equal(a, b)

    def test_objective_monotone_after_first_average(self):
        data = synth.generate(6, n_sentences=100, n_tokens=5, c=10, d=3, r=4,
                              mode="discrete")
        model = data.model
        hyper = model.hyper
        worst = 0.0
        for _, w, x in data.sentences:
            losses = []
            for iters in range(2, 12):
                e = infer_bove(w, x, model, iters=iters)
                losses.append(reconstruction_loss(
                    w, x, model.P, model.R, e, alpha=hyper.alpha,
                    lambda_e=hyper.lambda_e, include_regularizers=True,
                ))
            worst = max(worst, max(np.diff(losses)))
        assert worst <= 1e-9

    def test_dimension_mismatch(self):
        data = synth.generate(7, n_sentences=1, n_tokens=3, c=6, d=2, r=3)
        _, w, x = data.sentences[0]
        bad_w = SparsePropertyMatrix(c=w.c + 1, n=w.n, rows=w.rows, cols=w.cols,
                                     values=w.values)
        with pytest.raises(DimensionMismatch):
            infer_bove(bad_w, x, data.model)


class TestInferCorpus:
    def test_empty(self):
        data = synth.generate(8, n_sentences=1, n_tokens=3, c=6, d=2, r=3)
        results, failures = infer_corpus([], data.model)
        assert results == [] and failures == []

    def test_identical_sentences_identical_bags(self):
        data = synth.generate(9, n_sentences=1, n_tokens=4, c=6, d=2, r=3,
                              mode="discrete")
        sid, w, x = data.sentences[0]
        results, failures = infer_corpus([("a", w, x), ("b", w, x)], data.model)
        assert failures == []
        np.testing.assert_array_equal(results[0][1], results[1][1])

    def test_order_preserved_under_permutation(self):
        data = synth.generate(10, n_sentences=5, n_tokens=4, c=8, d=2, r=3,
                              mode="discrete")
        forward, _ = infer_corpus(data.sentences, data.model)
        backward, _ = infer_corpus(data.sentences[::-1], data.model)
        assert [sid for sid, _ in forward] == [s for s, _, _ in data.sentences]
        lookup = {sid: e for sid, e in backward}
        for sid, e in forward:
            np.testing.assert_array_equal(e, lookup[sid])

    def test_failures_collected_per_sentence(self):
        data = synth.generate(11, n_sentences=2, n_tokens=3, c=6, d=2, r=3,
                              mode="discrete")
        sid, w, x = data.sentences[0]
        bad = SparsePropertyMatrix(c=w.c + 2, n=w.n, rows=w.rows, cols=w.cols,
                                   values=w.values)
        triples = [("good", w, x), ("bad", bad, x), ("good2", w, x)]
        results, failures = infer_corpus(triples, data.model)
        assert [sid for sid, _ in results] == ["good", "bad", "good2"]
        assert results[1][1] is None
        assert results[0][1] is not None and results[2][1] is not None
        assert len(failures) == 1 and failures[0][0] == "bad"
        assert isinstance(failures[0][1], DimensionMismatch)

    def test_fail_fast_raises(self):
        data = synth.generate(12, n_sentences=1, n_tokens=3, c=6, d=2, r=3)
        sid, w, x = data.sentences[0]
        bad = SparsePropertyMatrix(c=w.c + 2, n=w.n, rows=w.rows, cols=w.cols,
                                   values=w.values)
        with pytest.raises(DimensionMismatch):
            infer_corpus([(sid, bad, x)], data.model, fail_fast=True)
