import numpy as np
import pytest

from bove import synth
from bove.als import corpus_objective
from bove.model import Hyperparams, init_for_training
from bove.sgd import (
    SgdConfig,
    SgdState,
    sample_cells,
    sampled_loss_and_grads,
    sgd_step,
    train_sgd,
)


class Dims:
    def __init__(self, c, d):
        self.c = c
        self.d = d


def micro_corpus(seed=0, n_sentences=2, n=3, c=4, d=2, r=2, mode="discrete"):
    data = synth.generate(seed, n_sentences=n_sentences, n_tokens=n, c=c, d=d,
                          r=r, mode=mode)
    ws = [w for _, w, _ in data.sentences]
    xs = [x for _, _, x in data.sentences]
    return ws, xs


def finite_difference_check(batch, ws, xs, samples, model, e_store, hyper,
                            reg_scale, h=1e-5):
    """Max relative error between analytic and central-difference gradients."""
    _, g_p, g_r, g_e = sampled_loss_and_grads(
        batch, ws, xs, samples, model, e_store, hyper, reg_scale
    )

    def loss():
        return sampled_loss_and_grads(
            batch, ws, xs, samples, model, e_store, hyper, reg_scale
        )[0]

    worst = 0.0
    arrays = [(model.P, g_p), (model.R, g_r)]
    arrays += [(e_store[s], g_e[s]) for s in batch]
    for arr, grad in arrays:
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            if arr is model.P and model.frozen_p_rows[idx[0]]:
                continue
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss()
            arr[idx] = orig - h
            down = loss()
            arr[idx] = orig
            fd = (up - down) / (2 * h)
            denom = max(abs(fd), abs(grad[idx]), 1e-6)
            worst = max(worst, abs(fd - grad[idx]) / denom)
    return worst


class TestGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        ws, xs = micro_corpus()
        hyper = Hyperparams(r=2, alpha=0.7, lambda_p=0.3, lambda_r=0.2,
                            lambda_e=0.15)
        model = init_for_training(Dims(4, 2), hyper, seed=1)
        model.R = rng.normal(size=model.R.shape) * 0.3
        e_store = [rng.normal(size=(3, 2)) for _ in ws]
        batch = [0, 1]
        samples = {s: sample_cells(ws[s], xs[s], 3, rng) for s in batch}
        worst = finite_difference_check(
            batch, ws, xs, samples, model, e_store, hyper, reg_scale=1.0
        )
        assert worst < 1e-4

    def test_zero_gradient_at_exact_fit(self):
        # positive-only sampling (k=0), no regularizers, ground-truth model
        data = synth.generate(3, n_sentences=1, n_tokens=3, c=4, d=2, r=2)
        hyper = Hyperparams(r=2, alpha=1.0, lambda_p=0.0, lambda_r=0.0,
                            lambda_e=0.0)
        sid, w, x = data.sentences[0]
        model = data.model.copy()
        e_store = [data.e_true[0]]
        rng = np.random.default_rng(0)
        samples = {0: sample_cells(w, x, 0, rng)}
        loss, g_p, g_r, g_e = sampled_loss_and_grads(
            [0], [w], [x], samples, model, e_store, hyper, reg_scale=1.0
        )
        assert loss == pytest.approx(0.0, abs=1e-18)
        np.testing.assert_allclose(g_p, 0, atol=1e-12)
        np.testing.assert_allclose(g_r, 0, atol=1e-12)
        np.testing.assert_allclose(g_e[0], 0, atol=1e-12)

    def test_frozen_rows_receive_no_gradient(self):
        rng = np.random.default_rng(1)
        ws, xs = micro_corpus()
        hyper = Hyperparams(r=2)
        model = init_for_training(Dims(4, 2), hyper, seed=2)
        model.frozen_p_rows[0] = True
        e_store = [rng.normal(size=(3, 2)) for _ in ws]
        samples = {s: sample_cells(ws[s], xs[s], 2, rng) for s in (0, 1)}
        _, g_p, _, _ = sampled_loss_and_grads(
            [0, 1], ws, xs, samples, model, e_store, hyper, reg_scale=1.0
        )
        np.testing.assert_array_equal(g_p[0], 0.0)


class TestSampling:
    def test_negatives_avoid_positives(self):
        rng = np.random.default_rng(2)
        ws, xs = micro_corpus()
        w_cells, x_cells = sample_cells(ws[0], xs[0], 10, rng)
        pos_w = set(zip(ws[0].rows.tolist(), ws[0].cols.tolist()))
        for i, t, target, weight in w_cells:
            if weight != 1.0:
                assert (i, t) not in pos_w
                assert target == 0.0
        pos_x = set(zip(xs[0].rels.tolist(), xs[0].heads.tolist(),
                        xs[0].deps.tolist()))
        for k, h, t, target, weight in x_cells:
            if weight != 1.0:
                assert (k, h, t) not in pos_x

    def test_expected_sampled_loss_matches_full_zero_loss(self):
        # n <= 3, d <= 2: the importance weights make the expected sampled
        # zero-cell loss equal the full zero-cell loss exactly
        rng = np.random.default_rng(3)
        ws, xs = micro_corpus(n=3, d=2)
        hyper = Hyperparams(r=2, alpha=1.0, lambda_p=0.0, lambda_r=0.0,
                            lambda_e=0.0)
        model = init_for_training(Dims(4, 2), hyper, seed=4)
        model.R = rng.normal(size=model.R.shape) * 0.2
        e = rng.normal(size=(3, 2))
        w, x = ws[0], xs[0]
        k = 4
        pos_w = set(zip(w.rows.tolist(), w.cols.tolist()))
        pos_x = set(zip(x.rels.tolist(), x.heads.tolist(), x.deps.tolist()))
        # expected sampled zero loss by enumerating the uniform distribution
        zero_w = [(i, t) for i in range(w.c) for t in range(w.n)
                  if (i, t) not in pos_w]
        zero_x = [(kk, h, t) for kk in range(x.d) for h in range(x.n)
                  for t in range(x.n) if (kk, h, t) not in pos_x]
        weight_w = len(zero_w) / (k * w.nnz)
        weight_x = len(zero_x) / (k * x.nnz)
        draws_w = k * w.nnz
        draws_x = k * x.nnz
        expected = 0.0
        for i, t in zero_w:
            cell_loss = float(model.P[i] @ e[t]) ** 2
            expected += draws_w * (1.0 / len(zero_w)) * weight_w * cell_loss
        for kk, h, t in zero_x:
            cell_loss = hyper.alpha * float(e[h] @ model.R[kk] @ e[t]) ** 2
            expected += draws_x * (1.0 / len(zero_x)) * weight_x * cell_loss
        full = 0.0
        for i, t in zero_w:
            full += float(model.P[i] @ e[t]) ** 2
        for kk, h, t in zero_x:
            full += hyper.alpha * float(e[h] @ model.R[kk] @ e[t]) ** 2
        assert expected == pytest.approx(full, rel=1e-12)


class TestTrainSgd:
    def test_zero_epochs_noop(self):
        ws, xs = micro_corpus()
        hyper = Hyperparams(r=2)
        model = init_for_training(Dims(4, 2), hyper, seed=5)
        cfg = SgdConfig(epochs=0)
        out, _, trace = train_sgd(ws, xs, model, hyper, cfg)
        np.testing.assert_array_equal(out.P, model.P)
        np.testing.assert_array_equal(out.R, model.R)
        assert trace == []

    def test_seed_determinism(self):
        ws, xs = micro_corpus()
        hyper = Hyperparams(r=2)
        cfg = SgdConfig(epochs=5, seed=11)
        model = init_for_training(Dims(4, 2), hyper, seed=6)
        a, _, _ = train_sgd(ws, xs, model, hyper, cfg)
        b, _, _ = train_sgd(ws, xs, model, hyper, cfg)
        np.testing.assert_array_equal(a.P, b.P)
        np.testing.assert_array_equal(a.R, b.R)

    def test_frozen_rows_unchanged_after_steps(self):
        ws, xs = micro_corpus()
        hyper = Hyperparams(r=2)
        model = init_for_training(Dims(4, 2), hyper, seed=7)
        model.frozen_p_rows[1] = True
        frozen_before = model.P[1].copy()
        cfg = SgdConfig(epochs=50, seed=3, batch_size=2)
        out, _, _ = train_sgd(ws, xs, model, hyper, cfg)
        np.testing.assert_array_equal(out.P[1], frozen_before)

    def test_objective_decreases(self):
        ws, xs = micro_corpus(seed=9, n_sentences=4)
        hyper = Hyperparams(r=2)
        model = init_for_training(Dims(4, 2), hyper, seed=8)
        cfg = SgdConfig(epochs=100, seed=1, learning_rate=0.1)
        out, e_store, trace = train_sgd(ws, xs, model, hyper, cfg)
        start = corpus_objective(ws, xs, [np.zeros((3, 2))] * 4, model, hyper)
        end = corpus_objective(ws, xs, e_store, out, hyper)
        assert end < start

    def test_log_marks_sampled(self):
        ws, xs = micro_corpus()
        hyper = Hyperparams(r=2)
        model = init_for_training(Dims(4, 2), hyper, seed=9)
        lines = []
        train_sgd(ws, xs, model, hyper, SgdConfig(epochs=2), log=lines.append)
        assert len(lines) == 2
        assert all("sampled=true" in line for line in lines)


def test_config_validation():
    with pytest.raises(ValueError):
        SgdConfig(batch_size=0)
    with pytest.raises(ValueError):
        SgdConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        SgdConfig(negatives_per_positive=0)
