"""Mini-batch SGD trainer with adaptive per-parameter learning rates.

The alternative trainer for embedding sizes where the ALS r^2 x r^2 solve
is too expensive.  Positive cells of each sentence's tensors are always
visited; zero cells are subsampled (k uniform draws per positive) and
importance-weighted so the sampled loss is an unbiased estimate of the
full-tensor objective.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError


@dataclass(frozen=True)
class SgdConfig:
    batch_size: int = 8
    learning_rate: float = 0.05
    negatives_per_positive: int = 5
    epochs: int = 100
    seed: int = 0
    adapt_eps: float = 1e-8

    def __post_init__(self):
        if min(self.batch_size, self.epochs + 1, self.negatives_per_positive) < 1:
            raise ValueError("batch_size, negatives_per_positive must be >= 1")
        if self.learning_rate <= 0 or self.adapt_eps <= 0:
            raise ValueError("learning_rate and adapt_eps must be positive")


@dataclass
class SgdState:
    """Accumulated squared gradients for the adaptive step-size divisor."""

    acc_p: np.ndarray
    acc_r: np.ndarray
    acc_e: list

    @classmethod
    def fresh(cls, model, e_store):
        return cls(
            acc_p=np.zeros_like(model.P),
            acc_r=np.zeros_like(model.R),
            acc_e=[np.zeros_like(e) for e in e_store],
        )


def sample_cells(w, x, k, rng):
    """Sampled cells of one sentence: positives plus weighted negatives.

    Returns (w_cells, x_cells); w_cells rows are (pred, tok, target, weight),
    x_cells rows are (rel, head, dep, target, weight).  Negatives are
    uniform over zero cells, with weight n_zero / (k * n_pos) so the
    expected sampled zero-cell loss equals the full zero-cell loss.
    """
    w_cells = []
    pos_w = set(zip(w.rows.tolist(), w.cols.tolist()))
    for i in range(w.nnz):
        w_cells.append((int(w.rows[i]), int(w.cols[i]), float(w.values[i]), 1.0))
    n_zero_w = w.c * w.n - len(pos_w)
    if w.nnz and k and n_zero_w:
        weight = n_zero_w / (k * w.nnz)
        for _ in range(k * w.nnz):
            while True:
                cell = (int(rng.integers(w.c)), int(rng.integers(w.n)))
                if cell not in pos_w:
                    break
            w_cells.append((cell[0], cell[1], 0.0, weight))

    x_cells = []
    pos_x = set(zip(x.rels.tolist(), x.heads.tolist(), x.deps.tolist()))
    for i in range(x.nnz):
        x_cells.append(
            (int(x.rels[i]), int(x.heads[i]), int(x.deps[i]), float(x.values[i]), 1.0)
        )
    n_zero_x = x.d * x.n * x.n - len(pos_x)
    if x.nnz and k and n_zero_x:
        weight = n_zero_x / (k * x.nnz)
        for _ in range(k * x.nnz):
            while True:
                cell = (
                    int(rng.integers(x.d)),
                    int(rng.integers(x.n)),
                    int(rng.integers(x.n)),
                )
                if cell not in pos_x:
                    break
            x_cells.append((cell[0], cell[1], cell[2], 0.0, weight))
    return w_cells, x_cells


def sampled_loss_and_grads(batch, ws, xs, samples, model, e_store, hyper, reg_scale):
    """Loss and analytic gradients of the sampled objective on one batch.

    batch is a list of sentence indices; samples[s] the fixed cell draws for
    sentence s.  Regularizer terms for P and R are scaled by reg_scale
    (batch fraction of the corpus) so one epoch applies them once; the E
    terms of batch sentences enter at full strength.
    """
    p, r_tensor = model.P, model.R
    alpha = hyper.alpha
    loss = 0.0
    g_p = np.zeros_like(p)
    g_r = np.zeros_like(r_tensor)
    g_e = {s: np.zeros_like(e_store[s]) for s in batch}
    for s in batch:
        e = e_store[s]
        w_cells, x_cells = samples[s]
        for i, t, target, weight in w_cells:
            resid = float(p[i] @ e[t]) - target
            loss += weight * resid * resid
            coef = 2.0 * weight * resid
            g_p[i] += coef * e[t]
            g_e[s][t] += coef * p[i]
        for k, h, t, target, weight in x_cells:
            resid = float(e[h] @ r_tensor[k] @ e[t]) - target
            loss += alpha * weight * resid * resid
            coef = 2.0 * alpha * weight * resid
            g_r[k] += coef * np.outer(e[h], e[t])
            g_e[s][h] += coef * (r_tensor[k] @ e[t])
            g_e[s][t] += coef * (r_tensor[k].T @ e[h])
    loss += reg_scale * hyper.lambda_p * float(np.sum(p ** 2))
    loss += reg_scale * hyper.lambda_r * float(np.sum(r_tensor ** 2))
    g_p += 2.0 * reg_scale * hyper.lambda_p * p
    g_r += 2.0 * reg_scale * hyper.lambda_r * r_tensor
    for s in batch:
        loss += hyper.lambda_e * float(np.sum(e_store[s] ** 2))
        g_e[s] += 2.0 * hyper.lambda_e * e_store[s]
    g_p[model.frozen_p_rows] = 0.0
    return loss, g_p, g_r, g_e


def sgd_step(batch, ws, xs, model, e_store, hyper, config, state, rng, reg_scale):
    """Sample cells for each batch sentence, then one adaptive gradient step."""
    samples = {
        s: sample_cells(ws[s], xs[s], config.negatives_per_positive, rng)
        for s in batch
    }
    loss, g_p, g_r, g_e = sampled_loss_and_grads(
        batch, ws, xs, samples, model, e_store, hyper, reg_scale
    )
    if not np.isfinite(loss):
        raise DivergenceError("non-finite sampled loss in SGD step")
    lr, eps = config.learning_rate, config.adapt_eps
    state.acc_p += g_p ** 2
    model.P -= lr * g_p / (np.sqrt(state.acc_p) + eps)
    state.acc_r += g_r ** 2
    model.R -= lr * g_r / (np.sqrt(state.acc_r) + eps)
    for s in batch:
        state.acc_e[s] += g_e[s] ** 2
        e_store[s] -= lr * g_e[s] / (np.sqrt(state.acc_e[s]) + eps)
    if not (np.all(np.isfinite(model.P)) and np.all(np.isfinite(model.R))):
        raise DivergenceError("non-finite parameters after SGD step")
    return loss


def train_sgd(ws, xs, model, hyper, config, log=None):
    """Epoch loop over shuffled sentences; returns (model, e_store, trace).

    Single-threaded and fully deterministic given config.seed.  The trace
    records the summed sampled batch losses per epoch.
    """
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    e_store = [np.zeros((w.n, hyper.r)) for w in ws]
    state = SgdState.fresh(model, e_store)
    n = len(ws)
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = [int(s) for s in order[start:start + config.batch_size]]
            reg_scale = len(batch) / n
            epoch_loss += sgd_step(
                batch, ws, xs, model, e_store, hyper, config, state, rng, reg_scale
            )
        trace.append(epoch_loss)
        if log is not None:
            log(
                "round=%d objective=%.10g rel_improvement=%.6g seconds=%.3f sampled=true"
                % (
                    epoch + 1,
                    epoch_loss,
                    ((trace[-2] - epoch_loss) / trace[-2])
                    if len(trace) > 1 and trace[-2] > 0
                    else 0.0,
                    0.0,
                )
            )
    return model, e_store, trace
