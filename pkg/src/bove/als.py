"""Alternating least squares training of the factorization model.

P and R have closed-form block updates built from streamed Gram sums; each
sentence's E is refreshed by a damped (averaged) pair of least-squares
solves.  Vectorization convention throughout: vec stacks matrix rows
left-to-right (row-major), token pairs are enumerated row-major over
(head, dependent), so vec(A.B.A^T) = (A kron A) . vec(B).
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .encoding import reconstruct_x
from .errors import DimensionMismatch, DivergenceError, SingularSystemError

_JITTER_FREE = 0.0


def _spd_solve_right(gram, rhs, ridge, what):
    """Solve Z (gram + ridge I) = rhs for Z via a Cholesky factorization.

    gram must be symmetric PSD; with ridge == 0 a singular gram is an error
    (deterministic behavior, no pseudo-inverse).
    """
    a = gram + ridge * np.eye(gram.shape[0])
    try:
        factor = cho_factor(a, lower=True)
    except LinAlgError:
        raise SingularSystemError(
            "%s system is singular; set its regularizer > 0" % what
        ) from None
    return cho_solve(factor, rhs.T).T


@dataclass
class GramAccumulators:
    """Streaming normal-equation sums over the corpus.

    ete = sum E_s^T E_s (r x r); we = sum W_s E_s (c x r);
    ktk = sum (E_s kron E_s)^T (E_s kron E_s) = sum (E_s^T E_s) kron (E_s^T E_s)
    (r^2 x r^2); xk = sum X'_s (E_s kron E_s) (d x r^2).
    """

    r: int
    c: int
    d: int
    ete: np.ndarray = field(default=None)
    we: np.ndarray = field(default=None)
    ktk: np.ndarray = field(default=None)
    xk: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.ete is None:
            self.ete = np.zeros((self.r, self.r))
        if self.we is None:
            self.we = np.zeros((self.c, self.r))
        if self.ktk is None:
            self.ktk = np.zeros((self.r * self.r, self.r * self.r))
        if self.xk is None:
            self.xk = np.zeros((self.d, self.r * self.r))

    def add(self, w, x, e):
        gram = e.T @ e
        self.ete += gram
        self.we += w.to_dense() @ e
        self.ktk += np.kron(gram, gram)
        # row k of X'_s (E kron E) is vec(E^T X_sk E)
        proj = np.einsum("ia,kij,jb->kab", e, x.to_dense(), e)
        self.xk += proj.reshape(self.d, self.r * self.r)


def update_P(ws, es, lambda_p, p_current=None, frozen=None):
    """Exact minimizer of sum ||W_s - P E_s^T||^2 + lambda_p ||P||^2.

    Frozen rows of p_current are carried over unchanged; each P row is an
    independent least-squares problem, so this is exact, not projected.
    Gram sums are streamed; the corpus-wide concatenation never exists.
    """
    r = es[0].shape[1]
    c = ws[0].c
    ete = np.zeros((r, r))
    we = np.zeros((c, r))
    for w, e in zip(ws, es):
        ete += e.T @ e
        we += w.to_dense() @ e
    p_new = _spd_solve_right(ete, we, lambda_p, "P update")
    if frozen is not None and frozen.any():
        if p_current is None:
            raise ValueError("frozen rows require the current P")
        p_new[frozen] = p_current[frozen]
    return p_new


def update_R(xs, es, lambda_r, alpha=1.0, r_cap=100):
    """Exact minimizer of sum alpha ||X_s - E_s R E_s^T||^2 + lambda_r ||R||^2.

    Solved through the Kronecker reformulation: each relation slice is the
    row-major matricization of one row of R' = alpha X'E' (alpha E'^T E' +
    lambda_r I)^-1 with E'_s = E_s kron E_s.  Requires an r^2 x r^2 solve,
    hence the soft cap on r.
    """
    r = es[0].shape[1]
    if r > r_cap:
        raise DimensionMismatch(
            "r=%d exceeds the ALS cap of %d (r^2 x r^2 solve); use the SGD trainer"
            % (r, r_cap)
        )
    d = xs[0].d
    grams = GramAccumulators(r=r, c=1, d=d)
    for x, e in zip(xs, es):
        gram = e.T @ e
        grams.ktk += np.kron(gram, gram)
        proj = np.einsum("ia,kij,jb->kab", e, x.to_dense(), e)
        grams.xk += proj.reshape(d, r * r)
    r_flat = _spd_solve_right(alpha * grams.ktk, alpha * grams.xk, lambda_r, "R update")
    return r_flat.reshape(d, r, r)


def update_E_sentence(w, x, p, r_tensor, e_prev, alpha=1.0, lambda_e=0.0):
    """One linearized least-squares refresh of a sentence's token embeddings.

    Solves the three stacked systems (properties, relations with the old E
    on the right, transposed relations likewise), with alpha applied to both
    the targets and the design blocks of the relation systems:
        E_new = Y F^T (F F^T + lambda_e I)^-1
    realized without materializing Y or F.
    """
    p = np.asarray(p, dtype=np.float64)
    r_tensor = np.asarray(r_tensor, dtype=np.float64)
    e_prev = np.asarray(e_prev, dtype=np.float64)
    r = p.shape[1]
    if e_prev.shape != (w.n, r):
        raise DimensionMismatch(
            "E_prev shape %s, expected (%d, %d)" % (e_prev.shape, w.n, r)
        )
    if r_tensor.shape[1:] != (r, r) or r_tensor.shape[0] != x.d:
        raise DimensionMismatch("R shape %s incompatible" % (r_tensor.shape,))
    if w.c != p.shape[0]:
        raise DimensionMismatch("W has c=%d but P has %d rows" % (w.c, p.shape[0]))
    a2 = alpha * alpha
    m = e_prev.T @ e_prev
    xd = x.to_dense()
    # F F^T
    gram = p.T @ p
    gram += a2 * np.einsum("kab,bc,kdc->ad", r_tensor, m, r_tensor)
    gram += a2 * np.einsum("kba,bc,kcd->ad", r_tensor, m, r_tensor)
    # Y F^T
    rhs = w.to_dense().T @ p
    rhs += a2 * np.einsum("kij,ja,kba->ib", xd, e_prev, r_tensor)
    rhs += a2 * np.einsum("kji,ja,kab->ib", xd, e_prev, r_tensor)
    return _spd_solve_right(gram, rhs, lambda_e, "E update")


def averaged_E_step(w, x, p, r_tensor, e_current, alpha=1.0, lambda_e=0.0):
    """Two consecutive E refreshes with P, R fixed, then their average.

    Damps the oscillation of the raw iteration: the new value would
    overcompensate for errors in the old one, so the midpoint of E_t and
    E_{t+1} is used instead.
    """
    e_t = update_E_sentence(w, x, p, r_tensor, e_current, alpha, lambda_e)
    e_t1 = update_E_sentence(w, x, p, r_tensor, e_t, alpha, lambda_e)
    return 0.5 * (e_t + e_t1)


def regularize_R_nuclear(r_tensor, tau):
    """Singular-value soft-thresholding of every relation slice.

    Each slice becomes U soft(S, tau) V^T; shrinking singular values toward
    zero regularizes the rank of each relation matrix.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    out = np.empty_like(r_tensor)
    for k in range(r_tensor.shape[0]):
        u, s, vt = np.linalg.svd(r_tensor[k], full_matrices=False)
        out[k] = (u * np.maximum(s - tau, 0.0)) @ vt
    return out


def regularize_R_l1(r_tensor, tau):
    """Entrywise soft-thresholding of R (proximal step for the L1 penalty)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return np.sign(r_tensor) * np.maximum(np.abs(r_tensor) - tau, 0.0)


def r_penalty(r_tensor, hyper):
    """Value of the selected R regularizer at strength lambda_r."""
    if hyper.r_regularizer == "l2":
        return hyper.lambda_r * float(np.sum(r_tensor ** 2))
    if hyper.r_regularizer == "l1":
        return hyper.lambda_r * float(np.sum(np.abs(r_tensor)))
    total = 0.0
    for k in range(r_tensor.shape[0]):
        total += float(np.sum(np.linalg.svd(r_tensor[k], compute_uv=False)))
    return hyper.lambda_r * total


def corpus_objective(ws, xs, es, model, hyper, data_fit_only=False):
    """Regularized (or pure data-fit) objective over the whole corpus."""
    data_fit = 0.0
    for w, x, e in zip(ws, xs, es):
        data_fit += float(np.sum((w.to_dense() - model.P @ e.T) ** 2))
        data_fit += hyper.alpha * float(
            np.sum((x.to_dense() - reconstruct_x(e, model.R)) ** 2)
        )
    if data_fit_only:
        return data_fit
    total = data_fit
    total += hyper.lambda_p * float(np.sum(model.P ** 2))
    total += r_penalty(model.R, hyper)
    total += hyper.lambda_e * sum(float(np.sum(e ** 2)) for e in es)
    return total


@dataclass
class TrainResult:
    model: "TypeEmbeddings"
    e_store: list
    trace: list
    data_fit_trace: list
    stopped_by_rule: bool


def train(ws, xs, model, hyper, log=None):
    """Full ALS loop: E sweeps, closed-form P and R updates, stopping rule.

    E starts at zero (matching the test-time setting).  Every
    e_reinit_period rounds E is reset to zeros and e_reinit_burst E-only
    averaged sweeps run instead of that round's single sweep.  Training
    stops when the relative objective improvement over one round drops to
    rel_improvement_stop, or at max_rounds.
    """
    model = model.copy()
    es = [np.zeros((w.n, hyper.r)) for w in ws]

    def objective():
        return corpus_objective(ws, xs, es, model, hyper)

    trace = [objective()]
    data_fit_trace = [corpus_objective(ws, xs, es, model, hyper, data_fit_only=True)]
    stopped = False
    for round_no in range(1, hyper.max_rounds + 1):
        t0 = time.perf_counter()
        reinit = hyper.e_reinit_period > 0 and round_no % hyper.e_reinit_period == 0
        if reinit:
            es = [np.zeros_like(e) for e in es]
            sweeps = hyper.e_reinit_burst
        else:
            sweeps = 1
        for _ in range(sweeps):
            es = [
                averaged_E_step(w, x, model.P, model.R, e, hyper.alpha, hyper.lambda_e)
                for w, x, e in zip(ws, xs, es)
            ]
        model.P = update_P(ws, es, hyper.lambda_p, model.P, model.frozen_p_rows)
        model.R = update_R(xs, es, hyper.lambda_r, hyper.alpha, hyper.als_r_cap)
        if hyper.r_regularizer == "nuclear":
            model.R = regularize_R_nuclear(model.R, hyper.lambda_r)
        elif hyper.r_regularizer == "l1":
            model.R = regularize_R_l1(model.R, hyper.lambda_r)
        obj = objective()
        if not np.isfinite(obj):
            raise DivergenceError("non-finite objective at round %d" % round_no)
        prev = trace[-1]
        rel = (prev - obj) / prev if prev > 0 else 0.0
        trace.append(obj)
        data_fit_trace.append(
            corpus_objective(ws, xs, es, model, hyper, data_fit_only=True)
        )
        if log is not None:
            log(
                "round=%d objective=%.10g rel_improvement=%.6g seconds=%.3f"
                % (round_no, obj, rel, time.perf_counter() - t0)
            )
        if rel <= hyper.rel_improvement_stop:
            stopped = True
            break
    return TrainResult(
        model=model, e_store=es, trace=trace,
        data_fit_trace=data_fit_trace, stopped_by_rule=stopped,
    )
