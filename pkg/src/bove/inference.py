"""Transductive inference: token embeddings for new sentences, model frozen.

Starting from zeros, the first least-squares refresh draws features only
from the property matrix; every later refresh is blended with the running
average, so features propagate one graph step further per iteration without
oscillating.
"""

import numpy as np

from .als import update_E_sentence
from .errors import DimensionMismatch


def infer_bove(w, x, model, hyper=None, iters=None):
    """Token embeddings (n x r) for one encoded sentence, P and R fixed.

    The first refresh is never averaged; afterwards each iteration solves
    once from the running average and keeps the midpoint.  By default
    hyper.inference_iters counts raw solves; with
    iters_count_raw_solves=False it counts the averaged updates after the
    first solve instead.
    """
    if hyper is None:
        hyper = model.hyper
    if w.c != model.c or x.d != model.d:
        raise DimensionMismatch(
            "sentence tensors (c=%d, d=%d) do not match model (c=%d, d=%d)"
            % (w.c, x.d, model.c, model.d)
        )
    total = iters if iters is not None else hyper.inference_iters
    e = update_E_sentence(
        w, x, model.P, model.R, np.zeros((w.n, hyper.r)),
        hyper.alpha, hyper.lambda_e,
    )
    remaining = total - 1 if hyper.iters_count_raw_solves else total
    for _ in range(remaining):
        e_next = update_E_sentence(
            w, x, model.P, model.R, e, hyper.alpha, hyper.lambda_e
        )
        e = 0.5 * (e + e_next)
    return e


def infer_corpus(sentences, model, hyper=None, fail_fast=False):
    """Infer embeddings for (sentence_id, W, X) triples, order preserved.

    Returns (results, failures): results is a list of (sentence_id, E or
    None) aligned with the input; failures lists (sentence_id, exception).
    With fail_fast the first error is raised instead.
    """
    results = []
    failures = []
    for sid, w, x in sentences:
        try:
            results.append((sid, infer_bove(w, x, model, hyper)))
        except Exception as exc:  # noqa: BLE001 - reported per sentence
            if fail_fast:
                raise
            results.append((sid, None))
            failures.append((sid, exc))
    return results, failures
