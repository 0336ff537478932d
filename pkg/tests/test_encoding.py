import io

import numpy as np
import pytest

from bove.conll import SentenceGraph
from bove.encoding import (
    SparsePropertyMatrix,
    SparseRelationTensor,
    dump_coordinates,
    encode,
    from_dense,
    read_tensor_file,
    reconstruction_loss,
    write_tensor_file,
)
from bove.errors import DimensionMismatch


def graph(tokens, relations):
    return SentenceGraph(tokens=tuple(tokens), relations=tuple(relations))


class TestEncode:
    def test_single_token(self):
        w, x = encode(graph([(5, 9)], []), c=10, d=2)
        assert set(zip(w.rows, w.cols)) == {(5, 0), (9, 0)}
        assert x.nnz == 0

    def test_relation_coordinates(self):
        w, x = encode(graph([(0, 1), (2, 3)], [(1, 0, 1)]), c=4, d=2)
        assert list(zip(x.rels, x.heads, x.deps)) == [(1, 0, 1)]

    def test_two_entries_per_token(self):
        g = graph([(0, 1), (2, 3), (0, 3)], [(0, 0, 1), (0, 1, 2)])
        w, _ = encode(g, c=4, d=1)
        assert w.nnz == 2 * len(g)

    def test_out_of_range_rejected(self):
        with pytest.raises(DimensionMismatch):
            SparsePropertyMatrix(c=2, n=1, rows=np.array([5]), cols=np.array([0]))
        with pytest.raises(DimensionMismatch):
            SparseRelationTensor(d=1, n=2, rels=np.array([0]),
                                 heads=np.array([0]), deps=np.array([3]))


class TestReconstructionLoss:
    def test_all_zero(self):
        w, x = from_dense(np.zeros((2, 2)), np.zeros((1, 2, 2)))
        loss = reconstruction_loss(w, x, np.zeros((2, 3)), np.zeros((1, 3, 3)),
                                   np.zeros((2, 3)))
        assert loss == 0.0

    def test_regularizer_only(self):
        w, x = from_dense(np.zeros((2, 2)), np.zeros((1, 2, 2)))
        e = np.array([[1.0, 2.0], [3.0, 4.0]])
        loss = reconstruction_loss(
            w, x, np.zeros((2, 2)), np.zeros((1, 2, 2)), e,
            lambda_e=1.0, include_regularizers=True,
        )
        assert loss == pytest.approx(30.0)

    def test_scalar_exact_fit(self):
        # c=1, n=1, r=1: W=[[1]], P=[[0.5]], E=[[2]] reconstructs exactly
        w, x = from_dense(np.array([[1.0]]), np.zeros((1, 1, 1)))
        loss = reconstruction_loss(w, x, np.array([[0.5]]),
                                   np.zeros((1, 1, 1)), np.array([[2.0]]))
        assert loss == pytest.approx(0.0, abs=1e-15)

    def test_dimension_mismatch(self):
        w, x = from_dense(np.zeros((2, 2)), np.zeros((1, 2, 2)))
        with pytest.raises(DimensionMismatch):
            reconstruction_loss(w, x, np.zeros((3, 3)), np.zeros((1, 3, 3)),
                                np.zeros((2, 3)))

    def test_matches_dense_naive(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = rng.integers(1, 7)
            r = rng.integers(1, 5)
            c = rng.integers(1, 6)
            d = rng.integers(1, 4)
            wd = rng.normal(size=(c, n)) * (rng.random(size=(c, n)) < 0.5)
            xd = rng.normal(size=(d, n, n)) * (rng.random(size=(d, n, n)) < 0.5)
            p = rng.normal(size=(c, r))
            r_tensor = rng.normal(size=(d, r, r))
            e = rng.normal(size=(n, r))
            w, x = from_dense(wd, xd)
            alpha = float(rng.random() * 2)
            naive = np.sum((wd - p @ e.T) ** 2)
            naive += alpha * np.sum(
                (xd - np.einsum("ia,kab,jb->kij", e, r_tensor, e)) ** 2
            )
            sparse = reconstruction_loss(w, x, p, r_tensor, e, alpha=alpha)
            assert sparse == pytest.approx(naive, rel=1e-10)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        n, r, c, d = 5, 3, 4, 2
        wd = (rng.random(size=(c, n)) < 0.5).astype(float)
        xd = (rng.random(size=(d, n, n)) < 0.3).astype(float)
        p = rng.normal(size=(c, r))
        r_tensor = rng.normal(size=(d, r, r))
        e = rng.normal(size=(n, r))
        perm = rng.permutation(n)
        w, x = from_dense(wd, xd)
        wp, xp = from_dense(wd[:, perm], xd[:, perm][:, :, perm])
        base = reconstruction_loss(w, x, p, r_tensor, e)
        permuted = reconstruction_loss(wp, xp, p, r_tensor, e[perm])
        assert permuted == pytest.approx(base, rel=1e-12)

    def test_zero_iff_exact(self):
        rng = np.random.default_rng(2)
        e = rng.normal(size=(3, 2))
        p = rng.normal(size=(4, 2))
        r_tensor = rng.normal(size=(2, 2, 2))
        w, x = from_dense(p @ e.T, np.einsum("ia,kab,jb->kij", e, r_tensor, e))
        assert reconstruction_loss(w, x, p, r_tensor, e) == pytest.approx(0, abs=1e-18)
        assert reconstruction_loss(w, x, p, r_tensor, e + 0.01) > 1e-6


class TestCoordinateText:
    def test_dump_format(self):
        w, x = from_dense(np.array([[1.0, 0.0]]), np.array([[[0.0, 1.0], [0.0, 0.0]]]))
        buf = io.StringIO()
        dump_coordinates(w, x, buf)
        assert buf.getvalue() == "W 0 0\nX 0 0 1\n"

    def test_tensor_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        wd = rng.normal(size=(3, 2))
        xd = rng.normal(size=(2, 2, 2))
        w, x = from_dense(wd, xd)
        path = tmp_path / "tensors.txt"
        write_tensor_file(path, [("s0", w, x)], c=3, d=2)
        c, d, sentences = read_tensor_file(path)
        assert (c, d) == (3, 2)
        sid, w2, x2 = sentences[0]
        assert sid == "s0"
        np.testing.assert_array_equal(w2.to_dense(), wd)
        np.testing.assert_array_equal(x2.to_dense(), xd)
