"""Numeric kernels: DP fill and CSR products, numpy vs accelerated."""

import os
import subprocess
import sys

import numpy as np
import pytest

from textdiar._kernels import (
    HAS_NUMBA,
    TB_DIAG,
    TB_LEFT,
    TB_UP,
    csr_matvec,
    csr_matvec_numpy,
    csr_rmatvec,
    csr_rmatvec_numpy,
    nw_fill,
    nw_fill_numpy,
)


def dp_fill_oracle(ref_ids, hyp_ids, match, sub, gap):
    """Scalar reference for the score/traceback fill (diag > up > left)."""
    n, m = len(ref_ids), len(hyp_ids)
    score = np.zeros((n + 1, m + 1))
    tb = np.zeros((n + 1, m + 1), dtype=np.uint8)
    for j in range(m + 1):
        score[0, j] = gap * j
        tb[0, j] = TB_LEFT
    for i in range(1, n + 1):
        score[i, 0] = gap * i
        tb[i, 0] = TB_UP
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d = score[i - 1, j - 1] + (match if ref_ids[i - 1] == hyp_ids[j - 1] else sub)
            u = score[i - 1, j] + gap
            l = score[i, j - 1] + gap
            best, ptr = d, TB_DIAG
            if u > best:
                best, ptr = u, TB_UP
            if l > best:
                best, ptr = l, TB_LEFT
            score[i, j] = best
            tb[i, j] = ptr
    return score, tb


def random_ids(rng, n, alphabet=4):
    return rng.integers(0, alphabet, size=n).astype(np.int64)


def random_csr(rng, n_rows, dim, nnz_per_row=5):
    indptr = [0]
    indices = []
    values = []
    for _ in range(n_rows):
        k = int(rng.integers(1, nnz_per_row + 1))
        cols = np.sort(rng.choice(dim, size=k, replace=False))
        indices.extend(int(c) for c in cols)
        values.extend(rng.normal(size=k))
        indptr.append(len(indices))
    return (np.array(indptr, dtype=np.int64),
            np.array(indices, dtype=np.int64),
            np.array(values, dtype=np.float64))


class TestNwFillNumpy:
    def test_matches_scalar_oracle(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 9))
            m = int(rng.integers(1, 9))
            ref = random_ids(rng, n, alphabet=3)
            hyp = random_ids(rng, m, alphabet=3)
            got_s, got_t = nw_fill_numpy(ref, hyp, 2.0, -1.0, -1.0)
            exp_s, exp_t = dp_fill_oracle(ref, hyp, 2.0, -1.0, -1.0)
            np.testing.assert_array_equal(got_s, exp_s)
            np.testing.assert_array_equal(got_t, exp_t)

    def test_border_conventions(self):
        ref = np.array([0, 1], dtype=np.int64)
        hyp = np.array([0], dtype=np.int64)
        score, tb = nw_fill_numpy(ref, hyp, 2.0, -1.0, -1.0)
        np.testing.assert_array_equal(score[0, :], [0.0, -1.0])
        np.testing.assert_array_equal(score[:, 0], [0.0, -1.0, -2.0])
        assert list(tb[0, :]) == [TB_LEFT, TB_LEFT]
        assert list(tb[1:, 0]) == [TB_UP, TB_UP]

    def test_tie_prefers_diag_then_up(self):
        # one mismatched token: diag(sub) ties both gap routes at -1
        ref = np.array([0], dtype=np.int64)
        hyp = np.array([1], dtype=np.int64)
        _, tb = nw_fill_numpy(ref, hyp, 2.0, -1.0, -1.0)
        assert tb[1, 1] == TB_DIAG
        # gap cost 0 with sub -1: up and left tie, up must win
        _, tb = nw_fill_numpy(ref, hyp, 2.0, -1.0, 0.0)
        assert tb[1, 1] == TB_UP

    def test_identical_streams_score(self):
        ids = np.arange(6, dtype=np.int64)
        score, _ = nw_fill_numpy(ids, ids, 2.0, -1.0, -1.0)
        assert score[6, 6] == 12.0


class TestCsrNumpy:
    def test_matvec_matches_dense(self, rng):
        indptr, indices, values = random_csr(rng, 20, 30)
        w = rng.normal(size=30)
        dense = np.zeros((20, 30))
        for i in range(20):
            for k in range(indptr[i], indptr[i + 1]):
                dense[i, indices[k]] += values[k]
        np.testing.assert_allclose(
            csr_matvec_numpy(indptr, indices, values, w), dense @ w,
            rtol=1e-12, atol=1e-12)

    def test_rmatvec_matches_dense(self, rng):
        indptr, indices, values = random_csr(rng, 20, 30)
        r = rng.normal(size=20)
        dense = np.zeros((20, 30))
        for i in range(20):
            for k in range(indptr[i], indptr[i + 1]):
                dense[i, indices[k]] += values[k]
        np.testing.assert_allclose(
            csr_rmatvec_numpy(indptr, indices, values, r, 30), dense.T @ r,
            rtol=1e-12, atol=1e-12)


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
class TestNumbaParity:
    def test_nw_fill_identical(self, rng):
        from textdiar._kernels import nw_fill_numba
        for _ in range(30):
            n = int(rng.integers(1, 40))
            m = int(rng.integers(1, 40))
            ref = random_ids(rng, n, alphabet=5)
            hyp = random_ids(rng, m, alphabet=5)
            s0, t0 = nw_fill_numpy(ref, hyp, 2.0, -1.0, -1.0)
            s1, t1 = nw_fill_numba(ref, hyp, 2.0, -1.0, -1.0)
            np.testing.assert_array_equal(s0, s1)
            np.testing.assert_array_equal(t0, t1)

    def test_csr_products_close(self, rng):
        from textdiar._kernels import csr_matvec_numba, csr_rmatvec_numba
        indptr, indices, values = random_csr(rng, 40, 25)
        w = rng.normal(size=25)
        r = rng.normal(size=40)
        np.testing.assert_allclose(
            csr_matvec_numba(indptr, indices, values, w),
            csr_matvec_numpy(indptr, indices, values, w), rtol=1e-12)
        np.testing.assert_allclose(
            csr_rmatvec_numba(indptr, indices, values, r, 25),
            csr_rmatvec_numpy(indptr, indices, values, r, 25), rtol=1e-12)


class TestBackendSelection:
    def _probe(self, env_value):
        code = ("import textdiar._kernels as k;"
                "print(k.NUMBA_ENABLED, k.nw_fill is k.nw_fill_numpy,"
                " k.csr_matvec is k.csr_matvec_numpy)")
        env = dict(os.environ)
        if env_value is None:
            env.pop("TEXTDIAR_NUMBA", None)
        else:
            env["TEXTDIAR_NUMBA"] = env_value
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        return out.stdout.split()

    def test_flag_disables_numba(self):
        assert self._probe("0") == ["False", "True", "True"]

    @pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
    def test_flag_enables_numba(self):
        assert self._probe("1") == ["True", "False", "False"]

    def test_selected_kernels_run(self):
        # whichever backend this process picked must produce valid output
        ref = np.array([1, 2, 3], dtype=np.int64)
        score, tb = nw_fill(ref, ref, 2.0, -1.0, -1.0)
        assert score[3, 3] == 6.0
        indptr = np.array([0, 1], dtype=np.int64)
        got = csr_matvec(indptr, np.array([0], dtype=np.int64),
                         np.array([2.0]), np.array([3.0]))
        np.testing.assert_allclose(got, [6.0])
        got = csr_rmatvec(indptr, np.array([0], dtype=np.int64),
                          np.array([2.0]), np.array([3.0]), 1)
        np.testing.assert_allclose(got, [6.0])
