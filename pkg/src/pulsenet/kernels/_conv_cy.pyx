# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled 1D cross-correlation kernels (im2col packing + BLAS GEMM).

All three kernels (forward, input gradient, weight gradient) reduce the
convolution to a single GEMM on a packed matrix.  Packing and unpacking run
as tight C loops over contiguous rows; the contraction itself goes through
OpenBLAS, so throughput tracks GEMM speed instead of scalar loop speed.

Everything is deterministic: the packing order is fixed and each GEMM is a
single BLAS call.
"""
import numpy as np
cimport numpy as cnp
cimport cython
from scipy.linalg.cython_blas cimport sgemm, dgemm

ctypedef fused real_t:
    float
    double


cdef inline void _gemm_rm(bint ta, bint tb, int m, int n, int k,
                          real_t *a, int lda, real_t *b, int ldb,
                          real_t *c, int ldc) noexcept nogil:
    # Row-major C(m,n) = op(A) @ op(B) via the column-major operand swap:
    # C^T = op(B)^T @ op(A)^T.
    cdef real_t one = 1.0, zero = 0.0
    cdef char *fta = "T" if ta else "N"
    cdef char *ftb = "T" if tb else "N"
    if real_t is float:
        sgemm(ftb, fta, &n, &m, &k, &one, b, &ldb, a, &lda, &zero, c, &ldc)
    else:
        dgemm(ftb, fta, &n, &m, &k, &one, b, &ldb, a, &lda, &zero, c, &ldc)


cdef void _pack_windows(real_t[:, :, ::1] x, real_t[:, ::1] pack,
                        int stride, int pad, int lo) noexcept nogil:
    # pack[ci*M + m, b*Lo + t] = x[b, ci, t*stride + m - pad], zero outside.
    cdef int B = x.shape[0], Ci = x.shape[1], L = x.shape[2]
    cdef int M = pack.shape[0] // Ci
    cdef int b, ci, m, t, t0, t1
    cdef const real_t *xr
    cdef real_t *pr
    for b in range(B):
        for ci in range(Ci):
            xr = &x[b, ci, 0]
            for m in range(M):
                pr = &pack[ci * M + m, b * lo]
                t0 = 0
                if m < pad:
                    t0 = (pad - m + stride - 1) // stride
                t1 = (L - 1 - m + pad) // stride + 1
                if t1 > lo:
                    t1 = lo
                if t1 < t0:
                    t1 = t0
                for t in range(t0):
                    pr[t] = 0.0
                if stride == 1:
                    for t in range(t0, t1):
                        pr[t] = xr[t + m - pad]
                else:
                    for t in range(t0, t1):
                        pr[t] = xr[t * stride + m - pad]
                for t in range(t1, lo):
                    pr[t] = 0.0


def conv1d_fwd(real_t[:, :, ::1] x, real_t[:, :, ::1] w, int stride, int pad):
    """Cross-correlate x (B, Ci, L) with w (Co, Ci, M) -> y (B, Co, Lo)."""
    cdef int B = x.shape[0], Ci = x.shape[1], L = x.shape[2]
    cdef int Co = w.shape[0], M = w.shape[2]
    cdef int lo = (L + 2 * pad - M) // stride + 1
    cdef int K = Ci * M, N = B * lo
    cdef int b, co, t
    if real_t is float:
        dt = np.float32
    else:
        dt = np.float64
    pack_arr = np.empty((K, N), dtype=dt)
    ymat_arr = np.empty((Co, N), dtype=dt)
    y_arr = np.empty((B, Co, lo), dtype=dt)
    cdef real_t[:, ::1] pack = pack_arr
    cdef real_t[:, ::1] ymat = ymat_arr
    cdef real_t[:, :, ::1] y = y_arr
    cdef const real_t *src
    cdef real_t *dst
    with nogil:
        _pack_windows(x, pack, stride, pad, lo)
        # ymat(Co, N) = w(Co, K) @ pack(K, N)
        _gemm_rm(False, False, Co, N, K, &w[0, 0, 0], K, &pack[0, 0], N,
                 &ymat[0, 0], N)
        for b in range(B):
            for co in range(Co):
                src = &ymat[co, b * lo]
                dst = &y[b, co, 0]
                for t in range(lo):
                    dst[t] = src[t]
    return y_arr


def conv1d_bwd_x(real_t[:, :, ::1] gy, real_t[:, :, ::1] w, int stride,
                 int pad, int l_in):
    """Gradient of conv1d_fwd w.r.t. x; gy is (B, Co, Lo)."""
    cdef int B = gy.shape[0], Co = gy.shape[1], lo = gy.shape[2]
    cdef int Ci = w.shape[1], M = w.shape[2]
    cdef int K = Ci * M, N = B * lo
    cdef int b, co, ci, m, t, t0, t1
    if real_t is float:
        dt = np.float32
    else:
        dt = np.float64
    gymat_arr = np.empty((Co, N), dtype=dt)
    gpack_arr = np.empty((K, N), dtype=dt)
    gx_arr = np.zeros((B, Ci, l_in), dtype=dt)
    cdef real_t[:, ::1] gymat = gymat_arr
    cdef real_t[:, ::1] gpack = gpack_arr
    cdef real_t[:, :, ::1] gx = gx_arr
    cdef const real_t *src
    cdef real_t *dst
    with nogil:
        for b in range(B):
            for co in range(Co):
                src = &gy[b, co, 0]
                dst = &gymat[co, b * lo]
                for t in range(lo):
                    dst[t] = src[t]
        # gpack(K, N) = w(Co, K)^T @ gymat(Co, N)
        _gemm_rm(True, False, K, N, Co, &w[0, 0, 0], K, &gymat[0, 0], N,
                 &gpack[0, 0], N)
        # col2im scatter-add, sequential per (b, ci) so accumulation order
        # is fixed
        for b in range(B):
            for ci in range(Ci):
                dst = &gx[b, ci, 0]
                for m in range(M):
                    src = &gpack[ci * M + m, b * lo]
                    t0 = 0
                    if m < pad:
                        t0 = (pad - m + stride - 1) // stride
                    t1 = (l_in - 1 - m + pad) // stride + 1
                    if t1 > lo:
                        t1 = lo
                    if t1 < t0:
                        t1 = t0
                    if stride == 1:
                        for t in range(t0, t1):
                            dst[t + m - pad] += src[t]
                    else:
                        for t in range(t0, t1):
                            dst[t * stride + m - pad] += src[t]
    return gx_arr


def conv1d_bwd_w(real_t[:, :, ::1] x, real_t[:, :, ::1] gy, int stride,
                 int pad, int m_taps):
    """Gradient of conv1d_fwd w.r.t. w; returns (Co, Ci, M)."""
    cdef int B = x.shape[0], Ci = x.shape[1], L = x.shape[2]
    cdef int Co = gy.shape[1], lo = gy.shape[2]
    cdef int K = Ci * m_taps, N = B * lo
    cdef int b, co, t
    if real_t is float:
        dt = np.float32
    else:
        dt = np.float64
    pack_arr = np.empty((K, N), dtype=dt)
    gymat_arr = np.empty((Co, N), dtype=dt)
    gw_arr = np.empty((Co, Ci, m_taps), dtype=dt)
    cdef real_t[:, ::1] pack = pack_arr
    cdef real_t[:, ::1] gymat = gymat_arr
    cdef real_t[:, :, ::1] gw = gw_arr
    cdef const real_t *src
    cdef real_t *dst
    with nogil:
        _pack_windows(x, pack, stride, pad, lo)
        for b in range(B):
            for co in range(Co):
                src = &gy[b, co, 0]
                dst = &gymat[co, b * lo]
                for t in range(lo):
                    dst[t] = src[t]
        # gw(Co, K) = gymat(Co, N) @ pack(K, N)^T
        _gemm_rm(False, True, Co, K, N, &gymat[0, 0], N, &pack[0, 0], N,
                 &gw[0, 0, 0], K)
    return gw_arr
