"""Pure-NumPy fallback for the 1D convolution kernels.

Same contract as the compiled backend: `conv1d_fwd`, `conv1d_bwd_x` and
`conv1d_bwd_w` over C-contiguous float32/float64 arrays in (batch, channel,
length) layout.  The contraction goes through einsum so it still ends up in
BLAS, just with more temporary copies than the compiled path.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad)))


def out_length(l_in, m, stride, pad):
    return (l_in + 2 * pad - m) // stride + 1


def conv1d_fwd(x, w, stride, pad):
    """Cross-correlate x (B, Ci, L) with w (Co, Ci, M) -> (B, Co, Lo)."""
    m = w.shape[2]
    xp = _pad(x, pad)
    win = sliding_window_view(xp, m, axis=2)
    if stride > 1:
        win = np.ascontiguousarray(win[:, :, ::stride, :])
    return np.einsum("bilm,oim->bol", win, w, optimize=True)


def conv1d_bwd_x(gy, w, stride, pad, l_in):
    """Gradient w.r.t. the input; gy is (B, Co, Lo)."""
    b, _, lo = gy.shape
    ci, m = w.shape[1], w.shape[2]
    gxp = np.zeros((b, ci, l_in + 2 * pad), dtype=gy.dtype)
    for tap in range(m):
        # every output position t pulled from input position t*stride + tap
        contrib = np.einsum("bol,oi->bil", gy, w[:, :, tap], optimize=True)
        gxp[:, :, tap : tap + (lo - 1) * stride + 1 : stride] += contrib
    if pad == 0:
        return gxp
    return np.ascontiguousarray(gxp[:, :, pad : pad + l_in])


def conv1d_bwd_w(x, gy, stride, pad, m_taps):
    """Gradient w.r.t. the weights; returns (Co, Ci, M)."""
    xp = _pad(x, pad)
    win = sliding_window_view(xp, m_taps, axis=2)
    if stride > 1:
        win = np.ascontiguousarray(win[:, :, ::stride, :])
    lo = gy.shape[2]
    return np.einsum("bol,bilm->oim", gy, win[:, :, :lo, :], optimize=True)
