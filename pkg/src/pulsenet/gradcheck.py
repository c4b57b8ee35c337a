"""Central-finite-difference verification of every registered layer.

Each check builds a random instance of one layer, projects its output onto
a fixed random direction to get a scalar, and compares the reverse-mode
gradient of every input/parameter against central differences.  The error
metric per array is

    ||g_ad - g_fd||_inf / max(||g_ad||_inf, ||g_fd||_inf, floor)

The finite-difference step uses the actually-realized perturbation
(xp - xm, measured in float64) as the denominator, which removes the
quantization error of adding h in low precision.
"""
import time

import numpy as np

from . import autodiff as ad
from . import nn
from .seeding import rng_from


def _fd_step(dtype):
    return 1e-2 if dtype == np.float32 else 1e-5


def _rel_err(g_ad, g_fd, floor=1e-12):
    denom = max(np.abs(g_ad).max(initial=0.0), np.abs(g_fd).max(initial=0.0), floor)
    return float(np.abs(g_ad - g_fd).max(initial=0.0) / denom)


def check_case(tensors, forward, dtype):
    """Compare backprop and central differences for one built case.

    tensors: list of ad.Tensor leaves (requires_grad=True) to test.
    forward: () -> scalar ad.Tensor, re-runnable with mutated leaf data.
    """
    loss = forward()
    loss.backward()
    grads = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    for t in tensors:
        t.grad = None
    h0 = _fd_step(dtype)
    worst = 0.0
    with ad.no_grad():
        for t, g_ad in zip(tensors, grads):
            flat = t.data.reshape(-1)
            g_fd = np.zeros(flat.shape, dtype=np.float64)
            for i in range(flat.size):
                orig = flat[i]
                h = h0 * (1.0 + abs(float(orig)))
                flat[i] = orig + h
                xp = float(flat[i])
                fp = float(forward().data)
                flat[i] = orig - h
                xm = float(flat[i])
                fm = float(forward().data)
                flat[i] = orig
                g_fd[i] = (fp - fm) / (xp - xm)
            worst = max(worst, _rel_err(g_ad.reshape(-1).astype(np.float64), g_fd))
    return worst


def _proj_loss(out, r):
    """Scalar loss = sum(out * fixed random direction)."""
    if isinstance(out, nn.ComplexTensor):
        return ad.add(_proj_loss(out.re, r[0]), _proj_loss(out.im, r[1]))
    return ad.sum_all(ad.mul(out, ad.Tensor(np.asarray(r))))


# ---------------------------------------------------------------------------
# registered checks; each returns (leaf tensors, forward closure)


def _rand(rng, shape, dtype, margin=0.0):
    x = rng.standard_normal(shape)
    if margin:
        x = np.where(np.abs(x) < margin, np.sign(x) * margin + x, x)
    return x.astype(dtype)


def _case_complex_conv1d(rng, dtype):
    b, ci, co = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 4)
    m = int(rng.choice([1, 3, 5]))
    l = int(rng.integers(m, m + 10))
    stride = int(rng.choice([1, 2]))
    x = nn.ComplexTensor(
        ad.Tensor(_rand(rng, (b, ci, l), dtype), True),
        ad.Tensor(_rand(rng, (b, ci, l), dtype), True),
    )
    kr = ad.Tensor(_rand(rng, (co, ci, m), dtype), True)
    ki = ad.Tensor(_rand(rng, (co, ci, m), dtype), True)
    lo = (l + 2 * (m // 2) - m) // stride + 1
    r = (_rand(rng, (b, co, lo), dtype), _rand(rng, (b, co, lo), dtype))

    def forward():
        rr = ad.conv1d(x.re, kr, stride, m // 2)
        ii = ad.conv1d(x.im, ki, stride, m // 2)
        ri = ad.conv1d(x.re, ki, stride, m // 2)
        ir = ad.conv1d(x.im, kr, stride, m // 2)
        out = nn.ComplexTensor(ad.sub(rr, ii), ad.add(ri, ir))
        return _proj_loss(out, r)

    return [x.re, x.im, kr, ki], forward


def _case_real_conv1d_2ch(rng, dtype):
    b, co = rng.integers(1, 4), rng.integers(1, 5)
    m = int(rng.choice([1, 3, 5]))
    l = int(rng.integers(m, m + 10))
    stride = int(rng.choice([1, 2]))
    x = ad.Tensor(_rand(rng, (b, 2, l), dtype), True)
    w = ad.Tensor(_rand(rng, (co, 2, m), dtype), True)
    lo = (l + 2 * (m // 2) - m) // stride + 1
    r = _rand(rng, (b, co, lo), dtype)

    def forward():
        return _proj_loss(ad.conv1d(x, w, stride, m // 2), r)

    return [x, w], forward


def _case_split_relu(rng, dtype):
    shape = (int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 10)))
    # keep activations away from the kink so finite differences are valid
    x = nn.ComplexTensor(
        ad.Tensor(_rand(rng, shape, dtype, margin=0.2), True),
        ad.Tensor(_rand(rng, shape, dtype, margin=0.2), True),
    )
    r = (_rand(rng, shape, dtype), _rand(rng, shape, dtype))

    def forward():
        return _proj_loss(nn.split_relu(x), r)

    return [x.re, x.im], forward


def _case_split_batchnorm(rng, dtype):
    b = int(rng.integers(2, 5))
    c = int(rng.integers(1, 4))
    l = int(rng.integers(2, 9))
    x = nn.ComplexTensor(
        ad.Tensor(_rand(rng, (b, c, l), dtype), True),
        ad.Tensor(_rand(rng, (b, c, l), dtype), True),
    )
    gr = ad.Tensor((1 + 0.1 * _rand(rng, (c,), dtype)).astype(dtype), True)
    br = ad.Tensor(_rand(rng, (c,), dtype), True)
    gi = ad.Tensor((1 + 0.1 * _rand(rng, (c,), dtype)).astype(dtype), True)
    bi = ad.Tensor(_rand(rng, (c,), dtype), True)
    r = (_rand(rng, (b, c, l), dtype), _rand(rng, (b, c, l), dtype))

    def forward():
        yr, _, _ = ad.batchnorm_train(x.re, gr, br)
        yi, _, _ = ad.batchnorm_train(x.im, gi, bi)
        return _proj_loss(nn.ComplexTensor(yr, yi), r)

    return [x.re, x.im, gr, br, gi, bi], forward


def _case_batchnorm(rng, dtype):
    b = int(rng.integers(2, 5))
    c = int(rng.integers(1, 4))
    l = int(rng.integers(2, 9))
    x = ad.Tensor(_rand(rng, (b, c, l), dtype), True)
    g = ad.Tensor((1 + 0.1 * _rand(rng, (c,), dtype)).astype(dtype), True)
    be = ad.Tensor(_rand(rng, (c,), dtype), True)
    r = _rand(rng, (b, c, l), dtype)

    def forward():
        y, _, _ = ad.batchnorm_train(x, g, be)
        return _proj_loss(y, r)

    return [x, g, be], forward


def _case_linear(rng, dtype):
    b = int(rng.integers(1, 5))
    fi = int(rng.integers(1, 7))
    fo = int(rng.integers(1, 7))
    x = ad.Tensor(_rand(rng, (b, fi), dtype), True)
    w = ad.Tensor(_rand(rng, (fi, fo), dtype), True)
    bias = ad.Tensor(_rand(rng, (fo,), dtype), True)
    r = _rand(rng, (b, fo), dtype)

    def forward():
        return _proj_loss(ad.linear(x, w, bias), r)

    return [x, w, bias], forward


def _case_cross_entropy(rng, dtype):
    b = int(rng.integers(1, 5))
    k = int(rng.integers(2, 8))
    z = ad.Tensor(_rand(rng, (b, k), dtype), True)
    labels = rng.integers(0, k, b)

    def forward():
        return ad.cross_entropy(z, labels)

    return [z], forward


def _case_bce(rng, dtype):
    b = int(rng.integers(1, 5))
    k = int(rng.integers(1, 8))
    z = ad.Tensor(_rand(rng, (b, k), dtype), True)
    y = rng.integers(0, 2, (b, k)).astype(dtype)

    def forward():
        return ad.bce_with_logits(z, y)

    return [z], forward


def _case_maxpool1d(rng, dtype):
    b = int(rng.integers(1, 4))
    c = int(rng.integers(1, 4))
    l = int(rng.integers(4, 12))
    # resample until the top two values of every pooling window are separated
    # by well more than the FD step, so the argmax cannot flip
    for _ in range(100):
        vals = rng.uniform(-2.0, 2.0, (b, c, l)).astype(dtype)
        padded = np.pad(vals, ((0, 0), (0, 0), (1, 1)), constant_values=-1e9)
        win = np.lib.stride_tricks.sliding_window_view(padded, 3, axis=2)[:, :, ::2, :]
        top2 = np.sort(win, axis=3)[..., -2:]
        if np.min(top2[..., 1] - top2[..., 0]) > 0.2:
            break
    x = ad.Tensor(vals, True)
    lo = (l + 2 - 3) // 2 + 1
    r = _rand(rng, (b, c, lo), dtype)

    def forward():
        return _proj_loss(ad.maxpool1d(x, 3, 2, 1), r)

    return [x], forward


def _case_global_avg_pool(rng, dtype):
    b = int(rng.integers(1, 4))
    c = int(rng.integers(1, 4))
    l = int(rng.integers(2, 10))
    x = ad.Tensor(_rand(rng, (b, c, l), dtype), True)
    r = _rand(rng, (b, c), dtype)

    def forward():
        return _proj_loss(ad.global_avg_pool(x), r)

    return [x], forward


CHECKS = {
    "complex_conv1d": _case_complex_conv1d,
    "real_conv1d_2ch": _case_real_conv1d_2ch,
    "split_relu": _case_split_relu,
    "split_batchnorm": _case_split_batchnorm,
    "batchnorm": _case_batchnorm,
    "linear": _case_linear,
    "cross_entropy": _case_cross_entropy,
    "bce": _case_bce,
    "maxpool1d": _case_maxpool1d,
    "global_avg_pool": _case_global_avg_pool,
}

TOLERANCES = {np.dtype(np.float32): 1e-3, np.dtype(np.float64): 1e-6}


def grad_check(names=None, trials=20, dtype=np.float64, seed=0):
    """Run FD checks; returns {name: {"max_rel_err", "trials", "seconds"}}."""
    dtype = np.dtype(dtype).type
    names = list(CHECKS) if names is None else list(names)
    report = {}
    for j, name in enumerate(names):
        case = CHECKS[name]
        worst = 0.0
        t0 = time.perf_counter()
        for trial in range(trials):
            rng = rng_from(seed, j, trial)
            tensors, forward = case(rng, dtype)
            worst = max(worst, check_case(tensors, forward, dtype))
        report[name] = {
            "max_rel_err": worst,
            "trials": trials,
            "seconds": round(time.perf_counter() - t0, 3),
        }
    return report
