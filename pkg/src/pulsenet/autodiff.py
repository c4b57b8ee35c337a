"""Minimal reverse-mode autodiff over NumPy arrays.

Only the operations the pulse classifiers need: 1D convolution (through the
kernel backends), elementwise arithmetic, ReLU, max/average pooling, batch
norm, affine layers and the two classification losses.  Graph nodes record
a backward closure; `Tensor.backward()` runs the reverse sweep in
topological order.

Gradients accumulate with plain `+=`, so a parameter used several times in
one forward pass (e.g. a complex kernel entering two of the four real
convolutions) collects contributions from every use.
"""
import contextlib

import numpy as np

from . import kernels

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction (evaluation passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.ndim != 0:
            raise ValueError("backward() expects a scalar loss tensor")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones((), dtype=self.data.dtype)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _accum(t, g):
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad += g


def _node(data, parents, backward):
    """Wrap an op result; drops the graph when grads are off or unneeded."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# primitive ops


def conv1d(x, w, stride=1, pad=0):
    """Real 1D cross-correlation: x (B,Ci,L), w (Co,Ci,M) -> (B,Co,Lo)."""
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError(
            f"conv1d channel mismatch: input has {x.data.shape[1]} channels "
            f"(axis 1), kernel expects {w.data.shape[1]}"
        )
    xd, wd = x.data, w.data
    l_in, m = xd.shape[2], wd.shape[2]
    y = kernels.conv1d_fwd(xd, wd, stride, pad)

    def backward(gy):
        gy = np.ascontiguousarray(gy)
        if x.requires_grad:
            _accum(x, kernels.conv1d_bwd_x(gy, wd, stride, pad, l_in))
        if w.requires_grad:
            _accum(w, kernels.conv1d_bwd_w(xd, gy, stride, pad, m))

    return _node(y, (x, w), backward)


def add(a, b):
    def backward(g):
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, g)

    return _node(a.data + b.data, (a, b), backward)


def sub(a, b):
    def backward(g):
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, -g)

    return _node(a.data - b.data, (a, b), backward)


def mul(a, b):
    def backward(g):
        if a.requires_grad:
            _accum(a, g * b.data)
        if b.requires_grad:
            _accum(b, g * a.data)

    return _node(a.data * b.data, (a, b), backward)


def scale(x, s):
    def backward(g):
        if x.requires_grad:
            _accum(x, g * s)

    return _node(x.data * s, (x,), backward)


def bias_add(x, b):
    """x (B,C,L) plus per-channel bias b (C,)."""

    def backward(g):
        if x.requires_grad:
            _accum(x, g)
        if b.requires_grad:
            _accum(b, g.sum(axis=(0, 2)))

    return _node(x.data + b.data[None, :, None], (x, b), backward)


def relu(x):
    mask = x.data > 0  # subgradient at 0 is 0

    def backward(g):
        if x.requires_grad:
            _accum(x, g * mask)

    return _node(np.where(mask, x.data, 0), (x,), backward)


def maxpool1d(x, size=3, stride=2, pad=1):
    b, c, l = x.data.shape
    fill = np.finfo(x.data.dtype).min
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)), constant_values=fill)
    win = np.lib.stride_tricks.sliding_window_view(xp, size, axis=2)[:, :, ::stride, :]
    idx = win.argmax(axis=3)
    out = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]
    lo = out.shape[2]

    def backward(g):
        if not x.requires_grad:
            return
        gxp = np.zeros((b, c, l + 2 * pad), dtype=g.dtype)
        pos = idx + np.arange(lo)[None, None, :] * stride
        bi = np.arange(b)[:, None, None]
        ci = np.arange(c)[None, :, None]
        np.add.at(gxp, (bi, ci, pos), g)
        _accum(x, np.ascontiguousarray(gxp[:, :, pad : pad + l]))

    return _node(np.ascontiguousarray(out), (x,), backward)


def global_avg_pool(x):
    """Mean over the length axis: (B,C,L) -> (B,C)."""
    l = x.data.shape[2]

    def backward(g):
        if x.requires_grad:
            _accum(x, np.broadcast_to(g[:, :, None] / l, x.data.shape).astype(g.dtype))

    return _node(x.data.mean(axis=2), (x,), backward)


def sum_all(x):
    """Reduce a tensor to the scalar sum of its elements."""

    def backward(g):
        if x.requires_grad:
            _accum(x, np.full(x.data.shape, g, dtype=x.data.dtype))

    return _node(np.asarray(x.data.sum(), dtype=x.data.dtype), (x,), backward)


def concat(parts, axis=1):
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _accum(p, np.ascontiguousarray(g[tuple(sl)]))

    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward)


def linear(x, w, b=None):
    """x (B,F) @ w (F,K) [+ b (K,)]."""
    y = x.data @ w.data
    if b is not None:
        y = y + b.data

    def backward(g):
        if x.requires_grad:
            _accum(x, g @ w.data.T)
        if w.requires_grad:
            _accum(w, x.data.T @ g)
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _node(y, parents, backward)


# ---------------------------------------------------------------------------
# batch norm


def batchnorm_train(x, gamma, beta, eps=1e-5):
    """Per-channel normalization of (B,C,L) over (batch, length).

    Returns (y, batch_mean, batch_var); the caller owns the running-stat
    update.  Batch statistics use the biased variance.
    """
    b, c, l = x.data.shape
    if b < 2:
        raise ValueError("batch norm in train mode needs batch size >= 2")
    n = b * l
    mu = x.data.mean(axis=(0, 2))
    xc = x.data - mu[None, :, None]
    var = np.mean(xc * xc, axis=(0, 2))
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv[None, :, None]
    y = gamma.data[None, :, None] * xhat + beta.data[None, :, None]

    def backward(g):
        if gamma.requires_grad:
            _accum(gamma, np.sum(g * xhat, axis=(0, 2)))
        if beta.requires_grad:
            _accum(beta, np.sum(g, axis=(0, 2)))
        if x.requires_grad:
            gh = g * gamma.data[None, :, None]
            m1 = gh.mean(axis=(0, 2))[None, :, None]
            m2 = np.mean(gh * xhat, axis=(0, 2))[None, :, None]
            _accum(x, inv[None, :, None] * (gh - m1 - xhat * m2))

    node = _node(y, (x, gamma, beta), backward)
    return node, mu, var


def batchnorm_eval(x, gamma, beta, mean, var, eps=1e-5):
    inv = 1.0 / np.sqrt(var + eps)
    a = gamma.data * inv
    y = a[None, :, None] * (x.data - mean[None, :, None]) + beta.data[None, :, None]
    xhat = (x.data - mean[None, :, None]) * inv[None, :, None]

    def backward(g):
        if gamma.requires_grad:
            _accum(gamma, np.sum(g * xhat, axis=(0, 2)))
        if beta.requires_grad:
            _accum(beta, np.sum(g, axis=(0, 2)))
        if x.requires_grad:
            _accum(x, g * a[None, :, None])

    return _node(y, (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# losses


def _check_finite(z, what):
    if not np.isfinite(z).all():
        raise ValueError(f"non-finite values in {what}")


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy; labels are integer class ids (B,)."""
    z = logits.data
    _check_finite(z, "logits")
    labels = np.asarray(labels)
    b = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    ez = np.exp(z - m)
    sz = ez.sum(axis=1, keepdims=True)
    logp = (z - m) - np.log(sz)
    loss = -logp[np.arange(b), labels].mean()

    def backward(g):
        if logits.requires_grad:
            gz = ez / sz
            gz[np.arange(b), labels] -= 1.0
            _accum(logits, (g * gz / b).astype(z.dtype))

    return _node(np.asarray(loss, dtype=z.dtype), (logits,), backward)


def bce_with_logits(logits, targets):
    """Mean binary cross-entropy over every logit; targets in [0,1]."""
    z = logits.data
    _check_finite(z, "logits")
    y = np.asarray(targets, dtype=z.dtype)
    if y.shape != z.shape:
        raise ValueError(f"targets shape {y.shape} != logits shape {z.shape}")
    # log(1 + e^-|z|) + max(z,0) - z*y, elementwise, stable for large |z|
    loss = (np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))).mean()

    def backward(g):
        if logits.requires_grad:
            sig = sigmoid(z)
            _accum(logits, (g * (sig - y) / z.size).astype(z.dtype))

    return _node(np.asarray(loss, dtype=z.dtype), (logits,), backward)


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    m = z.max(axis=1, keepdims=True)
    ez = np.exp(z - m)
    return ez / ez.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# optimizers


class SGD:
    def __init__(self, params, lr, momentum=0.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._vel = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        for p, v in zip(self.params, self._vel):
            if p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            p.data -= self.lr * v


class Adam:
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
