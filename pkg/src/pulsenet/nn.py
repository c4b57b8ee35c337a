"""Network layers over the autodiff core.

Complex features travel as a `ComplexTensor` (a pair of real autodiff
tensors).  A complex multiply ties four real products to two learnable
reals per tap:

    k x = (k_r x_r - k_i x_i) + i (k_i x_r + k_r x_i)

so `ComplexConv1d` is four real convolutions sharing `k_r`/`k_i`, and the
backward pass falls out of the composition.  Split activations and split
batch norm apply the real operation to each plane independently.
"""
import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class ComplexTensor:
    """Split storage: real plane + imaginary plane, same shape."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        if re.data.shape != im.data.shape:
            raise ValueError(f"plane shape mismatch: {re.data.shape} vs {im.data.shape}")
        self.re = re
        self.im = im

    @property
    def shape(self):
        return self.re.data.shape

    @classmethod
    def from_complex(cls, arr, dtype=np.float32, requires_grad=False):
        re = Tensor(np.ascontiguousarray(arr.real, dtype=dtype), requires_grad)
        im = Tensor(np.ascontiguousarray(arr.imag, dtype=dtype), requires_grad)
        return cls(re, im)

    def to_complex(self):
        return self.re.data + 1j * self.im.data


class Module:
    """Base layer.

    Parameters are Tensor attributes with requires_grad=True, buffers are
    ndarray attributes, children are Module attributes (or lists of them);
    all are discovered by attribute walk in sorted-name order so iteration
    is deterministic.
    """

    def named_parameters(self, prefix=""):
        for name, obj in sorted(vars(self).items()):
            full = f"{prefix}{name}"
            if isinstance(obj, Tensor) and obj.requires_grad:
                yield full, obj
            elif isinstance(obj, Module):
                yield from obj.named_parameters(f"{full}.")
            elif isinstance(obj, list):
                for i, item in enumerate(obj):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def named_buffers(self, prefix=""):
        for name, obj in sorted(vars(self).items()):
            full = f"{prefix}{name}"
            if isinstance(obj, np.ndarray):
                yield full, obj
            elif isinstance(obj, Module):
                yield from obj.named_buffers(f"{full}.")
            elif isinstance(obj, list):
                for i, item in enumerate(obj):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{full}.{i}.")

    def state_arrays(self):
        """(name, array) for everything a checkpoint must capture."""
        for name, p in self.named_parameters():
            yield name, p.data
        for name, b in self.named_buffers():
            yield name, b


class Conv1d(Module):
    """Plain real convolution; covers both the 1-channel and the untied
    2-channel (4 parameters per tap pair) arithmetic modes."""

    def __init__(self, in_ch, out_ch, m, stride=1, pad=None, rng=None, dtype=np.float32):
        self.stride = stride
        self.pad = m // 2 if pad is None else pad
        rng = rng or np.random.default_rng(0)
        std = np.sqrt(2.0 / (in_ch * m))
        self.weight = Tensor(rng.normal(0.0, std, (out_ch, in_ch, m)).astype(dtype), True)

    def __call__(self, x, train=False):
        return ad.conv1d(x, self.weight, self.stride, self.pad)


class ComplexConv1d(Module):
    """Tied complex convolution: 2 real parameters per complex tap."""

    def __init__(self, in_ch, out_ch, m, stride=1, pad=None, rng=None, dtype=np.float32):
        self.stride = stride
        self.pad = m // 2 if pad is None else pad
        rng = rng or np.random.default_rng(0)
        std = np.sqrt(1.0 / (in_ch * m))
        self.k_real = Tensor(rng.normal(0.0, std, (out_ch, in_ch, m)).astype(dtype), True)
        self.k_imag = Tensor(rng.normal(0.0, std, (out_ch, in_ch, m)).astype(dtype), True)

    def __call__(self, x, train=False):
        rr = ad.conv1d(x.re, self.k_real, self.stride, self.pad)
        ii = ad.conv1d(x.im, self.k_imag, self.stride, self.pad)
        ri = ad.conv1d(x.re, self.k_imag, self.stride, self.pad)
        ir = ad.conv1d(x.im, self.k_real, self.stride, self.pad)
        return ComplexTensor(ad.sub(rr, ii), ad.add(ri, ir))


class BatchNorm1d(Module):
    def __init__(self, ch, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(ch, dtype=dtype), True)
        self.beta = Tensor(np.zeros(ch, dtype=dtype), True)
        self.running_mean = np.zeros(ch, dtype=dtype)
        self.running_var = np.ones(ch, dtype=dtype)

    def __call__(self, x, train=False):
        if train:
            y, mu, var = ad.batchnorm_train(x, self.gamma, self.beta, self.eps)
            self.running_mean += self.momentum * (mu.astype(self.running_mean.dtype) - self.running_mean)
            self.running_var += self.momentum * (var.astype(self.running_var.dtype) - self.running_var)
            return y
        return ad.batchnorm_eval(x, self.gamma, self.beta, self.running_mean, self.running_var, self.eps)


class SplitBatchNorm(Module):
    """Standard batch norm applied separately to real and imaginary parts."""

    def __init__(self, ch, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.bn_re = BatchNorm1d(ch, momentum, eps, dtype)
        self.bn_im = BatchNorm1d(ch, momentum, eps, dtype)

    def __call__(self, x, train=False):
        return ComplexTensor(self.bn_re(x.re, train), self.bn_im(x.im, train))


class ReLU(Module):
    def __call__(self, x, train=False):
        return ad.relu(x)


class SplitReLU(Module):
    """ReLU on each plane independently."""

    def __call__(self, x, train=False):
        return ComplexTensor(ad.relu(x.re), ad.relu(x.im))


class MaxPool1d(Module):
    def __init__(self, size=3, stride=2, pad=1):
        self.size = size
        self.stride = stride
        self.pad = pad

    def __call__(self, x, train=False):
        return ad.maxpool1d(x, self.size, self.stride, self.pad)


class SplitMaxPool1d(Module):
    def __init__(self, size=3, stride=2, pad=1):
        self.size = size
        self.stride = stride
        self.pad = pad

    def __call__(self, x, train=False):
        return ComplexTensor(
            ad.maxpool1d(x.re, self.size, self.stride, self.pad),
            ad.maxpool1d(x.im, self.size, self.stride, self.pad),
        )


class Linear(Module):
    def __init__(self, in_f, out_f, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        std = np.sqrt(1.0 / in_f)
        self.weight = Tensor(rng.normal(0.0, std, (in_f, out_f)).astype(dtype), True)
        self.bias = Tensor(np.zeros(out_f, dtype=dtype), True)

    def __call__(self, x, train=False):
        return ad.linear(x, self.weight, self.bias)


def split_relu(x):
    """Functional form of SplitReLU on a ComplexTensor."""
    return ComplexTensor(ad.relu(x.re), ad.relu(x.im))
