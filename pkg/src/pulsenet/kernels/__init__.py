"""Convolution kernel backends.

The compiled Cython extension is preferred when it imported cleanly; the
NumPy implementation is the fallback.  `PULSENET_KERNELS=numpy|compiled`
forces a backend (``compiled`` raises if the extension is unavailable).
`benchmarks/bench_conv.py` compares the two.
"""
import os

from . import numpy_backend

_requested = os.environ.get("PULSENET_KERNELS", "auto").lower()

if _requested in ("auto", "compiled"):
    try:
        from . import _conv_cy as _impl
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = numpy_backend
        BACKEND = "numpy"
elif _requested == "numpy":
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    raise ValueError(
        f"PULSENET_KERNELS={_requested!r}: expected 'auto', 'compiled' or 'numpy'"
    )

conv1d_fwd = _impl.conv1d_fwd
conv1d_bwd_x = _impl.conv1d_bwd_x
conv1d_bwd_w = _impl.conv1d_bwd_w
out_length = numpy_backend.out_length


def available_backends():
    out = {"numpy": numpy_backend}
    try:
        from . import _conv_cy
        out["compiled"] = _conv_cy
    except ImportError:
        pass
    return out


def set_backend(name):
    """Rebind the kernel entry points (benchmarking / tests)."""
    global _impl, BACKEND, conv1d_fwd, conv1d_bwd_x, conv1d_bwd_w
    impl = available_backends()[name]
    _impl, BACKEND = impl, name
    conv1d_fwd = impl.conv1d_fwd
    conv1d_bwd_x = impl.conv1d_bwd_x
    conv1d_bwd_w = impl.conv1d_bwd_w
