#!/usr/bin/env python3
"""Benchmark the compiled convolution kernels against the NumPy fallback.

Covers the shapes a CResNet-30 (width 8, D=1024, batch 128) actually runs,
for forward, input-gradient and weight-gradient, then times one full
training step of the network under each backend.

Usage: python benchmarks/bench_conv.py [--batch 128] [--budget 0.3]
"""
import argparse
import time

import numpy as np

from pulsenet import autodiff as ad
from pulsenet import kernels
from pulsenet.kernels import available_backends
from pulsenet.resnet import ModelConfig, build_resnet


def timeit(fn, budget):
    fn()
    t0 = time.perf_counter()
    n = 0
    while time.perf_counter() - t0 < budget:
        fn()
        n += 1
    return (time.perf_counter() - t0) / n


def bench_kernels(batch, budget):
    shapes = [
        # (label, Ci, Co, L, M, stride, pad) — complex convs run these as 4 real calls
        ("stem", 1, 8, 1024, 9, 2, 4),
        ("stage1", 8, 8, 256, 3, 1, 1),
        ("stage2", 16, 16, 128, 3, 1, 1),
        ("stage3", 32, 32, 64, 3, 1, 1),
        ("stage4", 64, 64, 32, 3, 1, 1),
    ]
    backends = available_backends()
    print(f"batch={batch}; GFLOP/s per backend (fwd / bwd_x / bwd_w)\n")
    header = f"{'shape':<8}" + "".join(f"{name:>30}" for name in backends)
    print(header)
    for label, ci, co, l, m, stride, pad in shapes:
        rng = np.random.default_rng(0)
        x = rng.standard_normal((batch, ci, l)).astype(np.float32)
        w = rng.standard_normal((co, ci, m)).astype(np.float32)
        lo = kernels.out_length(l, m, stride, pad)
        gy = rng.standard_normal((batch, co, lo)).astype(np.float32)
        flops = 2 * batch * ci * co * lo * m
        row = f"{label:<8}"
        for impl in backends.values():
            t_f = timeit(lambda: impl.conv1d_fwd(x, w, stride, pad), budget)
            t_x = timeit(lambda: impl.conv1d_bwd_x(gy, w, stride, pad, l), budget)
            t_w = timeit(lambda: impl.conv1d_bwd_w(x, gy, stride, pad, m), budget)
            row += f"{flops/t_f/1e9:>9.1f} /{flops/t_x/1e9:>8.1f} /{flops/t_w/1e9:>8.1f}"
        print(row)


def bench_train_step(batch, budget):
    cfg = ModelConfig("complex", 30, 8, 9, 1024, 17)
    rng = np.random.default_rng(1)
    xb = (rng.standard_normal((batch, 1024)) + 1j * rng.standard_normal((batch, 1024))).astype(
        np.complex64
    )
    labels = rng.integers(0, 17, batch)
    print("\nfull CResNet-30 (width 8, D=1024) training step:")
    for name in available_backends():
        kernels.set_backend(name)
        model = build_resnet(cfg, seed=0)
        opt = ad.Adam(list(model.parameters()), 1e-3)

        def step():
            opt.zero_grad()
            loss = ad.cross_entropy(model.forward(xb, train=True), labels)
            loss.backward()
            opt.step()

        dt = timeit(step, max(budget, 1.0))
        print(f"  {name:<9} {dt:6.3f} s/step  ({dt / batch * 1e3:.2f} ms/sample)")
    kernels.set_backend("compiled" if "compiled" in available_backends() else "numpy")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--budget", type=float, default=0.3, help="seconds per timing loop")
    args = parser.parse_args()
    bench_kernels(args.batch, args.budget)
    bench_train_step(args.batch, args.budget)


if __name__ == "__main__":
    main()
