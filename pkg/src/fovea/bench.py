"""Wall-clock micro-benchmarks with MAC counts for context.

Timing is hardware-bound, so the report pairs each entry's median/p10/p90
wall times with its multiply-accumulate count where one is defined; cost
per MAC is then derivable on any machine.
"""

import time

import numpy as np

from . import kernels
from .analysis import cost_report
from .builders import build_hourglass54, build_squeeze_hourglass
from .graph import forward, init_weights


def _rng(seed=0):
    return np.random.default_rng(seed)


def _bench_conv3x3(size):
    x = _rng().normal(size=(1, 64, size, size)).astype(np.float32)
    w = _rng(1).normal(size=(64, 64, 3, 3)).astype(np.float32)
    spec = kernels.ConvSpec(64, 64, (3, 3), padding=1)
    macs = size * size * 64 * 64 * 9
    return (lambda: kernels.conv2d(x, w, None, spec)), macs


def _bench_dwconv3x3(size):
    x = _rng().normal(size=(1, 64, size, size)).astype(np.float32)
    w = _rng(1).normal(size=(64, 1, 3, 3)).astype(np.float32)
    spec = kernels.ConvSpec(64, 64, (3, 3), padding=1, groups=64)
    macs = size * size * 64 * 9
    return (lambda: kernels.depthwise_conv2d(x, w, spec)), macs


def _bench_tconv4x4(size):
    x = _rng().normal(size=(1, 64, size, size)).astype(np.float32)
    w = _rng(1).normal(size=(64, 64, 4, 4)).astype(np.float32)
    macs = size * size * 64 * 64 * 16
    return (lambda: kernels.transpose_conv2d(x, w)), macs


def _bench_maxpool3x3(size):
    x = _rng().normal(size=(1, 64, size, size)).astype(np.float32)
    return (lambda: kernels.max_pool2d(x, 3, 1, 1)), 0


def _bench_forward(builder, num_classes=3):
    def make(size):
        graph = builder(num_classes, input_hw=(size, size))
        init_weights(graph, seed=0)
        x = _rng().normal(size=(1, 3, size, size)).astype(np.float32)
        macs = cost_report(graph).macs
        return (lambda: forward(graph, x)), macs
    return make


BENCH_OPS = {
    "conv3x3": _bench_conv3x3,
    "dwconv3x3": _bench_dwconv3x3,
    "tconv4x4": _bench_tconv4x4,
    "maxpool3x3": _bench_maxpool3x3,
    "forward_hourglass54": _bench_forward(build_hourglass54),
    "forward_squeeze": _bench_forward(build_squeeze_hourglass),
}


def bench(ops, sizes, repetitions=3):
    """Time each (op, size) pair; returns a JSON-ready report dict.

    Report schema: {"repetitions": int, "entries": [{"op", "size", "macs",
    "samples", "median_s", "p10_s", "p90_s"}]}.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    entries = []
    for op in ops:
        if op not in BENCH_OPS:
            raise ValueError(f"unknown bench op {op!r}; known: {sorted(BENCH_OPS)}")
        for size in sizes:
            fn, macs = BENCH_OPS[op](size)
            fn()  # warm-up, excluded from samples
            samples = []
            for _ in range(repetitions):
                start = time.perf_counter()
                fn()
                samples.append(time.perf_counter() - start)
            entries.append({
                "op": op, "size": int(size), "macs": int(macs),
                "samples": len(samples),
                "median_s": float(np.median(samples)),
                "p10_s": float(np.percentile(samples, 10)),
                "p90_s": float(np.percentile(samples, 90)),
            })
    return {"repetitions": repetitions, "entries": entries}
