"""Compare the compiled kernel backend against the pure-numpy fallback.

Times each elementwise kernel on training-shaped buffers, then one full
loss-plus-gradient evaluation at desk scale under both backends.  Run:

    python3 benchmarks/bench_kernels.py [--reps 50]
"""

import argparse
import time

import numpy as np

import clinn._kernels as kernels
from clinn import loss, network, problems

# (kernel, needs_out_buffer) pairs; bwd kernels take (g, a, out, ga)
UNARY = ("tanh", "sigmoid", "sin", "square", "abs")


def _time(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def bench_unary(reps, K=3, M=204800):
    rng = np.random.default_rng(0)
    a = np.ascontiguousarray(rng.normal(size=(K, M)))
    g = np.ascontiguousarray(rng.normal(size=(K, M)))
    rows = []
    for name in UNARY:
        per_backend = {}
        for backend in ("py", "cy"):
            kernels.use(backend)
            k = kernels.active()
            fwd = getattr(k, name + "_fwd")
            bwd = getattr(k, name + "_bwd")
            out = fwd(a)
            ga = np.zeros_like(a)
            per_backend[backend] = (
                _time(lambda: fwd(a), reps),
                _time(lambda: bwd(g, a, out, ga), reps),
            )
        rows.append((name, per_backend))
    return rows


def bench_loss(reps):
    spec = problems.get_problem("1B")
    grid = problems.sample_grid(spec, nx=128, nt=32)
    arch = network.Architecture(width=50, depth=3, input_dim=2)
    params = network.init(arch, seed=7)
    ctx = loss.LossContext(spec, grid, loss.preset_weights("clinn"))
    out = {}
    for backend in ("py", "cy"):
        kernels.use(backend)
        loss.total_loss_and_grad(params, ctx)  # warm
        out[backend] = _time(
            lambda: loss.total_loss_and_grad(params, ctx), reps)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=30)
    args = ap.parse_args()

    print(f"backends available: {kernels.available()}")
    print()
    print(f"{'kernel':<10} {'py fwd':>9} {'cy fwd':>9} {'ratio':>6}   "
          f"{'py bwd':>9} {'cy bwd':>9} {'ratio':>6}")
    for name, per in bench_unary(args.reps):
        pf, pb = per["py"]
        cf, cb = per["cy"]
        print(f"{name:<10} {pf:,.3f}ms {cf:,.3f}ms {pf / cf:>5.2f}x   "
              f"{pb:,.3f}ms {cb:,.3f}ms {pb / cb:>5.2f}x")

    print()
    times = bench_loss(max(5, args.reps // 5))
    print(f"full loss+gradient, desk scale (128x32 grid, 50x3 net):")
    print(f"  py {times['py']:.1f} ms   cy {times['cy']:.1f} ms   "
          f"speedup {times['py'] / times['cy']:.2f}x")
    kernels.use("cy")


if __name__ == "__main__":
    main()
