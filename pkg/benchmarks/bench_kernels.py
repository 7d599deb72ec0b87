"""Compare the compiled per-edge kernel with the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from asyaff import _kernels_py
from asyaff.affinity_graph import NeighborhoodSpec, enumerate_edges

try:
    from asyaff._ext import _kernels as _compiled
except ImportError:
    _compiled = None


def workload(size: int, seed: int = 0):
    es = enumerate_edges(size, size, NeighborhoodSpec(3, 2))
    rng = np.random.default_rng(seed)
    logits = rng.normal(0, 3, size * size)
    return logits, np.ascontiguousarray(es.p), np.ascontiguousarray(es.p2)


def time_backend(impl, logits, a, b, repeat: int) -> float:
    grad = np.zeros_like(logits)

    def run():
        grad[:] = 0.0
        impl.affinity_loss_grad(logits, a, b, 3.5, 2.5, grad)

    return min(timeit.repeat(run, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = [("numpy", _kernels_py)]
    if _compiled is not None:
        backends.insert(0, ("cython", _compiled))
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"{'size':>6} {'edges':>9} " + " ".join(f"{n + ' ms':>11}" for n, _ in backends) + "  speedup")
    for size in (int(s) for s in args.sizes.split(",")):
        logits, a, b = workload(size)
        times = [time_backend(impl, logits, a, b, args.repeat) for _, impl in backends]
        speed = f"{times[-1] / times[0]:7.1f}x" if len(times) == 2 else ""
        print(f"{size:>6} {len(a):>9} " + " ".join(f"{t * 1e3:11.3f}" for t in times) + "  " + speed)


if __name__ == "__main__":
    main()
