"""Compare the compiled and numpy kernels on a Monte Carlo sized batch.

    python benchmarks/bench_kernels.py [--targets 2048] [--repeat 20]
"""

import argparse
import math
import timeit

import numpy as np

from pinchcrb import kernels
from pinchcrb.scene import wavelength_for


def workload(n_targets: int, n_rx: int, m_tx: int, seed: int = 0):
    lam = wavelength_for(27e9)
    rng = np.random.default_rng(seed)
    r = rng.uniform(5, 25, n_targets)
    th = rng.uniform(-math.pi / 6, math.pi / 6, n_targets)
    y = np.linspace(-4.0, 4.0, m_tx)
    wg = 2 * math.pi * (y + 5.0) / (lam / 1.4)
    nd = (np.arange(n_rx) - (n_rx - 1) / 2) * lam / 2
    k = 2 * math.pi / lam
    gain = (lam / (4 * math.pi)) ** 2
    return (
        ("aggregate", lambda mod: mod.aggregate_batch(y, wg, k, math.sqrt(gain), r, th)),
        ("rx_gram", lambda mod: mod.rx_gram_batch(nd, 30.0, k, gain, r, th)),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--targets", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy kernels are timed")
    print(f"{'kernel':<10} {'N':>4} {'M':>3} " + " ".join(f"{name:>12}" for name in backends) + "   speedup")
    for n_rx, m_tx in ((4, 4), (16, 8), (64, 8)):
        for name, call in workload(args.targets, n_rx, m_tx):
            times = {b: min(timeit.repeat(lambda: call(mod), number=1, repeat=args.repeat))
                     for b, mod in backends.items()}
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            cols = " ".join(f"{t * 1e3:10.3f}ms" for t in times.values())
            print(f"{name:<10} {n_rx:>4} {m_tx:>3} {cols}   {speed:6.2f}x")


if __name__ == "__main__":
    main()
