"""Benchmark the compiled sampling core against the pure-Python fallback.

Run:  python benchmarks/bench_kernels.py [--paths N]

Both backends consume the same uniform stream, so the outputs are identical;
only the per-step loop cost differs.
"""

import argparse
import time

import numpy as np

from hitlace import chains, interlace, kernels


def _timed(fn, *args, repeat=3, **kwargs):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--steps", type=int, default=200_000)
    args = parser.parse_args()

    Q2 = np.array([[0.5, 0.5], [0.5, 0.5]])
    Q3 = np.array([[0.2, 0.5, 0.3], [0.5, 0.3, 0.2], [0.3, 0.2, 0.5]])
    bs = interlace.make_block_star_chain([0.4, 0.3, 0.2, 0.1], 0.9,
                                         [np.array([[1.0]]), Q2, Q3])
    dec = interlace.decompose(bs.P, 0, horizon=100)
    P_abs = chains.make_absorbing(dec.P_work, 0).entries
    lam = dec.link.matrix
    delta = dec.dual.P_hat.entries @ lam

    backends = ["fallback"]
    if kernels.BACKEND == "compiled":
        backends.append("compiled")
    else:
        print("note: compiled extension not built; timing fallback only")

    rows = []
    for name in backends:
        impl = kernels.get_backend(name)
        t_path, _ = _timed(impl.sample_path, P_abs, dec.pi, args.steps,
                           np.random.default_rng(0))
        t_link, out = _timed(
            impl.sample_linked_pairs, P_abs, dec.pi, dec.dual.P_hat.entries,
            dec.dual.pi_hat, lam, delta, 0, 0, args.paths,
            np.array([2], dtype=np.int64), np.random.default_rng(1))
        rows.append((name, t_path, t_link))
        assert int(np.sum(out[0] == out[1])) == args.paths

    print(f"{'backend':<10} {'sample_path':>16} {'linked_pairs':>16}")
    print(f"{'':<10} {f'({args.steps} steps)':>16} {f'({args.paths} pairs)':>16}")
    for name, t_path, t_link in rows:
        print(f"{name:<10} {t_path:>14.3f}s {t_link:>14.3f}s")
    if len(rows) == 2:
        print(f"{'speedup':<10} {rows[0][1] / rows[1][1]:>13.1f}x "
              f"{rows[0][2] / rows[1][2]:>14.1f}x")


if __name__ == "__main__":
    main()
