"""Time the numba and numpy backends on every hot kernel.

    python benchmarks/bench_backends.py [--repeat 20]

Each kernel is called once per backend before timing so numba compilation
is excluded. Results are printed as a table and checked for agreement.
"""

import argparse
import time

import numpy as np

from gpo import accel
from gpo.data.darcy import transmissibilities
from gpo.wavelet import get_basis


def cases(rng):
    X = rng.standard_normal((256, 128 * 8))
    Y = rng.standard_normal((300, 128 * 8))
    basis = get_basis("db6")
    sig = rng.standard_normal((512, 256))
    a, d = accel.dwt_step(sig, basis.dec_lo, basis.dec_hi)
    N, du, B = 300, 128, 32
    K = rng.random((N, N))
    U = rng.standard_normal((N, du))
    idx = rng.integers(0, N, B)
    rows = np.ascontiguousarray(K[idx])
    state = [np.zeros((N, du)) for _ in range(4)]
    perm = np.where(rng.random((64, 64)) > 0.5, 12.0, 3.0)
    Tx, Ty = transmissibilities(perm)
    u = rng.standard_normal((64, 64))
    return {
        "pairwise_sqdist 256x300 (d=1024)": lambda: accel.pairwise_sqdist(X, Y),
        "dwt_step 512 rows x 256": lambda: accel.dwt_step(sig, basis.dec_lo, basis.dec_hi),
        "idwt_step 512 rows x 256": lambda: accel.idwt_step(a, d, basis.rec_lo, basis.rec_hi),
        "sdd_step N=300 d_u=128 B=32": lambda: accel.sdd_step(
            rows, idx, state[0], state[1], state[2], U, 0.1, 1e-4, 0.9, 0.9, N / B, state[3]),
        "darcy_matvec 64x64": lambda: accel.darcy_matvec(u, Tx, Ty),
    }


def timeit(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    results = {}
    for backend in accel.BACKENDS:
        accel.set_backend(backend)
        for name, fn in cases(np.random.default_rng(0)).items():
            results.setdefault(name, {})[backend] = timeit(fn, args.repeat)
    accel.set_backend("numba")
    print(f"{'kernel':36s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, r in results.items():
        print(f"{name:36s} {1e3 * r['numba']:11.3f} {1e3 * r['numpy']:11.3f} "
              f"{r['numpy'] / r['numba']:8.2f}")
    # agreement on fresh inputs
    outs = {}
    for backend in accel.BACKENDS:
        accel.set_backend(backend)
        c = cases(np.random.default_rng(1))
        outs[backend] = {k: fn() for k, fn in c.items()}
    accel.set_backend("numba")
    for name in outs["numba"]:
        x, y = outs["numba"][name], outs["numpy"][name]
        x = np.concatenate([np.ravel(v) for v in (x if isinstance(x, tuple) else (x,))])
        y = np.concatenate([np.ravel(v) for v in (y if isinstance(y, tuple) else (y,))])
        print(f"agree {name:36s} max rel diff {np.max(np.abs(x - y)) / max(np.max(np.abs(y)), 1e-300):.2e}")


if __name__ == "__main__":
    main()
