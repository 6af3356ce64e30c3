"""Time the hot kernels under the numba and numpy backends.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is called once
to trigger JIT compilation, then timed on problem sizes matching a default
run (2000-row profiles, 2000x405 frames, 201-point zoom grids). Outputs are
compared across backends before timing.
"""

import argparse
import timeit

import numpy as np
from scipy.interpolate import CubicSpline

from wvasim.kernels import available_backends, get_backend


def cases(rng):
    n = 2000
    rows = np.arange(n, dtype=float)
    profile = 1.05 + np.cos(2 * np.pi * rows / 427.4)
    product = np.fft.fft(profile) * np.conj(np.fft.fft(np.roll(profile, 3)))
    freqs = np.fft.fftfreq(n)
    grid = np.linspace(2.9, 3.1, 201)
    coef = np.ascontiguousarray(CubicSpline(rows, profile).c)
    counts = rng.poisson(1e6 * profile).astype(float)
    window = rows[20:-20]
    image = rng.uniform(0, 1e4, (2000, 405))
    p0 = profile / profile.sum()
    p1 = np.roll(p0, 1)
    return {
        "dft_xcorr": (product, freqs, grid),
        "spline_loglik": (coef, window, counts[20:-20].copy(), grid, 1e-12),
        "shift_bilinear": (image, 0.37, -0.21),
        "fisher_sum": (p0, p1, np.roll(p0, -1), 1e-18),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20, help="timed calls per kernel")
    args = parser.parse_args(argv)
    backends = {name: get_backend(name) for name in available_backends()}
    inputs = cases(np.random.default_rng(0))
    print(f"{'kernel':<16}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for kernel, call_args in inputs.items():
        results, times = {}, {}
        for name, mod in backends.items():
            fn = getattr(mod, kernel)
            results[name] = fn(*call_args)
            times[name] = min(timeit.repeat(lambda: fn(*call_args), number=1,
                                            repeat=args.repeat))
        ref = results["numpy"]
        for name, res in results.items():
            np.testing.assert_allclose(np.asarray(res, dtype=float), np.asarray(ref, dtype=float),
                                       rtol=1e-9, err_msg=f"{kernel}: {name} disagrees with numpy")
        row = "".join(f"{times[name] * 1e3:>12.3f}ms" for name in backends)
        speedup = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{kernel:<16}{row}{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
