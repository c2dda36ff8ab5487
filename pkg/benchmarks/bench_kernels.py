"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--qubits 12] [--layers 10] [--repeat 20]

Times one forward pass, one forward+inverse round trip and one adjoint
gradient sweep per backend, and checks both backends agree.
"""
import argparse
import timeit

import numpy as np

from qbar.statevector import load_backend


def bench(kern, n, layers, theta, psi, center, repeat):
    def forward():
        out = psi.copy()
        kern.ansatz_forward(out, n, layers, theta)
        return out

    def roundtrip():
        out = forward()
        kern.ansatz_inverse(out, n, layers, theta)
        return out

    def grad():
        return kern.overlap_grad(center, psi, n, layers, theta)

    times = {}
    for name, fn in (("forward", forward), ("roundtrip", roundtrip), ("gradient", grad)):
        fn()
        times[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return times, forward(), grad()[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, default=12)
    ap.add_argument("--layers", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    n, layers = args.qubits, args.layers
    rng = np.random.default_rng(0)
    theta = rng.uniform(-np.pi, np.pi, 2 * n * layers)
    psi = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    psi /= np.linalg.norm(psi)
    center = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    center /= np.linalg.norm(center)

    results = {}
    for name in ("python", "cython"):
        try:
            kern = load_backend(name)
        except ImportError as exc:
            print(f"{name:7s} unavailable: {exc}")
            continue
        results[name] = bench(kern, n, layers, theta, psi, center, args.repeat)

    print(f"{n} qubits, {layers} layers, {2 * n * layers} parameters, best of {args.repeat}")
    print(f"{'backend':8s} {'forward ms':>11s} {'roundtrip ms':>13s} {'gradient ms':>12s}")
    for name, (t, _, _) in results.items():
        print(f"{name:8s} {1e3 * t['forward']:11.3f} {1e3 * t['roundtrip']:13.3f} "
              f"{1e3 * t['gradient']:12.3f}")
    if len(results) == 2:
        (tp, op, gp), (tc, oc, gc) = results["python"], results["cython"]
        print("speedup  " + "  ".join(f"{k} {tp[k] / tc[k]:.2f}x" for k in tp))
        print(f"max |state diff| {np.max(np.abs(op - oc)):.2e}, "
              f"max |grad diff| {np.max(np.abs(gp - gc)):.2e}")


if __name__ == "__main__":
    main()
