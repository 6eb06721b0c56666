"""Compiled vs numpy curve kernels, alone and inside a full Gibbs sweep.

Run: python benchmarks/bench_kernels.py [--repeat 2000]
"""
import argparse
import importlib
import os
import subprocess
import sys
import timeit

import numpy as np


def kernel_times(backend, repeat):
    t = np.arange(1.0, 115.0)
    y = 1e4 / (1 + 0.5 * np.exp(-0.15 * (t - 50))) ** 2
    out = {}
    for name, call in [
        ("basis_series", lambda: backend.basis_series(t, 0.15, 50.0, 0.5)),
        ("unit_sse", lambda: backend.unit_sse(y, t, 1e4, 0.15, 50.0, 0.5)),
        ("basis_stats", lambda: backend.basis_stats(y, t, 0.15, 50.0, 0.5)),
    ]:
        out[name] = min(timeit.repeat(call, number=repeat, repeat=3)) / repeat
    return out


def sweep_time(sweeps):
    """Seconds per sweep on a 40-unit, T=114, p=45 panel, in this process's backend."""
    from growthcast.gibbs import ProposalScales, SamplerConfig, gibbs_sweep, initial_state
    from growthcast.model import ModelSpec
    from growthcast.samplers import RandomStream
    from growthcast.synthetic import make_panel

    panel, _ = make_panel(0, N=40, T=114, p=45)
    data = panel.model_data()
    spec, cfg, rng = ModelSpec("M3"), SamplerConfig(), RandomStream(0)
    state = initial_state(data, spec, rng)
    scales = ProposalScales.initial(data.N, cfg)
    timer = timeit.default_timer
    start = timer()
    for it in range(sweeps):
        state = gibbs_sweep(state, data, spec, cfg, rng, scales=scales, adapt_iteration=it)
    return (timer() - start) / sweeps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--sweep-only", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.sweep_only:
        print(repr(sweep_time(args.sweeps)))
        return
    kernels = importlib.import_module("growthcast.kernels")
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        cy = None
        print("compiled kernels not built; timing the numpy fallback only")
    rows = {"python": kernel_times(py, args.repeat)}
    if cy is not None:
        rows["cython"] = kernel_times(cy, args.repeat)
    print(f"{'kernel':<14}" + "".join(f"{b:>14}" for b in rows) + ("     speedup" if cy else ""))
    for name in rows["python"]:
        line = f"{name:<14}" + "".join(f"{rows[b][name] * 1e6:>12.2f}us" for b in rows)
        if cy is not None:
            line += f"{rows['python'][name] / rows['cython'][name]:>11.1f}x"
        print(line)
    # full sweeps run in fresh interpreters so backend selection happens at import
    per = {}
    for backend, env in (("python", {"GROWTHCAST_PURE_PYTHON": "1"}), ("cython", {})):
        if backend == "cython" and cy is None:
            continue
        res = subprocess.run([sys.executable, __file__, "--sweep-only", "--sweeps", str(args.sweeps)],
                             env={**os.environ, **env}, capture_output=True, text=True, check=True)
        per[backend] = float(res.stdout.strip())
        print(f"sweep N=40 T=114 p=45 [{backend}]: {per[backend] * 1e3:.1f} ms")
    if len(per) == 2:
        print(f"sweep speedup: {per['python'] / per['cython']:.2f}x")


if __name__ == "__main__":
    main()
