"""Compare the numba-compiled kernels with their pure-numpy twins.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import time

import numpy as np

from olc_sim import kernels, olc
from olc_sim.dynamics import make_state
from olc_sim.scenario import load_scenario, resolve_case


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def integrate_args(name):
    sc = load_scenario(resolve_case(name))
    net, cfg = sc.network, sc.config
    state = make_state(net, sc.omega_G0, sc.P0, tol=cfg.tol)
    alpha, lo, hi = net.quadratic_params
    return (net.M, net.D, net.P_m, alpha, lo, hi, net.src, net.dst, net.B,
            sc.omega_G0.copy(), sc.P0.copy(), state.d.copy(), cfg.h, cfg.n_steps, cfg.hold_every, cfg.decimation)


def grid_args(step):
    sc = load_scenario(resolve_case("n1_tree"))
    net = sc.network
    axes = [np.linspace(-1.0, 1.0, int(round(2.0 / step)) + 1) for _ in range(net.n_bus)]
    grids = np.vstack(axes)
    lengths = np.array([a.size for a in axes], dtype=np.int64)
    values = np.vstack([c(a) for c, a in zip(net.costs, axes)])
    return grids, lengths, values, float(net.D.sum()), float(net.P_m.sum())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if kernels.integrate_numba is None:
        print("numba unavailable (or disabled); only numpy timings are shown")

    jobs = [(f"integrate {name}", kernels.integrate_numba, kernels.integrate_numpy, integrate_args(name))
            for name in ("n1_tree", "ring3_mesh", "mesh68_synthetic")]
    jobs.append(("grid minimum 2 buses, step 1e-3", kernels.grid_minimum_numba, kernels.grid_minimum_numpy,
                 grid_args(1e-3)))

    print(f"{'kernel':<36}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for label, fast, slow, call_args in jobs:
        t_np, out_np = best_of(lambda: slow(*call_args), args.repeat)
        if fast is None:
            print(f"{label:<36}{'-':>12}{t_np:>12.4f}{'-':>10}")
            continue
        fast(*call_args)  # compile
        t_nb, out_nb = best_of(lambda: fast(*call_args), args.repeat)
        a, b = out_nb[1] if label.startswith("integrate") else out_nb[0], \
            out_np[1] if label.startswith("integrate") else out_np[0]
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12), label
        print(f"{label:<36}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
