"""Hot loops: fixed-step RK4 for quadratic-cost networks and the grid oracle.

Each kernel has a loop implementation compiled with numba and a vectorized
numpy implementation. ``integrate_quadratic`` and ``grid_minimum`` dispatch
to the compiled one unless numba is missing or disabled through
``OLC_SIM_DISABLE_NUMBA``. Both variants are importable for benchmarking.
"""

import numpy as np

from ._accel import HAS_NUMBA, njit

# status codes returned by the integrators
OK = 0
DIVERGED = 1


def _n_records(n_steps, decimation):
    return n_steps // decimation + 1 + (1 if n_steps % decimation else 0)


# ---------------------------------------------------------------- loop variant


def _clip(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def _load_freq_quad(alpha, lo, hi, D, r):
    # root of D w + clip(alpha w, lo, hi) = r; the map is piecewise linear and increasing
    w = r / (D + alpha)
    aw = alpha * w
    if aw > hi:
        w = (r - hi) / D
    elif aw < lo:
        w = (r - lo) / D
    return w


def _full_state_loop(n_gen, D, P_m, alpha, lo, hi, src, dst, omega_G, P, d_held, sampled, omega, d, flow):
    n_bus = D.shape[0]
    for j in range(n_bus):
        flow[j] = 0.0
    for e in range(P.shape[0]):
        flow[src[e]] += P[e]
        flow[dst[e]] -= P[e]
    for j in range(n_gen):
        omega[j] = omega_G[j]
    for j in range(n_gen, n_bus):
        r = P_m[j] - flow[j]
        if sampled:
            omega[j] = (r - d_held[j]) / D[j]
        else:
            omega[j] = _load_freq_quad(alpha[j], lo[j], hi[j], D[j], r)
    for j in range(n_bus):
        if sampled:
            d[j] = d_held[j]
        else:
            d[j] = _clip(alpha[j] * omega[j], lo[j], hi[j])


def _deriv_loop(n_gen, M, D, P_m, alpha, lo, hi, src, dst, B, omega_G, P, d_held, sampled,
                omega, d, flow, wdot, pdot):
    _full_state_loop(n_gen, D, P_m, alpha, lo, hi, src, dst, omega_G, P, d_held, sampled, omega, d, flow)
    for j in range(n_gen):
        wdot[j] = -(d[j] + D[j] * omega[j] - P_m[j] + flow[j]) / M[j]
    for e in range(P.shape[0]):
        pdot[e] = B[e] * (omega[src[e]] - omega[dst[e]])


def _integrate_loop(M, D, P_m, alpha, lo, hi, src, dst, B, omega_G0, P0, d_held0,
                    h, n_steps, hold_every, decimation):
    n_gen = M.shape[0]
    n_bus = D.shape[0]
    n_edge = P0.shape[0]
    sampled = hold_every > 0
    n_rec = _n_records(n_steps, decimation)
    rec_omega = np.empty((n_rec, n_bus))
    rec_P = np.empty((n_rec, n_edge))
    rec_d = np.empty((n_rec, n_bus))
    rec_step = np.empty(n_rec, dtype=np.int64)

    w = omega_G0.copy()
    p = P0.copy()
    dh = d_held0.copy()
    omega = np.empty(n_bus)
    d = np.empty(n_bus)
    flow = np.empty(n_bus)
    k1w = np.empty(n_gen)
    k2w = np.empty(n_gen)
    k3w = np.empty(n_gen)
    k4w = np.empty(n_gen)
    k1p = np.empty(n_edge)
    k2p = np.empty(n_edge)
    k3p = np.empty(n_edge)
    k4p = np.empty(n_edge)
    wt = np.empty(n_gen)
    pt = np.empty(n_edge)

    k = 0
    status = OK
    for n in range(n_steps + 1):
        if sampled and n % hold_every == 0:
            _full_state_loop(n_gen, D, P_m, alpha, lo, hi, src, dst, w, p, dh, True, omega, d, flow)
            for j in range(n_bus):
                dh[j] = _clip(alpha[j] * omega[j], lo[j], hi[j])
        if n % decimation == 0 or n == n_steps:
            _full_state_loop(n_gen, D, P_m, alpha, lo, hi, src, dst, w, p, dh, sampled, omega, d, flow)
            for j in range(n_bus):
                rec_omega[k, j] = omega[j]
                rec_d[k, j] = d[j]
            for e in range(n_edge):
                rec_P[k, e] = p[e]
            rec_step[k] = n
            k += 1
        if n == n_steps:
            break

        _deriv_loop(n_gen, M, D, P_m, alpha, lo, hi, src, dst, B, w, p, dh, sampled, omega, d, flow, k1w, k1p)
        for j in range(n_gen):
            wt[j] = w[j] + 0.5 * h * k1w[j]
        for e in range(n_edge):
            pt[e] = p[e] + 0.5 * h * k1p[e]
        _deriv_loop(n_gen, M, D, P_m, alpha, lo, hi, src, dst, B, wt, pt, dh, sampled, omega, d, flow, k2w, k2p)
        for j in range(n_gen):
            wt[j] = w[j] + 0.5 * h * k2w[j]
        for e in range(n_edge):
            pt[e] = p[e] + 0.5 * h * k2p[e]
        _deriv_loop(n_gen, M, D, P_m, alpha, lo, hi, src, dst, B, wt, pt, dh, sampled, omega, d, flow, k3w, k3p)
        for j in range(n_gen):
            wt[j] = w[j] + h * k3w[j]
        for e in range(n_edge):
            pt[e] = p[e] + h * k3p[e]
        _deriv_loop(n_gen, M, D, P_m, alpha, lo, hi, src, dst, B, wt, pt, dh, sampled, omega, d, flow, k4w, k4p)

        finite = True
        for j in range(n_gen):
            w[j] += h / 6.0 * (k1w[j] + 2.0 * k2w[j] + 2.0 * k3w[j] + k4w[j])
            if not np.isfinite(w[j]):
                finite = False
        for e in range(n_edge):
            p[e] += h / 6.0 * (k1p[e] + 2.0 * k2p[e] + 2.0 * k3p[e] + k4p[e])
            if not np.isfinite(p[e]):
                finite = False
        if not finite:
            status = DIVERGED
            break
    return status, rec_step[:k], rec_omega[:k], rec_P[:k], rec_d[:k]


def _grid_minimum_loop(grids, lengths, cost_values, D_total, P_total):
    n = lengths.shape[0]
    total = 1
    for j in range(n):
        total *= lengths[j]
    best = np.inf
    best_idx = np.zeros(n, dtype=np.int64)
    idx = np.zeros(n, dtype=np.int64)
    for _ in range(total):
        s = 0.0
        c = 0.0
        for j in range(n):
            s += grids[j, idx[j]]
            c += cost_values[j, idx[j]]
        r = P_total - s
        c += r * r / (2.0 * D_total)
        if c < best:
            best = c
            for j in range(n):
                best_idx[j] = idx[j]
        # odometer increment, last axis fastest
        j = n - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < lengths[j]:
                break
            idx[j] = 0
            j -= 1
    return best, best_idx


# --------------------------------------------------------------- numpy variant


def _full_state_np(n_gen, D, P_m, alpha, lo, hi, src, dst, omega_G, P, d_held, sampled):
    flow = np.bincount(src, weights=P, minlength=D.size) - np.bincount(dst, weights=P, minlength=D.size)
    r = P_m[n_gen:] - flow[n_gen:]
    if sampled:
        w_load = (r - d_held[n_gen:]) / D[n_gen:]
    else:
        a, dl = alpha[n_gen:], D[n_gen:]
        w_load = r / (dl + a)
        aw = a * w_load
        w_load = np.where(aw > hi[n_gen:], (r - hi[n_gen:]) / dl, w_load)
        w_load = np.where(aw < lo[n_gen:], (r - lo[n_gen:]) / dl, w_load)
    omega = np.concatenate((omega_G, w_load))
    d = d_held.copy() if sampled else np.clip(alpha * omega, lo, hi)
    return omega, d, flow


def _deriv_np(n_gen, M, D, P_m, alpha, lo, hi, src, dst, B, omega_G, P, d_held, sampled):
    omega, d, flow = _full_state_np(n_gen, D, P_m, alpha, lo, hi, src, dst, omega_G, P, d_held, sampled)
    g = slice(0, n_gen)
    wdot = -(d[g] + D[g] * omega[g] - P_m[g] + flow[g]) / M
    pdot = B * (omega[src] - omega[dst])
    return wdot, pdot


def _integrate_np(M, D, P_m, alpha, lo, hi, src, dst, B, omega_G0, P0, d_held0,
                  h, n_steps, hold_every, decimation):
    n_gen = M.shape[0]
    sampled = hold_every > 0
    n_rec = _n_records(n_steps, decimation)
    rec_omega = np.empty((n_rec, D.size))
    rec_P = np.empty((n_rec, P0.size))
    rec_d = np.empty((n_rec, D.size))
    rec_step = np.empty(n_rec, dtype=np.int64)
    args = (n_gen, M, D, P_m, alpha, lo, hi, src, dst, B)
    w, p, dh = omega_G0.copy(), P0.copy(), d_held0.copy()

    k = 0
    status = OK
    for n in range(n_steps + 1):
        if sampled and n % hold_every == 0:
            omega, _, _ = _full_state_np(n_gen, D, P_m, alpha, lo, hi, src, dst, w, p, dh, True)
            dh = np.clip(alpha * omega, lo, hi)
        if n % decimation == 0 or n == n_steps:
            omega, d, _ = _full_state_np(n_gen, D, P_m, alpha, lo, hi, src, dst, w, p, dh, sampled)
            rec_omega[k], rec_d[k], rec_P[k], rec_step[k] = omega, d, p, n
            k += 1
        if n == n_steps:
            break
        k1w, k1p = _deriv_np(*args, w, p, dh, sampled)
        k2w, k2p = _deriv_np(*args, w + 0.5 * h * k1w, p + 0.5 * h * k1p, dh, sampled)
        k3w, k3p = _deriv_np(*args, w + 0.5 * h * k2w, p + 0.5 * h * k2p, dh, sampled)
        k4w, k4p = _deriv_np(*args, w + h * k3w, p + h * k3p, dh, sampled)
        w = w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        p = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(p))):
            status = DIVERGED
            break
    return status, rec_step[:k], rec_omega[:k], rec_P[:k], rec_d[:k]


def _grid_minimum_np(grids, lengths, cost_values, D_total, P_total, chunk=4_000_000):
    n = lengths.size
    axes = [grids[j, : lengths[j]] for j in range(n)]
    costs = [cost_values[j, : lengths[j]] for j in range(n)]
    # sum over all but the first axis, then sweep the first axis in slabs
    tail_s = np.zeros(1)
    tail_c = np.zeros(1)
    for a, c in zip(axes[1:], costs[1:]):
        tail_s = (tail_s[:, None] + a[None, :]).ravel()
        tail_c = (tail_c[:, None] + c[None, :]).ravel()
    rows = max(1, chunk // tail_s.size)
    best = np.inf
    best_flat = 0
    for start in range(0, lengths[0], rows):
        s = axes[0][start : start + rows, None] + tail_s[None, :]
        c = costs[0][start : start + rows, None] + tail_c[None, :]
        c = c + (P_total - s) ** 2 / (2.0 * D_total)
        i = int(np.argmin(c))
        if c.flat[i] < best:
            best = float(c.flat[i])
            best_flat = start * tail_s.size + i
    best_idx = np.array(np.unravel_index(best_flat, tuple(lengths)), dtype=np.int64)
    return best, best_idx


integrate_numpy = _integrate_np
grid_minimum_numpy = _grid_minimum_np

if HAS_NUMBA:
    _n_records = njit(_n_records)
    _clip = njit(_clip)
    _load_freq_quad = njit(_load_freq_quad)
    _full_state_loop = njit(_full_state_loop)
    _deriv_loop = njit(_deriv_loop)
    integrate_numba = njit(_integrate_loop)
    grid_minimum_numba = njit(_grid_minimum_loop)
    integrate_quadratic = integrate_numba
    grid_minimum = grid_minimum_numba
else:
    integrate_numba = None
    grid_minimum_numba = None
    integrate_quadratic = integrate_numpy
    grid_minimum = grid_minimum_numpy
