"""Compiled Gibbs sweeps. Arithmetic mirrors the pure-Python samplers exactly."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def data_costs(left, right, n_labels, kappa):
    h, w = left.shape
    out = np.empty((h, w, n_labels))
    for r in range(h):
        for c in range(w):
            for d in range(n_labels):
                if c - d < 0:
                    out[r, c, d] = kappa
                else:
                    diff = abs(left[r, c] - right[r, c - d])
                    out[r, c, d] = min(diff, kappa)
    return out


@njit(cache=True)
def _pixel_energies(costs, labels, r, c, lam, tau, out):
    h, w, n = costs.shape
    for d in range(n):
        s = 0.0
        if r > 0:
            s += min(abs(d - labels[r - 1, c]), tau)
        if r < h - 1:
            s += min(abs(d - labels[r + 1, c]), tau)
        if c > 0:
            s += min(abs(d - labels[r, c - 1]), tau)
        if c < w - 1:
            s += min(abs(d - labels[r, c + 1]), tau)
        out[d] = costs[r, c, d] + lam * s


@njit(cache=True)
def sweep_exact(costs, labels, lam, tau, temperature, uniforms):
    h, w, n = costs.shape
    e = np.empty(n)
    p = np.empty(n)
    k = 0
    for r in range(h):
        for c in range(w):
            _pixel_energies(costs, labels, r, c, lam, tau, e)
            emin = e.min()
            for d in range(n):
                p[d] = np.exp(-(e[d] - emin) / temperature)
            total = p.sum()
            u = uniforms[k]
            k += 1
            acc = 0.0
            pick = -1
            last = 0
            for d in range(n):
                q = p[d] / total
                if q > 0:
                    last = d
                acc += q
                if pick < 0 and u < acc:
                    pick = d
            if pick < 0:
                pick = last
            labels[r, c] = pick


@njit(cache=True)
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


@njit(cache=True)
def sweep_approx(costs, labels, lam, tau, temperature, state, width, mask,
                 scale, max_code, thr_code, steps):
    """Returns ``(lfsr_state, degenerate_count)`` after one raster sweep."""
    h, w, n = costs.shape
    e = np.empty(n)
    codes = np.empty(n, dtype=np.int64)
    degenerate = 0
    for r in range(h):
        for c in range(w):
            _pixel_energies(costs, labels, r, c, lam, tau, e)
            emin = e.min()
            amin = 0
            total = 0
            for d in range(n):
                if e[d] < e[amin]:
                    amin = d
                x = math.exp(-(e[d] - emin) / temperature)
                q = np.int64(min(np.rint(x * scale), max_code))
                if q < thr_code:
                    q = 0
                codes[d] = q
                total += q
            if total == 0:
                # no draw is consumed for a collapsed conditional
                degenerate += 1
                labels[r, c] = amin
                continue
            for _ in range(steps):
                state = (state >> 1) | (_parity(state & mask) << (width - 1))
            lhs = state * total
            acc = 0
            for d in range(n):
                acc += codes[d]
                if lhs <= (acc << width):
                    labels[r, c] = d
                    break
    return state, degenerate
