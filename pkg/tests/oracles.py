"""Independent reference computations used only by the tests."""

import math

import numpy as np
from scipy.optimize import minimize_scalar


def binary_entropy(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def classical_hmin(p_ab):
    """-log sum_b max_a p(a, b) for a table p[a, b]."""
    return -math.log2(np.max(p_ab, axis=0).sum())


def _max_fidelity_under_caps(p, caps, iters=80):
    """max sum sqrt(x p) s.t. 0 <= x <= caps, sum x <= 1, for stacked cap arrays.

    ``p`` has shape (k,), ``caps`` shape (..., k). Solution is x = min(caps, t p)
    with t the water level; found by bisection on t.
    """
    full = np.minimum(caps, 1e300)
    tot = full.sum(axis=-1)
    lo = np.zeros(tot.shape)
    hi = np.full(tot.shape, 1.0 / p.min())
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        s = np.minimum(caps, mid[..., None] * p).sum(axis=-1)
        over = s > 1.0
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
    x = np.where((tot <= 1.0)[..., None], caps, np.minimum(caps, lo[..., None] * p))
    return np.sqrt(x * p).sum(axis=-1)


def classical_hmin_smooth_grid(p_ab, eps, step=1e-3):
    """Smooth H_min(A|B) of a 2 x 2 classical table by a search over column caps.

    For caps (c0, c1), the best diagonal rho_bar with max_a x(a, b) <= c_b is
    the capped water-filling above, and H_min = -log(c0 + c1) whenever the
    fidelity requirement sqrt(1 - eps^2) is met. c0 runs over a grid of step
    ``step``; the least feasible c1 is found by bisection (fidelity grows
    with c1), and the best grid cell is polished by a bounded scalar search.
    """
    p = p_ab.reshape(-1)  # index a * 2 + b
    target = math.sqrt(1 - eps * eps) - 1e-12

    def least_c1(c0):
        c0 = np.atleast_1d(np.asarray(c0, dtype=float))
        lo, hi = np.zeros_like(c0), np.ones_like(c0)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            caps = np.stack([c0, mid, c0, mid], axis=-1)
            ok = _max_fidelity_under_caps(p, caps) >= target
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        caps = np.stack([c0, hi, c0, hi], axis=-1)
        return np.where(_max_fidelity_under_caps(p, caps) >= target, hi, np.inf)

    g = np.arange(0.0, 1.0 + step / 2, step)
    tot = g + least_c1(g)
    k = int(np.argmin(tot))
    lo, hi = g[max(k - 1, 0)], g[min(k + 1, len(g) - 1)]
    res = minimize_scalar(lambda c: float(c + least_c1(c)[0]), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return -math.log2(min(tot[k], res.fun))


def classical_dmax_smooth_grid(p, q, eps, step=1e-3):
    """D_max^eps(diag(p, 1-p) || diag(q, 1-q)) by a 1-D scan with tight fidelity."""
    f = math.sqrt(1 - eps * eps)
    pp = (p, 1 - p)

    def obj(x0):
        x1 = max(f - math.sqrt(x0 * pp[0]), 0.0) ** 2 / pp[1]
        if x0 + x1 > 1 + 1e-12:
            return 1e3
        return math.log2(max(x0 / q, x1 / (1 - q)))

    grid = np.arange(step, 1.0 + step / 2, step)
    vals = np.array([obj(x) for x in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(vals[k], res.fun))


def h0_smooth_exhaustive(p, eps, step=1e-3):
    """Smallest support size of a diagonal subnormalized x on a grid with F^2 >= 1 - eps^2.

    Each candidate support (a subset of the indices) is searched on a grid
    of step ``step`` with the other coordinates fixed at zero.
    """
    from itertools import combinations

    g = np.arange(0.0, 1.0 + step / 2, step)
    need = 1 - eps * eps - 1e-12
    for r in range(1, len(p) + 1):
        for sub in combinations(range(len(p)), r):
            if r == 1:
                f = np.sqrt(g * p[sub[0]])
                feas = f * f >= need
            elif r == 2:
                x0, x1 = np.meshgrid(g, g, indexing="ij")
                f = np.sqrt(x0 * p[sub[0]]) + np.sqrt(x1 * p[sub[1]])
                feas = (x0 + x1 <= 1 + 1e-12) & (f * f >= need)
            else:
                return math.log2(r)  # full support always contains rho itself
            if feas.any():
                return math.log2(r)
    return math.log2(len(p))


def norm_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def inv_norm_cdf_bisect(p, lo=-40.0, hi=40.0):
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if norm_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
