"""Independent oracles for the test suite.

Everything here recomputes objectives with its own plain summations and
solves the small 1D problems by routes unrelated to the package solver:
the pinned-datum TV proximal map (the taut-string tube problem) through
its dual box quadratic program with a certified duality gap, composite
energies by multi-start proximal-gradient iterations, linear problems by
scipy's LP solver, and the dual search in closed form.

Face convention for a 1D signal u with pinned outside values (a, b):
jump_0 = u[0] - a, jump_j = u[j] - u[j-1], jump_n = b - u[n-1]; all
carry weight one (unit face area), interior gradients carry cell volume h.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import optimize


# ---------------------------------------------------------------------------
# pinned-datum 1D TV proximal map: min_u 0.5*||u-v||^2 + gamma * sum |jumps|


def pinned_tv_objective(u, v, a, b, gamma):
    u = np.asarray(u, dtype=float)
    jumps = abs(u[0] - a) + abs(b - u[-1]) + np.sum(np.abs(np.diff(u)))
    return float(0.5 * np.sum((u - v) ** 2) + gamma * jumps)


def _apply_E(u, n):
    out = np.empty(n + 1)
    out[0] = u[0]
    out[1:n] = u[1:] - u[:-1]
    out[n] = -u[-1]
    return out


def _apply_Et(z):
    return z[:-1] - z[1:]


def exact_pinned_tv_prox(v, a, b, gamma, tol=1e-13, max_iter=2_000_000, z0=None):
    """Taut-string tube problem solved exactly through its dual box QP.

    Projected accelerated gradient on the dual; the returned point is
    certified by the primal-dual gap (strong convexity of the primal
    gives ||u - u*|| <= sqrt(2*gap)).
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if gamma == 0.0:
        return v.copy(), 0.0, np.zeros(n + 1)
    e0 = np.zeros(n + 1)
    e0[0] = -a
    e0[n] = b
    c = gamma * (_apply_E(v, n) + e0)
    L = 4.0 * gamma * gamma

    z = np.zeros(n + 1) if z0 is None else np.clip(np.asarray(z0, dtype=float), -1, 1)
    y = z.copy()
    t_acc = 1.0
    scale = 1.0 + abs(a) + abs(b) + float(np.max(np.abs(v)))
    gap = np.inf
    best_u, best_gap, best_z = None, np.inf, z
    for it in range(max_iter):
        grad = gamma * gamma * _apply_E(_apply_Et(y), n) - c
        z_new = np.clip(y - grad / L, -1.0, 1.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = z_new + ((t_acc - 1.0) / t_new) * (z_new - z)
        z, t_acc = z_new, t_new
        if it % 20 == 0:
            u = v - gamma * _apply_Et(z)
            dual = float(-0.5 * gamma * gamma * np.sum(_apply_Et(z) ** 2) + z @ c)
            gap = pinned_tv_objective(u, v, a, b, gamma) - dual
            if gap < best_gap:
                best_u, best_gap, best_z = u, gap, z.copy()
            if best_gap <= tol * scale:
                return best_u, best_gap, best_z
    raise RuntimeError(f"pinned TV prox not certified: gap {best_gap:.3e}")


def pinned_tv_prox_bruteforce(v, a, b, gamma):
    """Enumerate all active-set sign patterns of the dual box QP (n <= 6)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    if n > 6:
        raise ValueError("brute force is for n <= 6")
    m = n + 1
    E = np.zeros((m, n))
    E[0, 0] = 1.0
    for j in range(1, n):
        E[j, j] = 1.0
        E[j, j - 1] = -1.0
    E[n, n - 1] = -1.0
    e0 = np.zeros(m)
    e0[0] = -a
    e0[n] = b
    Q = gamma * gamma * (E @ E.T)
    c = gamma * (E @ v + e0)

    best_u, best_val = None, np.inf
    for pattern in itertools.product((-1, 0, 1), repeat=m):
        pattern = np.array(pattern)
        free = pattern == 0
        z = pattern.astype(float)
        if free.any():
            rhs = c[free] - Q[np.ix_(free, ~free)] @ z[~free]
            sol, residual, *_ = np.linalg.lstsq(Q[np.ix_(free, free)], rhs, rcond=None)
            if np.max(np.abs(Q[np.ix_(free, free)] @ sol - rhs)) > 1e-9:
                continue
            z[free] = sol
            if np.max(np.abs(sol)) > 1.0 + 1e-9:
                continue
        g = Q @ z - c
        ok = True
        for j in range(m):
            if pattern[j] == 1 and g[j] > 1e-9:
                ok = False
            if pattern[j] == -1 and g[j] < -1e-9:
                ok = False
        if not ok:
            continue
        u = v - gamma * _apply_Et(z)
        val = pinned_tv_objective(u, v, a, b, gamma)
        if val < best_val - 1e-15:
            best_u, best_val = u, val
    if best_u is None:
        raise RuntimeError("no KKT point found (should not happen)")
    return best_u


# ---------------------------------------------------------------------------
# composite energy on a 1D collared grid, oracle-local summation


def composite_value(u, h, mu, lam, f, u0_full):
    """Plain-loop evaluation of the composite energy (independent route)."""
    u = np.asarray(u, dtype=float)
    n = u.size
    a, b = u0_full[0], u0_full[-1]
    u0 = np.asarray(u0_full[1:-1], dtype=float)
    area = 0.0
    for j in range(1, n):
        d = (u[j] - u[j - 1]) / h
        area += h * np.sqrt(mu * mu + d * d)
    area += h * mu  # last cell owns no interior forward face
    area += abs(u[0] - a) + abs(b - u[n - 1])
    bulk = 0.0
    for i in range(n):
        bulk += h * (0.5 * lam * u[i] ** 2 + f[i] * (u[i] - u0[i]))
    return float(area + bulk)


def _smooth_gradient(u, h, mu, lam, f):
    n = u.size
    d = np.diff(u) / h
    psi = d / np.sqrt(mu * mu + d * d)
    grad = np.zeros(n)
    grad[:-1] -= psi
    grad[1:] += psi
    grad += h * (lam * u + f)
    return grad


def _fista_primal(v0, h, mu, lam, f, a, b, iters):
    L = 4.0 / (mu * h) + lam * h + 1.0
    u = v0.copy()
    y = u.copy()
    t_acc = 1.0
    for _ in range(iters):
        grad = _smooth_gradient(y, h, mu, lam, f)
        w = y - grad / L
        step = 1.0 / L
        u_new = w.copy()
        u_new[0] = a + np.sign(w[0] - a) * max(0.0, abs(w[0] - a) - step)
        u_new[-1] = b + np.sign(w[-1] - b) * max(0.0, abs(w[-1] - b) - step)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = u_new + ((t_acc - 1.0) / t_new) * (u_new - u)
        u, t_acc = u_new, t_new
    return u


def _dual_oracle_tv_quadratic(h, lam, f, u0_full, z0, iters):
    """mu = 0, lam > 0: projected accelerated gradient on the dual box QP."""
    f = np.asarray(f, dtype=float)
    n = f.size
    a, b = u0_full[0], u0_full[-1]
    u0 = np.asarray(u0_full[1:-1], dtype=float)
    e0 = np.zeros(n + 1)
    e0[0] = -a
    e0[n] = b
    const = -h * float(f @ u0)
    L = 4.0 / (h * lam)

    def negdual_grad(z):
        r = _apply_Et(z) + h * f
        return _apply_E(r, n) / (h * lam) - e0

    def dual_value(z):
        r = _apply_Et(z) + h * f
        return float(-np.sum(r * r) / (2.0 * h * lam) + z @ e0 + const)

    z = np.clip(z0, -1.0, 1.0)
    y = z.copy()
    t_acc = 1.0
    for _ in range(iters):
        z_new = np.clip(y - negdual_grad(y) / L, -1.0, 1.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = z_new + ((t_acc - 1.0) / t_new) * (z_new - z)
        z, t_acc = z_new, t_new
    u = -(_apply_Et(z) + h * f) / (h * lam)
    return u, dual_value(z)


def prox_gradient_oracle(h, mu, lam, f, u0_full, n_starts=20, seed=0, iters=30_000):
    """Multi-start proximal-gradient minimization of the composite energy.

    mu > 0: the regularized interior term is smooth, the boundary jumps go
    through their (separable) proximal map.  mu = 0 needs lam > 0 and runs
    on the dual box QP, recovering the primal and certifying the gap.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    a, b = u0_full[0], u0_full[-1]
    rng = np.random.default_rng(seed)
    amp = 1.0 + abs(a) + abs(b)
    best_val, best_u = np.inf, None
    for start in range(n_starts):
        if mu > 0.0:
            v0 = rng.uniform(-amp, amp, size=n)
            u = _fista_primal(v0, h, mu, lam, f, a, b, iters)
            val = composite_value(u, h, mu, lam, f, u0_full)
        else:
            if lam <= 0.0:
                raise ValueError("mu = 0 oracle needs lam > 0")
            z0 = rng.uniform(-1.0, 1.0, size=n + 1)
            u, dual = _dual_oracle_tv_quadratic(h, lam, f, u0_full, z0, iters)
            val = composite_value(u, h, mu, lam, f, u0_full)
            if val - dual > 1e-8 * (1.0 + abs(val)):
                raise RuntimeError(f"dual oracle not certified: gap {val - dual:.3e}")
        if val < best_val:
            best_val, best_u = val, u
    return best_val, best_u


# ---------------------------------------------------------------------------
# TV-linear problems (mu = lam = 0): LP primal, closed-form dual search


def tv_linear_value_lp(h, f, u0_full):
    """min over u of sum|jumps| + h*<f, u-u0> as a linear program."""
    f = np.asarray(f, dtype=float)
    n = f.size
    a, b = u0_full[0], u0_full[-1]
    u0 = np.asarray(u0_full[1:-1], dtype=float)
    m = n + 1
    E = np.zeros((m, n))
    E[0, 0] = 1.0
    for j in range(1, n):
        E[j, j] = 1.0
        E[j, j - 1] = -1.0
    E[n, n - 1] = -1.0
    e0 = np.zeros(m)
    e0[0] = -a
    e0[n] = b
    cost = np.concatenate([h * f, np.ones(m)])
    A_ub = np.block([[E, -np.eye(m)], [-E, -np.eye(m)]])
    b_ub = np.concatenate([-e0, e0])
    bounds = [(None, None)] * n + [(0, None)] * m
    res = optimize.linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 3:
        return None  # unbounded below
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.fun - h * f @ u0)


def exhaustive_dual_search_1d(h, f, u0_full, samples=4001):
    """max of sum_j z_j * (grad u0bar)_j * h over z with div z = f, |z| <= 1.

    div z = f pins z up to one constant; the admissible interval for that
    constant is scanned exhaustively (the value is linear, so the endpoints
    are included exactly).
    """
    f = np.asarray(f, dtype=float)
    u0_full = np.asarray(u0_full, dtype=float)
    s = np.concatenate([[0.0], h * np.cumsum(f)])
    lo = -1.0 - np.min(s)
    hi = 1.0 - np.max(s)
    if lo > hi + 1e-15:
        return None  # dual infeasible
    g0 = np.diff(u0_full) / h
    base = float(np.sum(s * g0) * h)
    slope = float(np.sum(g0) * h)
    candidates = np.concatenate([np.linspace(lo, hi, samples), [lo, hi]])
    return float(np.max(base + slope * candidates))
