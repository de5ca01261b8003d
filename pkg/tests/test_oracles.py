"""Cross-validation of the oracles against each other before they judge the solver."""

import numpy as np
import pytest

from oracles import (
    exact_pinned_tv_prox,
    exhaustive_dual_search_1d,
    pinned_tv_objective,
    pinned_tv_prox_bruteforce,
    prox_gradient_oracle,
    tv_linear_value_lp,
)


def test_prox_matches_bruteforce_enumeration():
    rng = np.random.default_rng(7)
    for trial in range(40):
        n = int(rng.integers(2, 6))
        v = rng.normal(size=n) * rng.uniform(0.2, 3.0)
        a, b = rng.normal(size=2)
        gamma = float(rng.uniform(0.01, 2.0))
        u_exact, gap, _ = exact_pinned_tv_prox(v, a, b, gamma)
        u_brute = pinned_tv_prox_bruteforce(v, a, b, gamma)
        assert gap <= 1e-12 * (1 + np.max(np.abs(v)))
        assert np.max(np.abs(u_exact - u_brute)) < 1e-6, f"trial {trial}"
        val_e = pinned_tv_objective(u_exact, v, a, b, gamma)
        val_b = pinned_tv_objective(u_brute, v, a, b, gamma)
        assert abs(val_e - val_b) < 1e-10


def test_prox_beats_random_perturbations():
    rng = np.random.default_rng(11)
    v = rng.normal(size=12)
    u, _, _ = exact_pinned_tv_prox(v, 0.3, -0.5, 0.7)
    base = pinned_tv_objective(u, v, 0.3, -0.5, 0.7)
    for _ in range(200):
        pert = u + rng.normal(size=12) * rng.choice([1e-4, 1e-2, 1.0])
        assert pinned_tv_objective(pert, v, 0.3, -0.5, 0.7) >= base - 1e-12


def test_lp_agrees_with_dual_search_strong_duality():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = 8
        h = 1.0 / n
        f = rng.uniform(-0.8, 0.8, size=n)
        u0_full = np.cumsum(rng.normal(size=n + 2)) * 0.3
        primal = tv_linear_value_lp(h, f, u0_full)
        dual = exhaustive_dual_search_1d(h, f, u0_full)
        assert primal is not None and dual is not None
        assert abs(primal - dual) < 1e-7


def test_lp_and_dual_search_flag_unbounded_source():
    n = 8
    h = 1.0 / n
    f = np.full(n, 3.0)
    u0_full = np.zeros(n + 2)
    assert tv_linear_value_lp(h, f, u0_full) is None
    assert exhaustive_dual_search_1d(h, f, u0_full) is None


def test_prox_gradient_oracle_mu_zero_matches_prox_reformulation():
    # mu = 0, lam > 0 is a pinned TV prox after completing the square:
    # F(u) = h*lam*[0.5||u-w||^2 + TV/(h*lam)] - h*sum f^2/(2 lam) - h*<f,u0>
    # with w = -f/lam, so two independent oracle routes must agree.
    rng = np.random.default_rng(5)
    for lam in (0.5, 1.0, 2.0):
        n = 6
        h = 1.0 / n
        f = rng.uniform(-0.8, 0.8, size=n)
        u0_full = np.linspace(0.0, 1.0, n + 2)
        a, b = u0_full[0], u0_full[-1]
        w = -f / lam
        gamma = 1.0 / (h * lam)
        u_prox, _, _ = exact_pinned_tv_prox(w, a, b, gamma)
        via_prox = (h * lam * pinned_tv_objective(u_prox, w, a, b, gamma)
                    - h * np.sum(f**2) / (2 * lam) - h * f @ u0_full[1:-1])
        val, u_best = prox_gradient_oracle(h, 0.0, lam, f, u0_full, n_starts=5, seed=1)
        assert abs(val - via_prox) < 1e-9
        assert np.max(np.abs(u_best - u_prox)) < 1e-5


def test_prox_gradient_oracle_multistart_consistency():
    rng = np.random.default_rng(9)
    n = 7
    h = 1.0 / n
    f = rng.uniform(-0.4, 0.4, size=n)
    u0_full = np.linspace(0.0, 0.5, n + 2)
    v1, _ = prox_gradient_oracle(h, 0.7, 0.5, f, u0_full, n_starts=6, seed=2)
    v2, _ = prox_gradient_oracle(h, 0.7, 0.5, f, u0_full, n_starts=6, seed=12345)
    assert abs(v1 - v2) < 1e-9


def test_mu_zero_oracle_requires_quadratic_term():
    with pytest.raises(ValueError):
        prox_gradient_oracle(0.25, 0.0, 0.0, np.zeros(4), np.zeros(6), n_starts=1)
