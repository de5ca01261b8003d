"""Normal trace, pairing identities, and the bounds every verifier relies on."""

import numpy as np
import pytest

from tvflow.energy import area_functional, total_variation
from tvflow.grid import (
    FaceVectorField,
    ScalarField,
    build_grid,
    constant_field,
    dual_sup_norm,
    field_from_function,
    gauss_green_residual,
)
from tvflow.pairing import fenchel_pairing_bound, normal_trace, pairing


def random_face_field(grid, rng, scale=1.0):
    return FaceVectorField(grid, tuple(scale * rng.standard_normal(s)
                                       for s in grid.face_shapes))


def feasible_face_field(grid, rng):
    z = random_face_field(grid, rng)
    norm = dual_sup_norm(z)
    if norm == 0.0:
        return z
    s = rng.uniform(0.1, 1.0) / norm
    return FaceVectorField(grid, tuple(s * c for c in z.components))


class TestNormalTrace:
    def test_constant_1d(self):
        g = build_grid(1, 4, 0.25)
        z = FaceVectorField(g, (np.full(5, 2.5),))
        assert np.allclose(normal_trace(z), [-2.5, 2.5])

    def test_zero(self):
        g = build_grid(2, (3, 3), 1.0)
        z = FaceVectorField(g, tuple(np.zeros(s) for s in g.face_shapes))
        assert np.all(normal_trace(z) == 0.0)

    def test_gauss_green_on_random_pairs(self):
        rng = np.random.default_rng(0)
        g = build_grid(1, 6, 0.5)
        for _ in range(100):
            z = random_face_field(g, rng)
            w = ScalarField(g, rng.standard_normal(g.full_shape))
            assert gauss_green_residual(z, w) < 1e-12

    def test_trace_bounded_by_sup_norm(self):
        rng = np.random.default_rng(1)
        for grid in (build_grid(1, 5, 0.3), build_grid(2, (4, 3), 0.7)):
            for _ in range(50):
                z = random_face_field(grid, rng)
                assert np.max(np.abs(normal_trace(z))) <= dual_sup_norm(z) + 1e-14


class TestPairing:
    def test_constant_field_linear_datum(self):
        # div z = 0, so the pairing collapses to c * s * |domain|
        n, h, c, s = 10, 0.1, 0.75, 2.0
        g = build_grid(1, n, h)
        u0 = field_from_function(g, lambda x: s * x)  # clamped collar
        z = FaceVectorField(g, (np.full(n + 1, c),))
        v = u0.interior
        result = pairing(z, v, u0)
        assert result.value == pytest.approx(c * s * n * h, abs=1e-13)

    def test_zero_field(self):
        g = build_grid(2, (3, 3), 0.5)
        z = FaceVectorField(g, tuple(np.zeros(s) for s in g.face_shapes))
        u0 = ScalarField(g, np.random.default_rng(2).standard_normal(g.full_shape))
        assert pairing(z, u0.interior, u0).value == 0.0

    def test_definition_equals_identity_route(self):
        rng = np.random.default_rng(3)
        for grid in (build_grid(1, 5, 0.4), build_grid(2, (3, 4), 0.6)):
            for _ in range(100):
                z = random_face_field(grid, rng)
                u0 = ScalarField(grid, rng.standard_normal(grid.full_shape))
                v = rng.standard_normal(grid.shape)
                p = pairing(z, v, u0)
                assert abs(p.via_definition - p.via_identity) <= 1e-10 * (1 + abs(p.value))

    def test_bounded_by_sup_norm_times_tv(self):
        rng = np.random.default_rng(4)
        for grid in (build_grid(1, 6, 0.3), build_grid(2, (4, 4), 0.5)):
            for _ in range(100):
                z = random_face_field(grid, rng, scale=2.0)
                u0 = ScalarField(grid, rng.standard_normal(grid.full_shape))
                v = rng.standard_normal(grid.shape)
                p = pairing(z, v, u0)
                bound = dual_sup_norm(z) * total_variation(v, u0)
                assert abs(p.value) <= bound + 1e-10 * (1 + bound)


class TestFenchelPairingBound:
    def test_zero_everything(self):
        g = build_grid(1, 4, 0.25)  # |domain| = 1
        zero = constant_field(g, 0.0)
        z = FaceVectorField(g, (np.zeros(5),))
        lhs, rhs = fenchel_pairing_bound(z, np.zeros(4), zero, 1.0)
        assert lhs == pytest.approx(0.0)
        assert rhs == pytest.approx(0.0, abs=1e-14)

    def test_zero_field_general_u(self):
        rng = np.random.default_rng(5)
        g = build_grid(1, 5, 0.2)  # |domain| = 1
        zero = constant_field(g, 0.0)
        z = FaceVectorField(g, (np.zeros(6),))
        for _ in range(20):
            u = rng.standard_normal(5)
            mu = float(rng.uniform(0.05, 1.0))
            lhs, rhs = fenchel_pairing_bound(z, u, zero, mu)
            assert lhs == 0.0
            assert rhs == pytest.approx(
                area_functional(u, zero, mu) - mu * g.domain_measure, abs=1e-13)
            assert rhs >= -1e-13

    def test_bound_holds_for_feasible_fields(self):
        rng = np.random.default_rng(6)
        for grid in (build_grid(1, 6, 0.25), build_grid(2, (3, 3), 0.4)):
            u0 = ScalarField(grid, rng.standard_normal(grid.full_shape))
            for _ in range(100):
                z = feasible_face_field(grid, rng)
                u = rng.standard_normal(grid.shape)
                mu = float(rng.uniform(0.05, 1.0))
                lhs, rhs = fenchel_pairing_bound(z, u, u0, mu)
                scale = 1 + abs(lhs) + abs(rhs)
                assert lhs <= rhs + 1e-10 * scale

    def test_rejects_infeasible_field_and_bad_mu(self):
        g = build_grid(1, 4, 0.25)
        zero = constant_field(g, 0.0)
        z_bad = FaceVectorField(g, (np.full(5, 1.5),))
        with pytest.raises(ValueError):
            fenchel_pairing_bound(z_bad, np.zeros(4), zero, 0.5)
        z_ok = FaceVectorField(g, (np.zeros(5),))
        with pytest.raises(ValueError):
            fenchel_pairing_bound(z_ok, np.zeros(4), zero, 1.5)
