import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from tunneling.core_model import DeltaBarrier, GaussianState, SquareBarrier
from tunneling.exceptions import DegenerateJacobian, RegimeViolation
from tunneling.sequential import (
    TabulatedMomentum,
    _pushforward,
    detected_fraction,
    husimi_weight,
    ideal_distributions,
    joint_density,
    marginal_delay,
    marginal_tunneling,
    momentum_profile,
    pushforward_check,
    regime_check,
    rho_cross,
    sequential_density,
    time_maps,
)

SIGMAS = (1.0, 2.0, 5.0, 10.0, 20.0)


def l1_distance(values, reference, t_grid):
    return float(
        np.trapezoid(np.abs(values - reference), t_grid)
        / np.trapezoid(reference, t_grid)
    )


class HusimiTests(SimpleTestCase):
    def test_phase_space_normalization(self):
        state = GaussianState.from_sigma(x0=-20.0, k0=1.0, sigma=0.15)
        x = np.linspace(-60.0, 20.0, 801)
        k = np.linspace(-10.0, 12.0, 1601)
        weight = husimi_weight(state, x[:, None], k[None, :], sigma=2.0)
        mass = np.trapezoid(np.trapezoid(weight, k, axis=1), x) / (2.0 * math.pi)
        self.assertAlmostEqual(mass, 1.0, places=6)

    def test_joint_density_vanishes_for_negative_momenta(self):
        state = GaussianState.from_sigma(x0=-20.0, k0=1.0, sigma=0.15)
        joint = joint_density(
            state,
            2.0,
            DeltaBarrier(kappa=1.0),
            1.0,
            20.0,
            x_grid=np.linspace(-30.0, -10.0, 5),
            k_grid=np.array([-0.5, 0.8, 1.0, 1.2]),
            t_grid=np.linspace(20.0, 60.0, 9),
        )
        self.assertEqual(joint.values.shape, (9, 5, 4))
        self.assertTrue(np.all(joint.values[:, :, 0] == 0.0))
        self.assertTrue(np.all(joint.values[:, :, 1:] >= 0.0))


class TabulatedMomentumTests(SimpleTestCase):
    def setUp(self):
        self.k = np.linspace(0.2, 1.8, 2001)
        self.state = GaussianState.from_sigma(x0=-20.0, k0=1.0, sigma=0.1)

    def test_moments_of_gaussian(self):
        table = TabulatedMomentum(self.k, self.state.momentum_density(self.k), -20.0)
        self.assertAlmostEqual(table.mass, 1.0, places=8)
        self.assertAlmostEqual(table.k0, 1.0, places=8)
        self.assertAlmostEqual(table.sigma, 0.1, places=6)

    def test_invalid_tables(self):
        with self.assertRaises(ValidationError):
            TabulatedMomentum(self.k[::-1], self.state.momentum_density(self.k), 0.0)
        with self.assertRaises(ValidationError):
            TabulatedMomentum(self.k, -np.ones_like(self.k), 0.0)

    def test_rho_cross_of_a_table(self):
        table = TabulatedMomentum(self.k, self.state.momentum_density(self.k), -20.0)
        transmitted = rho_cross(table, DeltaBarrier(kappa=1.0), 1.0)
        self.assertAlmostEqual(transmitted.mass, 0.5, delta=0.01)


class MomentumProfileTests(SimpleTestCase):
    def test_delta_barrier_profile(self):
        k = np.array([0.5, 1.0, 2.0])
        profile = momentum_profile(DeltaBarrier(kappa=1.0), 1.0, k)
        np.testing.assert_allclose(profile.lambda_k, 1.0 / (k**2 + 1.0), rtol=1e-7)
        np.testing.assert_allclose(profile.transmission, k**2 / (k**2 + 1.0))
        np.testing.assert_allclose(
            profile.weight_sq, profile.transmission / (2.0 * math.pi)
        )
        np.testing.assert_array_equal(profile.d_k, np.zeros(3))

    def test_time_maps_include_forbidden_width(self):
        f_delay, f_tunneling = time_maps(SquareBarrier(V0=2.0, d=1.0), 1.0)
        self.assertAlmostEqual(f_tunneling(1.0) - f_delay(1.0), 1.0, places=10)


class SequentialDeltaBarrierTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.potential = DeltaBarrier(kappa=1.0)
        cls.state = GaussianState.from_sigma(x0=-50.0, k0=1.0, sigma=0.15)
        cls.t_grid = np.linspace(-1.0, 3.0, 801)
        cls.fraction = detected_fraction(cls.state, cls.potential, 1.0)
        cls.ideal_d, cls.ideal_t = ideal_distributions(
            cls.state, cls.potential, 1.0, cls.t_grid
        )

    def marginal(self, sigma):
        return marginal_delay(
            self.state, sigma, self.potential, 1.0, 20.0, self.t_grid, force=True
        )

    def test_detected_fraction(self):
        self.assertAlmostEqual(self.fraction, 0.5, delta=0.01)

    def test_marginals_nonnegative_and_normalized(self):
        for sigma in (1.0, 5.0):
            density = self.marginal(sigma)
            self.assertTrue(np.all(density.density >= 0.0))
            self.assertAlmostEqual(density.integral, self.fraction, delta=1e-2)

    def test_marginal_outside_regime_without_force(self):
        with self.assertRaises(RegimeViolation):
            marginal_tunneling(
                self.state, 1.0, self.potential, 1.0, 20.0, self.t_grid
            )
        forced = self.marginal(1.0)
        self.assertFalse(forced.regime_ok)
        self.assertTrue(forced.flags["violations"])

    def test_ideal_distributions_normalized(self):
        self.assertAlmostEqual(self.ideal_d.integral, self.fraction, delta=1e-2)
        np.testing.assert_allclose(self.ideal_d.density, self.ideal_t.density)
        self.assertFalse(self.ideal_d.degenerate.any())

    def test_convergence_to_ideal_limit(self):
        distances = [
            l1_distance(self.marginal(sigma).density, self.ideal_d.density, self.t_grid)
            for sigma in SIGMAS
        ]
        for wide, narrow in zip(distances, distances[1:]):
            self.assertLess(narrow, wide)
        self.assertLess(distances[-1], 0.1)

    def test_tunneling_marginal_depends_on_resolution(self):
        coarse, fine = (
            marginal_tunneling(
                self.state,
                sigma,
                self.potential,
                1.0,
                20.0,
                self.t_grid,
                force=True,
            )
            for sigma in (1.0, 2.0)
        )
        self.assertFalse(coarse.regime_ok)
        self.assertGreater(
            l1_distance(coarse.density, fine.density, self.t_grid), 0.05
        )

    def test_pushforward_identity(self):
        statistic = pushforward_check(
            self.state, self.potential, 1.0, self.ideal_d, samples=200_000
        )
        self.assertLess(statistic, 0.01)

    def test_regime_check_reports_unphysical_resolution(self):
        cond_d, cond_t, details = regime_check(self.potential, 1.0, self.state, 1.0)
        self.assertFalse(cond_d)
        self.assertFalse(cond_t)
        self.assertEqual(len(details["k"]), 5)
        cond_d, cond_t, _ = regime_check(self.potential, 20.0, self.state, 1.0)
        self.assertTrue(cond_d)
        self.assertTrue(cond_t)

    def test_sequential_density_metadata(self):
        result = sequential_density(
            self.state,
            2.0,
            self.potential,
            1.0,
            20.0,
            self.t_grid,
            self.t_grid,
            force=True,
        )
        metadata = result.metadata()
        self.assertAlmostEqual(metadata["norm"], self.fraction)
        self.assertFalse(result.regime_d)
        self.assertAlmostEqual(metadata["integral_d"], metadata["integral_tun"], 10)


class DegenerateJacobianTests(SimpleTestCase):
    def setUp(self):
        k = np.linspace(0.5, 1.5, 1200)
        self.table = TabulatedMomentum(k, np.exp(-((k - 1.0) ** 2) / 0.02), 0.0)
        self.t_grid = np.array([-0.01, 0.0, 0.01])

    def test_flagged(self):
        with self.assertLogs("tunneling.sequential", level="WARNING"):
            ideal = _pushforward(
                "delay",
                lambda k: (k - 1.0) ** 3,
                self.table,
                self.t_grid,
                True,
                strict=False,
            )
        self.assertTrue(ideal.degenerate[1])
        self.assertFalse(ideal.degenerate[0])

    def test_strict(self):
        with self.assertRaises(DegenerateJacobian):
            _pushforward(
                "delay",
                lambda k: (k - 1.0) ** 3,
                self.table,
                self.t_grid,
                True,
                strict=True,
            )
