import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from tunneling.arrival import (
    ArrivalMethod,
    GaussianLevel,
    detection_mass,
    extract_times,
    gaussian_time_scales,
    p_exact,
    p_full_smeared,
    p_gaussian_closed_form,
    p_monochromatic,
    smearing_kernel,
    spectral_norm,
    spectral_state,
    transmitted_fraction,
)
from tunneling.core_model import (
    DeltaBarrier,
    Free,
    GaussianState,
    GaussianSuperposition,
    SquareBarrier,
)
from tunneling.exceptions import GridTooCoarse, MultiPeak, RegimeViolation
from tunneling.oracle import kijowski_reference


def sup_relative(values, reference):
    return float(np.max(np.abs(values - reference)) / np.max(reference))


class FreeParticleTests(SimpleTestCase):
    def setUp(self):
        self.state = GaussianState.from_sigma(x0=-30.0, k0=5.0, sigma=0.1)
        self.spec = spectral_state(self.state, Free(), M=1.0, L=5.0)
        self.t_grid = np.arange(2.0, 12.0 + 1e-9, 0.025)

    def test_spectral_norms(self):
        self.assertAlmostEqual(spectral_norm(self.spec), 1.0, places=8)
        self.assertAlmostEqual(detection_mass(self.spec), 1.0, places=8)

    def test_overlaps_have_momentum_modulus(self):
        np.testing.assert_allclose(
            np.abs(self.spec.c_k),
            np.abs(self.state.momentum_amplitude(self.spec.k_grid)),
            rtol=1e-12,
        )

    def test_monochromatic_density_is_kijowski(self):
        kijowski = kijowski_reference(self.state, 1.0, 5.0, self.t_grid)
        density = p_monochromatic(self.spec, self.t_grid)
        self.assertLess(sup_relative(density.p, kijowski.p), 1e-6)

    def test_exact_density_close_to_kijowski(self):
        kijowski = kijowski_reference(self.state, 1.0, 5.0, self.t_grid)
        density = p_exact(self.spec, self.t_grid)
        self.assertLess(np.max(np.abs(density.p - kijowski.p)), 2e-5)
        self.assertEqual(density.method, ArrivalMethod.EXACT)

    def test_positivity_and_normalization(self):
        density = p_exact(self.spec, self.t_grid)
        self.assertGreaterEqual(density.flags["min_before_clamp"], -1e-12)
        self.assertAlmostEqual(density.detected + density.p_nodetect, 1.0, places=12)
        self.assertLess(density.p_nodetect, 1e-3)
        self.assertAlmostEqual(density.t_peak, 7.0, delta=0.1)

    def test_coarse_time_grid(self):
        with self.assertRaises(GridTooCoarse) as context:
            p_exact(self.spec, np.arange(2.0, 12.0, 0.5))
        self.assertIn("phase_step", context.exception.details)

    def test_time_grid_must_increase(self):
        with self.assertRaises(ValidationError):
            p_exact(self.spec, [3.0, 2.0, 4.0])


class SmearedDensityTests(SimpleTestCase):
    def setUp(self):
        self.state = GaussianState.from_sigma(x0=-100.0, k0=5.0, sigma=0.1)
        self.spec = spectral_state(self.state, Free(), M=1.0, L=5.0)
        self.t_grid = np.arange(14.0, 28.0 + 1e-9, 0.025)

    def test_kernel_large_argument_limit(self):
        epsilon = np.array([20.0, 40.0])
        values = smearing_kernel(epsilon, tau=5.0)
        np.testing.assert_allclose(values, 2.0 * np.sqrt(np.pi / epsilon), rtol=1e-3)

    def test_converges_to_exact_density(self):
        tau = 25.0 / 12.5
        smeared = p_full_smeared(self.spec, self.t_grid, tau)
        exact = p_exact(self.spec, self.t_grid)
        self.assertLess(sup_relative(smeared.p, exact.p), 0.02)
        self.assertEqual(smeared.flags["tau"], tau)

    def test_independent_of_smearing_width(self):
        first, second = (
            p_full_smeared(self.spec, self.t_grid, tau) for tau in (2.0, 2.6)
        )
        self.assertLess(sup_relative(second.p, first.p), 0.02)

    def test_grid_must_start_after_smearing_window(self):
        with self.assertRaises(RegimeViolation) as context:
            p_full_smeared(self.spec, self.t_grid, tau=4.0)
        self.assertEqual(context.exception.condition, "t_min >= smearing_start * tau")

    def test_nonpositive_tau(self):
        with self.assertRaises(ValidationError):
            p_full_smeared(self.spec, self.t_grid, tau=0.0)


class MonochromaticRegimeTests(SimpleTestCase):
    def setUp(self):
        state = GaussianState.from_sigma(x0=-60.0, k0=1.0, sigma=0.2)
        self.spec = spectral_state(state, Free(), M=1.0, L=5.0)
        self.t_grid = np.arange(40.0, 90.0, 0.1)

    def test_wide_state_rejected(self):
        with self.assertRaises(RegimeViolation):
            p_monochromatic(self.spec, self.t_grid)

    def test_forced_run_is_flagged(self):
        density = p_monochromatic(self.spec, self.t_grid, force=True)
        self.assertIn("regime_violation", density.flags)


class ClosedFormTests(SimpleTestCase):
    def setUp(self):
        self.t_grid = np.arange(5.0, 21.0 + 1e-9, 0.05)

    def closed_form(self, sigma, level, force=False):
        state = GaussianState.from_sigma(x0=-60.0, k0=5.0, sigma=sigma)
        weight, times = gaussian_time_scales(state, Free(), 1.0, 5.0)
        return state, p_gaussian_closed_form(
            state, weight, times, level, 1.0, 5.0, self.t_grid, force=force
        )

    def test_p3_matches_exact_density(self):
        state = GaussianState.from_sigma(x0=-15.0, k0=5.0, sigma=0.1)
        t_grid = np.arange(0.02, 9.0 + 1e-9, 0.02)
        weight, times = gaussian_time_scales(state, Free(), 1.0, 5.0)
        closed = p_gaussian_closed_form(
            state, weight, times, GaussianLevel.P3, 1.0, 5.0, t_grid
        )
        exact = p_exact(spectral_state(state, Free(), 1.0, 5.0), t_grid)
        self.assertLess(closed.flags["p3_parameter"], 0.01)
        self.assertLess(sup_relative(closed.p, exact.p), 0.01)
        self.assertLess(abs(closed.t_peak - exact.t_peak), 1.0 / (10 * 5.0 * 0.1))

    def test_p1_and_p2_agree_to_order_of_xi_correction(self):
        # xi = 1/(2 k0) for a free particle, so xi*sigma^2/k0 = sigma^2/(2 k0^2)
        k0 = 5.0
        t_grid = np.arange(-8.0, 8.0 + 1e-9, 0.005)
        for parameter in (1e-3, 1e-4):
            state = GaussianState.from_sigma(
                x0=-0.1, k0=k0, sigma=k0 * math.sqrt(2.0 * parameter)
            )
            weight, times = gaussian_time_scales(state, Free(), 1.0, 0.1)
            first, second = (
                p_gaussian_closed_form(state, weight, times, level, 1.0, 0.1, t_grid)
                for level in (GaussianLevel.P1, GaussianLevel.P2)
            )
            self.assertAlmostEqual(second.flags["p2_parameter"], parameter, places=12)
            self.assertLess(sup_relative(second.p, first.p), 2.0 * parameter)

    def test_p1_has_its_own_precondition(self):
        _, first = self.closed_form(1.0, GaussianLevel.P1)
        self.assertEqual(first.method, ArrivalMethod.P1)
        self.assertNotIn("regime_violations", first.flags)
        with self.assertRaises(RegimeViolation) as context:
            self.closed_form(1.0, GaussianLevel.P2)
        self.assertEqual(context.exception.condition, "sigma/k0 < monochromatic_limit")
        with self.assertRaises(RegimeViolation) as context:
            self.closed_form(2.5, GaussianLevel.P1)
        self.assertEqual(
            context.exception.condition, "negative-k weight < p1_tail_limit"
        )

    def test_free_p3_is_normalized(self):
        _, closed = self.closed_form(0.05, GaussianLevel.P3)
        self.assertAlmostEqual(closed.detected, 1.0, delta=1e-3)

    def test_deviation_grows_outside_regime(self):
        deviations = []
        for sigma in (0.05, 0.2):
            state, closed = self.closed_form(sigma, GaussianLevel.P3, force=True)
            exact = p_exact(spectral_state(state, Free(), 1.0, 5.0), self.t_grid)
            deviations.append(sup_relative(closed.p, exact.p))
        self.assertGreater(deviations[1], deviations[0])

    def test_level_conditions(self):
        with self.assertRaises(RegimeViolation) as context:
            self.closed_form(0.2, GaussianLevel.P3)
        self.assertEqual(context.exception.condition, "t_m^2*sigma^4/M^2 < p3_limit")
        _, forced = self.closed_form(0.2, GaussianLevel.P3, force=True)
        self.assertIn(
            "t_m^2*sigma^4/M^2 < p3_limit", forced.flags["regime_violations"]
        )
        _, first = self.closed_form(0.2, GaussianLevel.P1)
        self.assertEqual(first.method, ArrivalMethod.P1)


class DeltaBarrierArrivalTests(SimpleTestCase):
    def setUp(self):
        self.potential = DeltaBarrier(kappa=1.0)
        self.state = GaussianState.from_sigma(x0=-150.0, k0=1.0, sigma=0.02)
        self.spec = spectral_state(self.state, self.potential, M=1.0, L=100.0)
        self.density = p_exact(self.spec, np.arange(150.0, 350.0 + 1e-9, 0.5))

    def test_detected_equals_transmitted_fraction(self):
        transmitted = transmitted_fraction(self.state, self.potential, 1.0)
        self.assertAlmostEqual(self.density.detected, transmitted, delta=1e-2)
        self.assertAlmostEqual(transmitted, 0.5, delta=0.01)

    def test_peak_delay(self):
        times = extract_times(self.density, self.state, self.potential, 1.0, 100.0)
        self.assertAlmostEqual(times.t_d, 0.5, delta=0.5)
        self.assertGreater(times.t_d, 0.1)
        self.assertEqual(times.t_tun, times.t_d)
        self.assertIsNone(times.xi)

    def test_phase_time_at_mean_momentum(self):
        _, times = gaussian_time_scales(self.state, self.potential, 1.0, 100.0)
        self.assertAlmostEqual(times.t_tun, 0.5, places=8)


class SquareBarrierArrivalTests(SimpleTestCase):
    """First arrival through a tunneling barrier, well ahead of the wall echo."""

    def setUp(self):
        self.potential = SquareBarrier(V0=25.0, d=0.2)
        self.state = GaussianState.from_sigma(x0=-30.0, k0=5.0, sigma=0.1)

    def first_arrival(self, L):
        t0 = (30.0 + L) / 5.0
        t_grid = np.arange(t0 - 5.0, t0 + 4.5 + 1e-9, 0.02)
        spec = spectral_state(self.state, self.potential, M=1.0, L=L)
        return p_exact(spec, t_grid)

    def test_detected_equals_transmitted_fraction(self):
        density = self.first_arrival(20.0)
        transmitted = transmitted_fraction(self.state, self.potential, 1.0)
        self.assertGreater(transmitted, 0.2)
        self.assertLess(transmitted, 0.6)
        self.assertAlmostEqual(density.detected, transmitted, delta=1e-2)
        self.assertGreaterEqual(density.flags["min_before_clamp"], -1e-12)

    def test_p3_peak_matches_exact_density(self):
        density = self.first_arrival(20.0)
        weight, times = gaussian_time_scales(self.state, self.potential, 1.0, 20.0)
        closed = p_gaussian_closed_form(
            self.state,
            weight,
            times,
            GaussianLevel.P3,
            1.0,
            20.0,
            density.t_grid,
        )
        self.assertLess(abs(closed.t_peak - density.t_peak), 1.0 / (10 * 5.0 * 0.1))

    def test_peak_time_is_affine_in_detector_distance(self):
        positions = np.array([20.0, 30.0, 40.0])
        peaks = []
        for L in positions:
            times = extract_times(
                self.first_arrival(L), self.state, self.potential, 1.0, L
            )
            peaks.append(times.t_d + (30.0 + L) / 5.0)
            self.assertAlmostEqual(times.d_k, 0.2)
        slope, _ = np.polyfit(positions, peaks, 1)
        self.assertAlmostEqual(slope, 1.0 / 5.0, delta=0.01 / 5.0)


class MultiPeakTests(SimpleTestCase):
    def test_two_packets_have_no_single_delay(self):
        state = GaussianSuperposition.of(
            [
                GaussianState.from_sigma(-40.0, 4.0, 0.08),
                GaussianState.from_sigma(-40.0, 6.0, 0.08),
            ]
        )
        spec = spectral_state(state, Free(), M=1.0, L=40.0)
        density = p_exact(spec, np.arange(8.0, 28.0 + 1e-9, 0.05))
        with self.assertRaises(MultiPeak) as context:
            extract_times(density, state, Free(), 1.0, 40.0)
        self.assertEqual(len(context.exception.details["peak_times"]), 2)
        arrivals = sorted(context.exception.details["peak_times"])
        self.assertAlmostEqual(arrivals[0], 80.0 / 6.0, delta=0.2)
        self.assertAlmostEqual(arrivals[1], 20.0, delta=0.2)
        self.assertTrue(math.isfinite(density.t_peak))
