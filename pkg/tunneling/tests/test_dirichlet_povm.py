import math

import numpy as np
from django.test import SimpleTestCase

from tunneling.core_model import DeltaBarrier, Free, SquareBarrier, a_coefficient
from tunneling.dirichlet_povm import (
    TimeScales,
    b_rough,
    b_smeared,
    dirichlet_mode,
    expansion_params,
    lambda_full,
    lambda_parity,
    lambda_smeared,
    phase_time,
    povm_weight,
    richardson_derivative,
    uncertainty_bound,
)
from tunneling.exceptions import (
    PhaseUnwrapFailure,
    ResonantDenominator,
    ZeroTransmission,
)
from tunneling.scattering import ScatteringSolution, solution_provider


class DirichletModeTests(SimpleTestCase):
    def test_free_particle_constants(self):
        mode = dirichlet_mode(solution_provider(Free(), 1.0)(2.0), L=5.0)
        self.assertAlmostEqual(abs(mode.D), 1.0 / math.sqrt(math.pi), places=14)
        self.assertAlmostEqual(mode.eta, math.sqrt(2.0), places=14)
        self.assertAlmostEqual(abs(mode.D_half), math.sqrt(2.0 / math.pi), 14)

    def test_free_particle_wave_amplitude(self):
        provider = solution_provider(Free(), 1.0)
        for k in (0.3, 1.0, 2.7):
            for L in (0.5, 5.0, 41.3):
                mode = dirichlet_mode(provider(k), L=L)
                self.assertLess(
                    abs(abs(mode.D_wave) - 1.0 / math.sqrt(2.0 * math.pi)), 1e-10
                )

    def test_mode_vanishes_at_detector(self):
        provider = solution_provider(SquareBarrier(V0=2.0, d=1.0), 1.0)
        mode = dirichlet_mode(provider(1.3), L=7.0)
        self.assertLess(abs(mode.value(7.0)), 1e-14)

    def test_tail_is_a_standing_wave(self):
        provider = solution_provider(SquareBarrier(V0=2.0, d=1.0), 1.0)
        mode = dirichlet_mode(provider(1.3), L=7.0)
        for x in (1.0, 4.2, 6.7):
            expected = mode.D * math.sin(1.3 * (7.0 - x))
            self.assertAlmostEqual(abs(mode.value(x) - expected), 0.0, places=13)


class PovmWeightTests(SimpleTestCase):
    def test_free_particle_weights_coincide(self):
        weight = povm_weight(solution_provider(Free(), 1.0)(1.5), L=3.0)
        expected = -1j / math.sqrt(2.0 * math.pi)
        for value in (weight.B, weight.B_tilde, weight.B_rough):
            self.assertAlmostEqual(abs(value - expected), 0.0, places=14)
        self.assertAlmostEqual(abs(weight.B_half - weight.B_detect), 0.0, places=14)

    def test_free_particle_weight_does_not_oscillate(self):
        provider = solution_provider(Free(), 1.0)
        solution = provider(1.5)
        self.assertLess(abs(solution.f), 1e-12)
        expected = -1j / math.sqrt(2.0 * math.pi)
        for L in (0.7, 3.0, 3.0 + math.pi / 3.0, 25.0):
            weight = povm_weight(solution, L)
            self.assertAlmostEqual(abs(weight.B - expected), 0.0, places=14)

    def test_smeared_equals_rough_for_unit_amplitudes(self):
        provider = solution_provider(SquareBarrier(V0=2.0, d=1.0), 1.0)
        for k in (0.5, 1.0, 1.7, 2.5):
            solution = provider(k)
            self.assertAlmostEqual(
                abs(b_smeared(solution) - b_rough(solution)), 0.0, places=13
            )

    def test_detector_average_of_half_line_weight(self):
        provider = solution_provider(SquareBarrier(V0=2.0, d=1.0), 1.0)
        k = 1.1
        solution = provider(k)
        positions = 20.0 + np.linspace(0.0, math.pi / k, 4001)[:-1]
        weights = np.array([povm_weight(solution, L).B_half for L in positions])
        detect = povm_weight(solution, 20.0).B_detect
        self.assertAlmostEqual(abs(np.mean(weights) - detect), 0.0, places=10)
        self.assertAlmostEqual(
            np.mean(np.abs(weights) ** 2) / abs(detect) ** 2,
            1.0 / solution.transmission,
            places=8,
        )


class ExpansionTests(SimpleTestCase):
    def test_richardson_derivative(self):
        value, fine = richardson_derivative(math.sin, 0.3, 1e-3)
        self.assertAlmostEqual(value, math.cos(0.3), places=11)
        self.assertLess(abs(value - math.cos(0.3)), abs(fine - math.cos(0.3)))

    def test_constant_weight(self):
        params = expansion_params(lambda k: -1j / math.sqrt(2.0 * math.pi), 2.0)
        self.assertAlmostEqual(params.xi, 0.25, places=10)
        self.assertAlmostEqual(params.lambda_, 0.0, places=10)

    def test_zero_amplitude(self):
        with self.assertRaises(ZeroTransmission):
            expansion_params(lambda k: 0j, 1.0)

    def test_phase_jump_detected(self):
        with self.assertRaises(PhaseUnwrapFailure) as context:
            expansion_params(lambda k: 1.0 + 0j if k <= 1.0 else -1.0 + 0j, 1.0)
        self.assertIn("jump", context.exception.details)


class PhaseTimeTests(SimpleTestCase):
    def test_delta_barrier(self):
        provider = solution_provider(DeltaBarrier(kappa=1.0), 1.0)
        times = phase_time(provider, k0=1.0, M=1.0, d_k=0.0, sigma=0.02)
        self.assertAlmostEqual(times.lambda_, 0.5, places=8)
        self.assertAlmostEqual(times.t_tun, 0.5, places=8)
        self.assertAlmostEqual(times.t_d, times.t_tun, places=12)
        self.assertAlmostEqual(times.uncertainty, 50.0)

    def test_hartman_saturation(self):
        V0, k0 = 2.0, 1.0
        gamma = math.sqrt(2.0 * V0 - k0**2)
        tunneling = []
        for d in (4.0, 8.0, 16.0):
            provider = solution_provider(SquareBarrier(V0=V0, d=d), 1.0)
            tunneling.append(phase_time(provider, k0, 1.0, d_k=d).t_tun)
        for value in tunneling:
            self.assertAlmostEqual(value, 2.0 / (gamma * k0), places=4)
        self.assertLess((max(tunneling) - min(tunneling)) / min(tunneling), 0.01)

    def test_as_dict_renames_lambda(self):
        times = TimeScales(k0=1.0, xi=0.5, lambda_=0.2, d_k=0.0, t_d=0.2, t_tun=0.2)
        data = times.as_dict()
        self.assertIn("lambda", data)
        self.assertNotIn("lambda_", data)


class DetectorPhaseTests(SimpleTestCase):
    def setUp(self):
        self.provider = solution_provider(SquareBarrier(V0=0.4, d=1.0), 1.0)

    def test_parity_form_matches_full_expression(self):
        for L in (5.0, 5.3, 12.7):
            self.assertAlmostEqual(
                lambda_full(self.provider, 1.0, L),
                lambda_parity(self.provider, 1.0, L),
                places=6,
            )

    def test_parity_form_without_reflection(self):
        provider = solution_provider(Free(), 1.0)
        self.assertAlmostEqual(lambda_parity(provider, 1.0, 5.0), 0.0, places=10)

    def test_vanishing_width_recovers_full_expression(self):
        self.assertAlmostEqual(
            lambda_smeared(self.provider, 1.0, 8.0, 1e-9),
            lambda_full(self.provider, 1.0, 8.0),
            places=6,
        )

    def test_resonant_denominator(self):
        def mirror(k: float) -> ScatteringSolution:
            return ScatteringSolution(
                k=k, T_plus=0j, R_plus=1 + 0j, T_minus=0j, R_minus=1 + 0j, S=0j
            )

        with self.assertRaises(ResonantDenominator):
            lambda_full(mirror, 1.0, math.pi / 2.0)


class UncertaintyTests(SimpleTestCase):
    def test_long_barrier_not_distinguishable(self):
        barrier = SquareBarrier(V0=2.0, d=8.0)
        provider = solution_provider(barrier, 1.0)
        times = phase_time(provider, 1.0, 1.0, d_k=8.0)
        a = a_coefficient(barrier, 1.0, 1.0)
        bound = uncertainty_bound(times, a, sigma=0.1, M=1.0, k0=1.0)
        self.assertFalse(bound.distinguishable)
        self.assertAlmostEqual(bound.optimal_sigma, math.sqrt(1.0 / 8.0))
        self.assertAlmostEqual(bound.minimum, 2.0 * math.sqrt(8.0))
        self.assertGreaterEqual(bound.total, bound.minimum)
