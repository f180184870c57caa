import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from tunneling.core_model import (
    DeltaBarrier,
    Free,
    GaussianState,
    GaussianSuperposition,
    PhysParams,
    PiecewiseConstant,
    Sampled,
    SquareBarrier,
    a_coefficient,
    evaluate_potential,
    forbidden_region,
    parse_potential,
    potential_from_dict,
)
from tunneling.exceptions import NonDifferentiablePotential


class PotentialTests(SimpleTestCase):
    def test_square_barrier_support(self):
        barrier = SquareBarrier(V0=2.0, d=1.0)
        self.assertEqual(evaluate_potential(barrier, 0.0), 2.0)
        self.assertEqual(evaluate_potential(barrier, 0.6), 0.0)
        self.assertEqual(barrier.width, 1.0)

    def test_delta_barrier_evaluates_to_zero(self):
        barrier = DeltaBarrier(kappa=1.0)
        self.assertEqual(evaluate_potential(barrier, 0.0), 0.0)
        self.assertTrue(barrier.is_distributional)
        self.assertEqual(barrier.point_interactions(), ((0.0, 1.0),))

    def test_invalid_parameters_are_rejected(self):
        with self.assertRaises(ValidationError):
            SquareBarrier(V0=-1.0, d=1.0)
        with self.assertRaises(ValidationError):
            SquareBarrier(V0=1.0, d=0.0)
        with self.assertRaises(ValidationError):
            DeltaBarrier(kappa=0.0)
        with self.assertRaises(ValidationError):
            PiecewiseConstant(((0.0, 1.0, 1.0), (0.5, 2.0, 1.0)))

    def test_piecewise_parity(self):
        symmetric = PiecewiseConstant(((-1.0, 1.0, 3.0),))
        asymmetric = PiecewiseConstant(((-1.0, 0.0, 3.0), (0.0, 2.0, 1.0)))
        self.assertTrue(symmetric.is_parity_symmetric)
        self.assertFalse(asymmetric.is_parity_symmetric)
        self.assertEqual(asymmetric.half_width, 2.0)

    def test_sampled_is_zero_outside_samples(self):
        bump = Sampled.gaussian_bump(V0=3.0, width=0.5, half_width=3.0)
        self.assertEqual(evaluate_potential(bump, 5.0), 0.0)
        self.assertAlmostEqual(evaluate_potential(bump, 0.0), 3.0, places=6)
        self.assertTrue(bump.is_parity_symmetric)

    def test_parse_short_form(self):
        self.assertEqual(parse_potential("square:V0=2,d=1"), SquareBarrier(2.0, 1.0))
        self.assertEqual(parse_potential("delta:kappa=1"), DeltaBarrier(1.0))
        self.assertEqual(parse_potential("free"), Free())
        with self.assertRaises(ValidationError) as context:
            parse_potential("square:V0=2")
        self.assertIn("d", str(context.exception))

    def test_from_dict_round_trips_describe(self):
        barrier = PiecewiseConstant(((-1.0, 0.0, 3.0), (0.0, 2.0, 1.0)))
        self.assertEqual(potential_from_dict(barrier.describe()), barrier)
        with self.assertRaises(ValidationError):
            potential_from_dict({"kind": "ramp"})


class ForbiddenRegionTests(SimpleTestCase):
    def test_square_barrier_below_top(self):
        barrier = SquareBarrier(V0=2.0, d=1.0)
        x1, x2, d_k = forbidden_region(barrier, 1.0, 1.0)
        self.assertEqual((x1, x2, d_k), (-0.5, 0.5, 1.0))

    def test_above_barrier_and_delta(self):
        self.assertEqual(forbidden_region(SquareBarrier(2.0, 1.0), 3.0, 1.0)[2], 0.0)
        self.assertEqual(forbidden_region(DeltaBarrier(1.0), 1.0, 1.0)[2], 0.0)

    def test_turning_points_follow_the_energy(self):
        barrier = SquareBarrier(V0=2.0, d=1.0)
        self.assertEqual(forbidden_region(barrier, 1.5, 1.0)[2], 1.0)
        self.assertEqual(forbidden_region(barrier, 1.5, 0.25)[2], 0.0)
        self.assertEqual(forbidden_region(barrier, 0.75, 0.25)[2], 1.0)

    def test_sampled_turning_points(self):
        bump = Sampled.gaussian_bump(V0=2.0, width=1.0, half_width=5.0, points=801)
        k = 1.0
        x1, x2, d_k = forbidden_region(bump, k, 1.0)
        expected = 2.0 * np.sqrt(2.0 * np.log(2.0 / 0.5))
        self.assertAlmostEqual(d_k, expected, places=4)
        self.assertAlmostEqual(x1, -x2, places=6)

    def test_a_coefficient_parity_shortcut(self):
        barrier = SquareBarrier(V0=2.0, d=1.0)
        self.assertAlmostEqual(a_coefficient(barrier, 1.0, 1.0), -1.0)

    def test_a_coefficient_requires_derivative(self):
        barrier = PiecewiseConstant(((-1.0, 0.0, 3.0), (0.0, 2.0, 3.0)))
        with self.assertRaises(NonDifferentiablePotential):
            a_coefficient(barrier, 1.0, 1.0, use_parity_shortcut=False)

    def test_a_coefficient_zero_without_forbidden_region(self):
        self.assertEqual(a_coefficient(SquareBarrier(1.0, 1.0), 3.0, 1.0), 0.0)


class PhysParamsTests(SimpleTestCase):
    def test_detector_must_clear_support(self):
        with self.assertRaises(ValidationError):
            PhysParams(M=1.0, L=0.4).validate_against(SquareBarrier(1.0, 1.0))

    def test_far_detector_flag(self):
        barrier = SquareBarrier(1.0, 1.0)
        self.assertTrue(PhysParams(M=1.0, L=20.0).validate_against(barrier))
        with self.assertLogs("tunneling.core_model", level="WARNING"):
            self.assertFalse(PhysParams(M=1.0, L=2.0).validate_against(barrier))

    def test_mass_must_be_positive(self):
        with self.assertRaises(ValidationError):
            PhysParams(M=0.0, L=1.0)


class GaussianStateTests(SimpleTestCase):
    def setUp(self):
        self.state = GaussianState.from_sigma(x0=-30.0, k0=5.0, sigma=0.1)

    def test_minimum_uncertainty(self):
        self.assertAlmostEqual(self.state.delta, 5.0)
        with self.assertRaises(ValidationError):
            GaussianState(x0=-30.0, k0=5.0, delta=1.0, sigma=1.0)

    def test_momentum_density_normalized(self):
        k = np.linspace(*self.state.momentum_window, 2001)
        mass = np.trapezoid(self.state.momentum_density(k), k)
        self.assertAlmostEqual(mass, 1.0, places=6)

    def test_position_density_normalized(self):
        x = np.linspace(-80.0, 20.0, 20001)
        mass = np.trapezoid(np.abs(self.state.position_amplitude(x)) ** 2, x)
        self.assertAlmostEqual(mass, 1.0, places=8)

    def test_monochromatic_flag(self):
        self.assertTrue(self.state.is_monochromatic)
        wide = GaussianState.from_sigma(x0=-30.0, k0=1.0, sigma=0.3)
        self.assertFalse(wide.is_monochromatic)

    def test_placement_rejects_overlap(self):
        barrier = SquareBarrier(1.0, 2.0)
        with self.assertRaises(ValidationError):
            GaussianState.from_sigma(x0=-3.0, k0=5.0, sigma=0.1).check_placement(
                barrier
            )
        self.assertAlmostEqual(self.state.check_placement(barrier), 5.0 / 29.0)


class SuperpositionTests(SimpleTestCase):
    def test_normalized_and_components(self):
        state = GaussianSuperposition.of(
            [
                GaussianState.from_sigma(-40.0, 4.0, 0.08),
                GaussianState.from_sigma(-40.0, 6.0, 0.08),
            ]
        )
        k = np.linspace(*state.momentum_window, 8001)
        self.assertAlmostEqual(np.trapezoid(state.momentum_density(k), k), 1.0, 6)
        self.assertEqual(len(state.components), 2)
        self.assertAlmostEqual(state.k0, 5.0)

    def test_empty_superposition(self):
        with self.assertRaises(ValidationError):
            GaussianSuperposition(())
