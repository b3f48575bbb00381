import random
import time
from dataclasses import replace

import numpy as np

from farmsim.exceptions import BenchmarkError, FluidConvergenceError, InvalidScenario
from farmsim.fluid import (
    OccupancyVector,
    StateOrdering,
    ThresholdAction,
    WithinGroupSplit,
    availability_load,
    birth_death_steady_state,
    fluid_equilibrium,
    normalized_deviation,
    opt_energy_efficiency,
    optimal_threshold,
    relaxed_subproblem_value,
    solve_fluid,
    threshold_action,
    whittle_index,
)
from farmsim.fluid.ordering import VIRTUAL_GROUP
from farmsim.model import JobType, Scenario, ServerGroup, TieBreak, at_scale, with_size_distribution
from tests.utils.base_cases import TestCase, load_fixture


def single_group(rate: float, base_count: int = 1, buffer: int = 2) -> Scenario:
    return Scenario(
        groups=(ServerGroup(1, 1.0, 2.0, 1.0, buffer, base_count),),
        job_types=(JobType(1, rate, frozenset({1})),),
        name="single",
    )


class BirthDeathTest(TestCase):
    def test_steady_state(self) -> None:
        np.testing.assert_allclose(birth_death_steady_state(0.5, 1.0, 2), [4 / 7, 2 / 7, 1 / 7])
        np.testing.assert_allclose(birth_death_steady_state(1.0, 1.0, 2), [1 / 3, 1 / 3, 1 / 3])
        np.testing.assert_array_equal(birth_death_steady_state(0.0, 1.0, 3), [1.0, 0.0, 0.0, 0.0])
        large = birth_death_steady_state(1000.0, 1.0, 200)
        self.assertTrue(np.all(np.isfinite(large)))
        self.assertAlmostEqual(1.0, float(large[-1]), places=2)
        with self.assertRaises(InvalidScenario):
            birth_death_steady_state(1.0, 0.0, 2)


class IndexTest(TestCase):
    def test_whittle_index(self) -> None:
        group = load_fixture("case_i").group(1)
        self.assertAlmostEqual(0.1, whittle_index(group, 1.0), delta=1e-5)
        self.assertEqual(1.0, whittle_index(group, 0.0))

    def test_threshold_action(self) -> None:
        group = ServerGroup(1, 1.0, 2.0, 1.0, 3)
        # index 1 - 0.5 = 0.5
        self.assertEqual(ThresholdAction.ACCEPT, threshold_action(group, 0.2, 0.5))
        self.assertEqual(ThresholdAction.EITHER, threshold_action(group, 0.5, 0.5))
        self.assertEqual(ThresholdAction.REJECT, threshold_action(group, 0.7, 0.5))

    def test_relaxed_subproblem_value(self) -> None:
        group = ServerGroup(1, 1.0, 2.0, 1.0, 2)
        # lambda = mu = 1, e* = 0, nu = 0: accept in state 0 only keeps the server busy half of the time
        self.assertAlmostEqual(0.5, relaxed_subproblem_value(group, 0, 0.0, 0.0, 1.0))
        self.assertAlmostEqual(2 / 3, relaxed_subproblem_value(group, 1, 0.0, 0.0, 1.0))
        for m in (-1, 2):
            with self.assertRaises(ValueError):
                relaxed_subproblem_value(group, m, 0.0, 0.0, 1.0)

    def test_optimal_threshold_structure(self) -> None:
        """Below the index the best threshold accepts everywhere, above it rejecting is best."""
        rng = random.Random(5)
        for _ in range(1000):
            eps_idle = rng.uniform(0.0, 5.0)
            group = ServerGroup(1, rng.uniform(0.1, 10.0), eps_idle + rng.uniform(0.1, 10.0), eps_idle, rng.randint(1, 8))
            e_star = rng.uniform(0.0, 2.0)
            nu = rng.uniform(-1.0, 1.0)
            arrival_rate = rng.uniform(0.01, 20.0)
            best = optimal_threshold(group, nu, e_star, arrival_rate)
            action = threshold_action(group, nu, e_star)
            if action == ThresholdAction.ACCEPT:
                self.assertEqual(group.buffer - 1, best)
            elif action == ThresholdAction.REJECT:
                self.assertIsNone(best)

    def test_availability_load(self) -> None:
        load, heavy = availability_load(single_group(1.0))
        self.assertAlmostEqual(2 / 3, load[1])
        self.assertTrue(heavy)
        load, heavy = availability_load(at_scale(single_group(1.0), 2))
        self.assertAlmostEqual(6 / 7, load[1])
        self.assertTrue(heavy)
        load, heavy = availability_load(at_scale(single_group(0.2), 3))
        self.assertGreater(load[1], 1.0)
        self.assertFalse(heavy)


class OrderingTest(TestCase):
    def test_case_i_ordering(self) -> None:
        scenario = load_fixture("case_i")
        ordering = StateOrdering.for_scenario(scenario)
        self.assertEqual(16, len(ordering))
        self.assertEqual((1, 2, 3, 4, 5), ordering.group_priority)
        self.assertEqual((1, 0, True), tuple(ordering.states[0]))
        self.assertEqual((1, 1, True), tuple(ordering.states[1]))
        self.assertEqual(10, ordering.index(VIRTUAL_GROUP, 0))
        self.assertTrue(all(not s.controllable for s in ordering.states[11:]))

    def test_occupancy_vector(self) -> None:
        scenario = load_fixture("case_ii")
        fractions = {k: [0.5, 0.5] if k % 2 else [1.0, 0.0] for k in scenario.group_ids}
        z = OccupancyVector.from_group_fractions(scenario, fractions)
        self.assertAlmostEqual(1.0, float(z.z.sum()))
        self.assertAlmostEqual(1 / 6, z.group_mass(3))
        self.assertAlmostEqual(1 / 6, z.group_mass(VIRTUAL_GROUP))
        np.testing.assert_allclose(z.group_fractions(scenario, 3), [0.5, 0.5])
        self.assertAlmostEqual(0.0, z.busy_fraction(scenario, 2))
        self.assertEqual(0.0, z.distance(z))
        self.assertEqual(len(z.ordering), len(z.as_dict()))


class EquilibriumTest(TestCase):
    def assert_simplex(self, z: OccupancyVector, scenario: Scenario) -> None:
        self.assertTrue(np.all(z.z >= 0))
        self.assertAlmostEqual(1.0, float(z.z.sum()), delta=1e-9)
        for g in scenario.groups:
            self.assertAlmostEqual(g.base_count / scenario.s0, z.group_mass(g.id), delta=1e-9)

    def test_single_group(self) -> None:
        scenario = single_group(0.5)
        result = opt_energy_efficiency(scenario)
        self.assertAlmostEqual(1 / 3, result.ee_opt, delta=1e-6)
        self.assertTrue(result.certified)
        self.assertFalse(result.approximate)
        self.assert_simplex(result.z_star, scenario)
        self.assertAlmostEqual(0.5, result.z_star.busy_fraction(scenario, 1), delta=1e-6)

    def test_splits(self) -> None:
        scenario = single_group(1.5, base_count=3)
        golden = 0.5 * (5 ** 0.5 - 1)
        expected = {
            WithinGroupSplit.PROPORTIONAL: [0.5, 0.5 * golden, 0.5 * golden ** 2],
            WithinGroupSplit.LOWEST_FIRST: [0.5, 0.5, 0.0],
            WithinGroupSplit.HIGHEST_FIRST: [0.5, 0.0, 0.5],
        }
        for split in WithinGroupSplit:
            z, model, x = solve_fluid(scenario, split=split)
            self.assert_simplex(z, scenario)
            self.assertAlmostEqual(0.5, z.busy_fraction(scenario, 1), delta=1e-9)
            np.testing.assert_allclose(z.group_fractions(scenario, 1), expected[split], atol=1e-9)
            if split != WithinGroupSplit.HIGHEST_FIRST:
                # away from the saturation threshold the resolved state is a rest point of the dynamics
                self.assertLess(model.residual(x), 1e-9)

    def test_saturated_group_passes_flow_on(self) -> None:
        scenario = Scenario(
            groups=(ServerGroup(1, 1.0, 2.0, 1.0, 2, 1), ServerGroup(2, 1.0, 4.0, 1.0, 2, 2)),
            job_types=(JobType(1, 3.0, frozenset({1, 2})),),
            name="overflow",
        )
        for split in WithinGroupSplit:
            z = fluid_equilibrium(scenario, split=split)
            np.testing.assert_allclose(z.group_fractions(scenario, 1), [0.0, 0.0, 1.0], atol=1e-12)
            # group 1 serves 1, group 2 gets the remaining 2 on capacity 2
            np.testing.assert_allclose(z.group_fractions(scenario, 2), [0.0, 0.0, 1.0], atol=1e-12)
        z = fluid_equilibrium(replace(scenario, job_types=(JobType(1, 2.0, frozenset({1, 2})),)), split="lowest-first")
        np.testing.assert_allclose(z.group_fractions(scenario, 2), [0.5, 0.5, 0.0], atol=1e-12)

    def test_zero_arrivals(self) -> None:
        result = opt_energy_efficiency(single_group(0.0))
        self.assertEqual(0.0, result.ee_opt)
        self.assertEqual(0.0, result.throughput)

    def test_case_i(self) -> None:
        scenario = load_fixture("case_i")
        start = time.perf_counter()
        result = opt_energy_efficiency(scenario)
        self.assertLess(time.perf_counter() - start, 5.0)
        self.assertAlmostEqual(0.27609, result.ee_opt, delta=2e-4)
        self.assertAlmostEqual(22.8421, result.power, delta=1e-2)
        self.assertTrue(result.certified)
        self.assert_simplex(result.z_star, scenario)
        self.assertAlmostEqual(0.78232, result.z_star.busy_fraction(scenario, 1), delta=1e-4)
        # lowest-label tie breaking fills servers one by one
        self.assertAlmostEqual(0.0, result.z_star.group_fractions(scenario, 1)[1], delta=1e-9)
        for k in (2, 3, 4, 5):
            self.assertAlmostEqual(0.0, result.z_star.busy_fraction(scenario, k), delta=1e-4)
        self.assertAlmostEqual(whittle_index(scenario.group(1), result.ee_opt), result.indices[1])
        # the fluid model lives at base scale
        self.assertAlmostEqual(result.ee_opt, opt_energy_efficiency(at_scale(scenario, 20)).ee_opt, delta=1e-9)

    def test_fixtures_finish(self) -> None:
        for name in ("case_i", "case_ii", "ten_group_trace"):
            scenario = load_fixture(name)
            for tie_break in TieBreak:
                start = time.perf_counter()
                result = opt_energy_efficiency(replace(scenario, tie_break=tie_break))
                self.assertLess(time.perf_counter() - start, 5.0, f"{name} {tie_break}")
                self.assertGreater(result.ee_opt, 0.0)

    def test_integration_reaches_resolved_state(self) -> None:
        scenario = load_fixture("case_i")
        for split in (WithinGroupSplit.PROPORTIONAL, WithinGroupSplit.LOWEST_FIRST):
            resolved = fluid_equilibrium(scenario, split=split)
            integrated = fluid_equilibrium(scenario, split=split, method="integrate")
            self.assertLess(resolved.distance(integrated), 1e-6, split)

    def test_approximate(self) -> None:
        result = opt_energy_efficiency(with_size_distribution(single_group(0.5), "pareto-f"))
        self.assertTrue(result.approximate)

    def test_not_at_rest(self) -> None:
        with self.assertRaises(FluidConvergenceError) as context:
            fluid_equilibrium(load_fixture("case_i"), tol=1e-12, max_time=0.01, split="proportional",
                              method="integrate")
        self.assertGreater(context.exception.residual, 1e-12)
        self.assertIsNotNone(context.exception.last_iterate)

    def test_evaluation_budget(self) -> None:
        start = time.perf_counter()
        with self.assertRaises(FluidConvergenceError) as context:
            solve_fluid(load_fixture("case_i"), split="highest-first", method="integrate", max_evaluations=50)
        self.assertLess(time.perf_counter() - start, 5.0)
        self.assertIn("50 evaluations", str(context.exception))
        self.assertIsInstance(context.exception.last_iterate, OccupancyVector)


class DeviationTest(TestCase):
    def test_normalized_deviation(self) -> None:
        self.assertAlmostEqual(0.03, normalized_deviation(0.5, 0.485))
        self.assertAlmostEqual(-0.02, normalized_deviation(0.5, 0.51))
        with self.assertRaises(BenchmarkError):
            normalized_deviation(0.0, 0.1)
