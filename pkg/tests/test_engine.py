from itertools import islice

import numpy as np

from farmsim.engine import (
    EventCalendar,
    EventKind,
    JobRecord,
    RunSettings,
    ServerRuntime,
    StreamKind,
    poisson_source,
    ps_reschedule,
    replications,
    run,
    sample_job_size,
    srpt_reschedule,
    stream_rng,
)
from farmsim.engine.arrivals import poisson_arrivals
from farmsim.engine.server import ps_advance
from farmsim.exceptions import CalendarCorruption, ConfigurationError, ObservationWindowError
from farmsim.fluid import birth_death_steady_state
from farmsim.model import (
    Discipline,
    JobType,
    Scenario,
    ServerGroup,
    SizeDistribution,
    at_scale,
    load_scenario,
    with_policy_options,
    with_size_distribution,
)
from tests.utils.base_cases import TestCase, fixtures_path, load_fixture


def single_server(rate: float, mu: float = 1.0, buffer: int = 2) -> Scenario:
    return Scenario(
        groups=(ServerGroup(1, mu, 2.0, 1.0, buffer),),
        job_types=(JobType(1, rate, frozenset({1})),),
    )


def runtime(mu: float, *remaining: float) -> ServerRuntime:
    server = ServerRuntime(0, ServerGroup(1, mu, 2.0, 1.0, 5))
    server.jobs = [JobRecord(i, 1, r, r, 0.0) for i, r in enumerate(remaining)]
    return server


class CalendarTest(TestCase):
    def test_order(self) -> None:
        calendar = EventCalendar()
        calendar.push(2.0, EventKind.ARRIVAL, "a")
        calendar.push(1.0, EventKind.DEPARTURE, "b")
        calendar.push(1.0, EventKind.ARRIVAL, "c")
        self.assertEqual(1.0, calendar.peek_time())
        self.assertEqual([(1.0, EventKind.DEPARTURE, "b"), (1.0, EventKind.ARRIVAL, "c"), (2.0, EventKind.ARRIVAL, "a")],
                         [calendar.pop() for _ in range(3)])
        self.assertTrue(calendar.empty)
        self.assertIsNone(calendar.peek_time())

    def test_past_events(self) -> None:
        calendar = EventCalendar()
        calendar.push(2.0, EventKind.ARRIVAL, None)
        calendar.pop()
        with self.assertRaises(CalendarCorruption):
            calendar.push(1.5, EventKind.DEPARTURE, None)


class RandomStreamTest(TestCase):
    def test_streams(self) -> None:
        a = stream_rng(7, StreamKind.ARRIVALS, 1).random(5)
        self.assertTrue(np.array_equal(a, stream_rng(7, StreamKind.ARRIVALS, 1).random(5)))
        self.assertFalse(np.array_equal(a, stream_rng(7, StreamKind.SIZES, 1).random(5)))
        self.assertFalse(np.array_equal(a, stream_rng(7, StreamKind.ARRIVALS, 2).random(5)))
        self.assertFalse(np.array_equal(a, stream_rng((7, 1), StreamKind.ARRIVALS, 1).random(5)))

    def test_size_means(self) -> None:
        n = 1_000_000
        sizes = sample_job_size(SizeDistribution.exponential(), stream_rng(1, StreamKind.SIZES, 1), n)
        self.assertAlmostEqual(1.0, float(np.mean(sizes)), delta=0.01)
        # a finite-variance Pareto shape keeps the sample mean tight
        sizes = sample_job_size(SizeDistribution.pareto_finite(3.0), stream_rng(1, StreamKind.SIZES, 2), n)
        self.assertAlmostEqual(1.0, float(np.mean(sizes)), delta=0.02)
        self.assertEqual(1.0, sample_job_size(SizeDistribution.deterministic(), stream_rng(1, StreamKind.SIZES, 3)))

    def test_pareto_tails(self) -> None:
        n = 1_000_000
        for dist in (SizeDistribution.pareto_finite(), SizeDistribution.pareto_infinite()):
            sizes = np.asarray(sample_job_size(dist, stream_rng(2, StreamKind.SIZES, 1), n))
            self.assertGreaterEqual(float(sizes.min()), dist.pareto_scale)
            assert dist.shape is not None
            for factor in (2.0, 10.0):
                expected = factor ** -dist.shape
                self.assertAlmostEqual(expected, float(np.mean(sizes > factor * dist.pareto_scale)), delta=0.1 * expected)

    def test_poisson_arrivals(self) -> None:
        times = list(poisson_arrivals(2.0, stream_rng(3, StreamKind.ARRIVALS, 1), 10.0, 5010.0))
        self.assertTrue(all(10.0 < t <= 5010.0 for t in times))
        self.assertEqual(sorted(times), times)
        self.assertAlmostEqual(10000, len(times), delta=400)
        self.assertEqual([], list(poisson_arrivals(0.0, stream_rng(3, StreamKind.ARRIVALS, 1))))


class DisciplineTest(TestCase):
    def test_ps(self) -> None:
        self.assertEqual(4.0, ps_reschedule(runtime(1.0, 2.0, 2.0), 0.0))
        self.assertEqual(1.0, ps_reschedule(runtime(2.0, 1.0, 3.0), 0.0))
        server = runtime(1.0, 2.0, 2.0)
        ps_advance(server, 1.0)
        self.assertEqual([1.5, 1.5], [job.remaining for job in server.jobs])
        self.assertIsNone(ps_reschedule(runtime(1.0), 3.0))

    def test_srpt(self) -> None:
        self.assertEqual(2.0, srpt_reschedule(runtime(1.0, 2.0, 5.0), 0.0))
        server = runtime(1.0, 2.0, 5.0)
        server.last_update = 0.0
        self.assertEqual(2.0, srpt_reschedule(server, 1.0))
        self.assertEqual([1.0, 5.0], [job.remaining for job in server.jobs])


class SimulationTest(TestCase):
    def test_birth_death_occupancy(self) -> None:
        scenario = single_server(1.0)
        result = run(scenario, "pas", 1000.0, 100000.0, 11)
        expected = birth_death_steady_state(1.0, 1.0, 2)
        np.testing.assert_allclose(expected, [1 / 3, 1 / 3, 1 / 3])
        total_variation = 0.5 * float(np.abs(np.asarray(result.occupancy_profile[1]) - expected).sum())
        self.assertLessEqual(total_variation, 0.02)
        self.assertAlmostEqual(float(expected[-1]), result.blocking_probability(), delta=0.02)

    def test_single_slot_server(self) -> None:
        # busy half of the time: L = 0.5, E = 0.5 * 2 + 0.5 * 1
        result = run(single_server(1.0, buffer=1), "pas", 1000.0, 100000.0, 12)
        self.assertAlmostEqual(0.5, result.throughput, delta=0.01)
        self.assertAlmostEqual(1.5, result.power, delta=0.01)
        self.assertAlmostEqual(1 / 3, result.energy_efficiency, delta=0.005)
        self.assertAlmostEqual(0.5, result.blocking_probability(), delta=0.01)

    def test_work_conservation(self) -> None:
        base = at_scale(load_fixture("case_ii"), 2)
        for discipline in (Discipline.PS, Discipline.SRPT):
            for dist in ("exp", "pareto-inf"):
                scenario = with_policy_options(with_size_distribution(base, dist), discipline=discipline)
                # a finite replayed trace that drains long before the horizon, so both ends of the window are empty
                arrivals = islice(poisson_source(scenario, 21), 2000)
                result = run(scenario, "pas", 0.0, 1e5, 21, arrivals=arrivals)
                self.assertEqual(2000, sum(result.flow.arrivals.values()))
                self.assertEqual(0, sum(result.flow.in_system.values()), f"{discipline} {dist}")
                self.assertGreater(result.completed_size, 0.0)
                self.assertAlmostEqual(result.completed_size, result.work, delta=1e-6, msg=f"{discipline} {dist}")

    def test_flow_balance(self) -> None:
        for policy in ("pas", "jsq"):
            scenario = at_scale(load_fixture("case_ii"), 3)
            result = run(scenario, policy, 50.0, 500.0, 5)
            flow = result.flow
            for j in scenario.type_ids:
                self.assertGreater(flow.arrivals[j], 0)
                self.assertEqual(flow.arrivals[j], flow.completions[j] + flow.blocked[j] + flow.in_system[j])

    def test_energy_accounting(self) -> None:
        scenario = at_scale(load_fixture("case_i"), 4)
        result = run(scenario, "pas", 100.0, 1000.0, 3)
        groups = scenario.server_groups
        energy = sum(b * g.eps_busy + i * g.eps_idle for b, i, g in zip(result.busy_time, result.idle_time, groups))
        work = sum(b * g.mu for b, g in zip(result.busy_time, groups))
        self.assertAlmostEqual(1.0, result.energy / energy, delta=1e-9)
        self.assertAlmostEqual(1.0, result.work / work, delta=1e-9)
        for b, i in zip(result.busy_time, result.idle_time):
            self.assertAlmostEqual(result.window, b + i)
            self.assertTrue(0 <= b <= result.window + 1e-9)
        for k, profile in result.occupancy_profile.items():
            self.assertAlmostEqual(1.0, sum(profile))
            idle = sum(i for i, g in zip(result.idle_time, groups) if g.id == k)
            self.assertAlmostEqual(profile[0], idle / (scenario.server_count(k) * result.window), delta=1e-9)

    def test_zero_arrivals(self) -> None:
        result = run(single_server(0.0), "pas", 0.0, 100.0, 1)
        self.assertEqual(0.0, result.energy_efficiency)
        self.assertEqual(0.0, result.throughput)
        self.assertAlmostEqual(1.0, result.power)
        self.assertEqual(0.0, result.blocking_probability())

    def test_deterministic(self) -> None:
        scenario = at_scale(with_size_distribution(load_fixture("case_ii"), "mixed"), 2)
        a = run(scenario, "pas", 10.0, 300.0, (4, 1))
        b = run(scenario, "pas", 10.0, 300.0, (4, 1))
        c = run(scenario, "pas", 10.0, 300.0, (4, 2))
        self.assertEqual((a.work, a.energy, a.events), (b.work, b.energy, b.events))
        self.assertNotEqual(a.events, c.events)

    def test_common_random_numbers(self) -> None:
        scenario = at_scale(load_fixture("case_i"), 5)
        pas = run(scenario, "pas", 10.0, 300.0, 9)
        jsq = run(scenario, "jsq", 10.0, 300.0, 9)
        self.assertEqual(pas.flow.arrivals, jsq.flow.arrivals)
        self.assertEqual(pas.arrivals, jsq.arrivals)

    def test_srpt(self) -> None:
        scenario = with_policy_options(at_scale(load_fixture("case_i"), 3), discipline=Discipline.SRPT)
        result = run(scenario, "pas", 20.0, 400.0, 2)
        flow = result.flow
        self.assertEqual(flow.arrivals[1], flow.completions[1] + flow.blocked[1] + flow.in_system[1])
        self.assertGreater(result.energy_efficiency, 0.0)

    def test_replayed_arrivals(self) -> None:
        scenario = single_server(1.0, buffer=1)
        arrivals = iter([(1.0, 1), (2.0, 1), (2.5, 1), (3.0, 1)])
        result = run(with_size_distribution(scenario, "det"), "pas", 0.0, 10.0, 1, arrivals=arrivals)
        # unit sizes: departures at 2.0 and 3.0 are handled before the simultaneous arrivals, only 2.5 is blocked
        self.assertEqual({1: 4}, result.flow.arrivals)
        self.assertEqual({1: 1}, result.blocked)
        self.assertEqual({1: 3}, result.completions)

    def test_observation_window(self) -> None:
        scenario = single_server(1.0)
        with self.assertRaises(ObservationWindowError):
            run(scenario, "pas", 10.0, 10.0, 1)
        with self.assertRaises(ObservationWindowError):
            run(scenario, "pas", -1.0, 10.0, 1)
        with self.assertRaises(ObservationWindowError):
            run(scenario, "pas", 0.0, 10.0, 1, bucket_width=0.0)

    def test_buckets(self) -> None:
        scenario = at_scale(load_fixture("case_i"), 2)
        result = run(scenario, "pas", 20.0, 100.0, 8, bucket_width=10.0)
        self.assertEqual(10, len(result.buckets))
        self.assertEqual([0.0, 0.0], [b.observed for b in result.buckets[:2]])
        for b in result.buckets[2:]:
            self.assertAlmostEqual(10.0, b.observed)
        self.assertAlmostEqual(result.work, sum(b.work for b in result.buckets))
        self.assertAlmostEqual(result.energy, sum(b.energy for b in result.buckets))
        self.assertEqual(sum(result.arrivals.values()), sum(sum(b.arrivals.values()) for b in result.buckets))
        self.assertEqual(sum(result.blocked.values()), sum(sum(b.blocked.values()) for b in result.buckets))


class ReplicationTest(TestCase):
    def test_replications(self) -> None:
        scenario = at_scale(load_scenario(fixtures_path / "case_i.yaml"), 2)
        settings = RunSettings(horizon=200.0, reps=2, max_reps=6, target_rel_halfwidth=1e-6)
        aggregate = replications(scenario, "pas", 2, 17, settings)
        # an unreachable target runs up to max_reps
        self.assertEqual(6, aggregate.n_reps)
        self.assertFalse(aggregate.converged)
        self.assertEqual([(17, i) for i in range(6)], [r.seed for r in aggregate.replications])

        loose = RunSettings(horizon=200.0, reps=2, max_reps=6, target_rel_halfwidth=10.0)
        aggregate = replications(scenario, "pas", 2, 17, loose)
        self.assertEqual(2, aggregate.n_reps)
        self.assertTrue(aggregate.converged)

    def test_explicit_seeds(self) -> None:
        scenario = load_fixture("case_i")
        settings = RunSettings(horizon=100.0, reps=2, max_reps=2)
        aggregate = replications(scenario, "jsq", 2, [(1, 0), (1, 5), (2, 0)], settings)
        self.assertEqual(3, aggregate.n_reps)
        self.assertEqual([(1, 0), (1, 5), (2, 0)], [r.seed for r in aggregate.replications])
        self.assertEqual(3, aggregate.EE.n)

    def test_too_few_replications(self) -> None:
        with self.assertRaises(ConfigurationError):
            replications(load_fixture("case_i"), "pas", 1, 1, RunSettings(horizon=100.0))

    def test_settings(self) -> None:
        settings = RunSettings(horizon=1000.0)
        self.assertEqual(100.0, settings.effective_warmup)
        self.assertEqual(50.0, RunSettings(horizon=1000.0, warmup=50.0).effective_warmup)
