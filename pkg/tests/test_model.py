from pathlib import Path
from tempfile import TemporaryDirectory

from farmsim.exceptions import ConfigurationError, InvalidScenario
from farmsim.model import (
    JobType,
    Scenario,
    ServerGroup,
    SizeDistribution,
    SizeKind,
    at_scale,
    effective_energy_efficiency,
    load_scenario,
    normalized_offered_traffic,
    per_type_traffic,
    resolve_fixture,
    save_scenario,
    scale,
    scenario_from_dict,
    with_buffer,
    with_size_distribution,
)
from farmsim.model.scenario import size_distribution_for
from tests.utils.base_cases import TestCase, fixtures_path, load_fixture


def single_group(mu: float = 2.0, rate: float = 1.0, buffer: int = 2, base_count: int = 1) -> Scenario:
    return Scenario(
        groups=(ServerGroup(1, mu, 2.0, 1.0, buffer, base_count),),
        job_types=(JobType(1, rate, frozenset({1})),),
    )


class ServerGroupTest(TestCase):
    def test_effective_energy_efficiency(self) -> None:
        self.assertAlmostEqual(1.11112, effective_energy_efficiency(ServerGroup(1, 8.06114, 8.06114, 0.80611, 2)), delta=1e-4)
        self.assertEqual(1.0, effective_energy_efficiency(ServerGroup(1, 1.0, 2.0, 1.0, 1)))
        self.assertAlmostEqual(13.699, effective_energy_efficiency(ServerGroup(1, 2.42523, 0.242523, 0.06548, 20)), delta=1e-2)

    def test_invalid_groups(self) -> None:
        with self.assertRaises(InvalidScenario):
            ServerGroup(1, 1.0, 1.0, 1.0, 2)  # busy power must exceed idle power
        with self.assertRaises(InvalidScenario):
            ServerGroup(1, 0.0, 2.0, 1.0, 2)
        with self.assertRaises(InvalidScenario):
            ServerGroup(1, 1.0, 2.0, -0.1, 2)
        with self.assertRaises(InvalidScenario):
            ServerGroup(1, 1.0, 2.0, 1.0, 0)
        with self.assertRaises(InvalidScenario):
            ServerGroup(0, 1.0, 2.0, 1.0, 1)

    def test_invalid_job_types(self) -> None:
        with self.assertRaises(InvalidScenario):
            JobType(1, 1.0, frozenset())
        with self.assertRaises(InvalidScenario):
            JobType(1, -1.0, frozenset({1}))
        with self.assertRaises(InvalidScenario):
            Scenario(groups=(ServerGroup(1, 1.0, 2.0, 1.0, 1),), job_types=(JobType(1, 1.0, frozenset({1, 2})),))
        with self.assertRaises(InvalidScenario):
            Scenario(groups=(ServerGroup(1, 1.0, 2.0, 1.0, 1), ServerGroup(1, 2.0, 3.0, 1.0, 1)),
                     job_types=(JobType(1, 1.0, frozenset({1})),))

    def test_size_distributions(self) -> None:
        self.assertEqual(2.001, SizeDistribution.pareto_finite().shape)
        self.assertEqual(1.98, SizeDistribution.pareto_infinite().shape)
        self.assertAlmostEqual(0.500250, SizeDistribution.pareto_finite().pareto_scale, places=6)
        self.assertAlmostEqual(0.494949, SizeDistribution.pareto_infinite().pareto_scale, places=6)
        with self.assertRaises(InvalidScenario):
            SizeDistribution(SizeKind.PARETO_FINITE, 1.0)
        with self.assertRaises(InvalidScenario):
            SizeDistribution(SizeKind.EXPONENTIAL, 2.0)
        with self.assertRaises(InvalidScenario):
            size_distribution_for("uniform")


class ScenarioTest(TestCase):
    def test_offered_traffic(self) -> None:
        self.assertEqual(0.5, normalized_offered_traffic(single_group()))
        case_ii = load_fixture("case_ii")
        self.assertAlmostEqual(0.6, per_type_traffic(case_ii, 2), delta=1e-3)
        for h in (1, 7):
            self.assertAlmostEqual(normalized_offered_traffic(case_ii), normalized_offered_traffic(at_scale(case_ii, h)))
            self.assertAlmostEqual(per_type_traffic(case_ii, 1), per_type_traffic(at_scale(case_ii, h), 1))

    def test_scale(self) -> None:
        case_i = load_fixture("case_i")
        scaled = scale(case_i, 20)
        self.assertEqual([20] * 5, [scaled.server_count(k) for k in scaled.group_ids])
        self.assertAlmostEqual(126.1278, scaled.arrival_rate(1))
        self.assertEqual(100, scaled.total_servers)
        self.assertEqual(6, scaled.s0)
        self.assertEqual(20, scaled.zero_group_count)
        with self.assertRaises(InvalidScenario):
            scale(case_i, 0)

    def test_scale_composition(self) -> None:
        case_ii = load_fixture("case_ii")
        twice = scale(scale(case_ii, 2).with_base(), 3)
        once = scale(case_ii, 6)
        for k in case_ii.group_ids:
            self.assertEqual(once.server_count(k), twice.server_count(k))
        for j in case_ii.type_ids:
            self.assertAlmostEqual(once.arrival_rate(j), twice.arrival_rate(j))
        self.assertEqual(3, at_scale(scale(case_ii, 5), 3).h)

    def test_servers(self) -> None:
        case_ii = at_scale(load_fixture("case_ii"), 2)
        self.assertEqual(10, len(case_ii.server_groups))
        self.assertEqual(range(2, 4), case_ii.group_server_ranges[2])
        self.assertEqual([2, 3, 4, 5], case_ii.servers_of_type(2))
        self.assertEqual([2, 3, 4, 5, 8, 9], case_ii.servers_of_type(1))
        self.assertEqual([1, 2, 3], case_ii.types_of_group(2))
        self.assertEqual([], case_ii.types_of_group(1))

    def test_variants(self) -> None:
        case_ii = load_fixture("case_ii")
        self.assertEqual([11] * 5, [g.buffer for g in with_buffer(case_ii, 11).groups])
        mixed = with_size_distribution(case_ii, "mixed")
        self.assertEqual([SizeKind.EXPONENTIAL, SizeKind.PARETO_FINITE, SizeKind.PARETO_INFINITE],
                         [j.size_dist.kind for j in mixed.job_types])
        self.assertFalse(mixed.is_exponential)
        self.assertTrue(case_ii.is_exponential)

    def test_zero_arrival_rate(self) -> None:
        scenario = single_group(rate=0.0)
        self.assertEqual(0.0, normalized_offered_traffic(scenario))


class ScenarioFileTest(TestCase):
    def test_fixtures(self) -> None:
        case_i = load_fixture("case_i")
        self.assertEqual("case_i", case_i.name)
        self.assertEqual(frozenset({1, 5}), case_i.job_type(1).available_groups)
        self.assertEqual([2] * 5, [g.buffer for g in case_i.groups])

        case_ii = load_fixture("case_ii")
        self.assertEqual(3, len(case_ii.job_types))
        self.assertEqual([1] * 5, [g.buffer for g in case_ii.groups])

        trace = load_fixture("ten_group_trace")
        self.assertEqual(10, len(trace.groups))
        self.assertEqual(4, len(trace.job_types))
        self.assertEqual(12500, trace.total_servers)
        self.assertEqual(frozenset({2}), trace.job_type(4).available_groups)
        self.assertTrue(any("NOT published" in note for note in trace.notes))

    def test_round_trip(self) -> None:
        case_ii = with_size_distribution(load_fixture("case_ii"), "mixed")
        with TemporaryDirectory() as tmpdir:
            for suffix in (".yaml", ".json"):
                path = Path(tmpdir) / f"case_ii{suffix}"
                save_scenario(case_ii, path)
                self.assertEqual(case_ii, load_scenario(path))

    def test_scaled_scenarios_are_saved_at_base_scale(self) -> None:
        case_i = at_scale(load_fixture("case_i"), 4)
        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "scaled.yaml"
            save_scenario(case_i, path)
            loaded = load_scenario(path)
        self.assertEqual(1, loaded.h)
        self.assertEqual(4, loaded.group(1).base_count)
        self.assertAlmostEqual(case_i.arrival_rate(1), loaded.arrival_rate(1))

    def test_validation(self) -> None:
        d = {
            "__comment": "ignored",
            "groups": [{"id": 1, "mu": 1.0, "eps_busy": 2.0, "eps_idle": 1.0, "buffer": 2}],
            "job_types": [{"id": 1, "base_rate": 0.5, "available_groups": [1]}],
        }
        scenario = scenario_from_dict(dict(d), h=3)
        self.assertEqual(3, scenario.h)
        with self.assertRaises(InvalidScenario):
            scenario_from_dict(d | {"color": "red"})
        with self.assertRaises(InvalidScenario):
            scenario_from_dict(d | {"groups": [{"id": 1, "mu": 1.0, "eps_busy": 1.0, "eps_idle": 1.0, "buffer": 2}]})
        with self.assertRaises(InvalidScenario):
            scenario_from_dict(d | {"job_types": [{"id": 1, "base_rate": 0.5, "available_groups": [2]}]})

    def test_resolve_fixture(self) -> None:
        self.assertEqual(fixtures_path / "case_i.yaml", resolve_fixture("case_i", fixtures_path))
        self.assertEqual(fixtures_path / "case_i.yaml", resolve_fixture("case_i.yaml", fixtures_path))
        with self.assertRaises(ConfigurationError):
            resolve_fixture("case_iii", fixtures_path)
