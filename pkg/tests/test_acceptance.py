"""
Long-running checks of the asymptotic behaviour, driven through the command line with the files in experiments/.
Enabled with FARMSIM_ACCEPTANCE=1.
"""

import csv
import math
import os
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np

from farmsim.cli import main
from farmsim.cli.commands import EXIT_ERROR
from farmsim.engine import RunSettings, StreamKind, replications, sample_job_size, stream_rng
from farmsim.fluid import OccupancyVector, opt_energy_efficiency
from farmsim.model import SizeDistribution, at_scale
from tests.utils.base_cases import TestCase, load_fixture, repo_root

ACCEPTANCE = os.environ.get("FARMSIM_ACCEPTANCE") == "1"


@unittest.skipUnless(ACCEPTANCE, "set FARMSIM_ACCEPTANCE=1")
class AcceptanceTestCase(TestCase):
    def setUp(self) -> None:
        self._tmpdir = TemporaryDirectory()
        self.out = Path(self._tmpdir.name)

    def tearDown(self) -> None:
        self._tmpdir.cleanup()

    def run_command(self, command: str, experiment: str | None, *args: str) -> None:
        argv = [command, "--out", str(self.out), *args]
        if experiment is not None:
            argv += ["--config", str(repo_root / "experiments" / f"{experiment}.yaml")]
        self.assertNotEqual(EXIT_ERROR, main(argv))

    def rows(self, name: str) -> list[dict[str, str]]:
        with (self.out / f"{name}.csv").open(newline="") as f:
            return list(csv.DictReader(f))

    def assert_upper_bound(self, rows: list[dict[str, str]]) -> None:
        for row in rows:
            self.assertGreaterEqual(float(row["ee_opt"]), float(row["EE"]) - float(row["EE_hw"]), row["fixture_id"])


class RandomScenarioTest(AcceptanceTestCase):
    def check_distribution(self, experiment: str) -> None:
        self.run_command("sweep-h", experiment, "--h", "20")
        rows = self.rows("sweep_h")
        self.assertEqual(50, len(rows))
        within = sum(float(row["deviation"]) <= 0.05 for row in rows)
        self.assertGreaterEqual(within, 0.95 * len(rows))
        self.assert_upper_bound(rows)

    def test_single_type(self) -> None:
        self.check_distribution("random_single_type")

    def test_multi_type(self) -> None:
        self.check_distribution("random_multi_type")


class DecayTest(AcceptanceTestCase):
    def test_case_i_decay(self) -> None:
        self.run_command("sweep-h", "case_i_sweep", "--h", "5,10,20,30", "--policy", "pas", "--discipline", "ps")
        rows = sorted(self.rows("sweep_h"), key=lambda row: int(row["h"]))
        self.assertEqual([5, 10, 20, 30], [int(row["h"]) for row in rows])
        self.assert_upper_bound(rows)
        deviations = [float(row["deviation"]) for row in rows]
        half_widths = [float(row["deviation_hw"]) for row in rows]
        for i in range(len(rows) - 1):
            self.assertLess(deviations[i + 1], deviations[i] + half_widths[i] + half_widths[i + 1])

        # log-deviation slope per unit of h on the tail
        h = [int(row["h"]) for row in rows]
        slopes = [(math.log(deviations[i]) - math.log(deviations[i + 1])) / (h[i + 1] - h[i]) for i in (1, 2)]
        self.assertTrue(all(s > 0 for s in slopes), slopes)
        self.assertLessEqual(max(slopes) / min(slopes), 2.0)


class AttractorTest(AcceptanceTestCase):
    def test_case_i_occupancy(self) -> None:
        scenario = at_scale(load_fixture("case_i"), 50)
        z_star = opt_energy_efficiency(scenario).z_star
        aggregate = replications(scenario, "pas", 5, 13, RunSettings(horizon=2000.0, max_reps=5))
        simulated = OccupancyVector.from_group_fractions(scenario, aggregate.occupancy_profile(), z_star.ordering)
        self.assertLessEqual(z_star.distance(simulated), 0.02)
        for group_id in scenario.group_ids:
            self.assertAlmostEqual(z_star.busy_fraction(scenario, group_id), simulated.busy_fraction(scenario, group_id),
                                   delta=0.02)


class RobustnessTest(AcceptanceTestCase):
    def test_size_distributions(self) -> None:
        self.run_command("simulate", "robustness", "--discipline", "ps")
        rows = self.rows("simulate")
        self.assertEqual({"exp", "mixed", "pareto-f", "pareto-inf"}, {row["dist"] for row in rows})
        for row in rows:
            self.assertLessEqual(abs(float(row["rel_diff_vs_exp"])), 0.03, row["dist"])

    def test_random_multi_type(self) -> None:
        self.run_command("simulate", "robustness_multi_type")
        rows = self.rows("simulate")
        self.assertEqual(50 * 2 * 4, len(rows))
        bounds = {"ps": (-0.02, 0.02), "srpt": (-0.02, 0.04)}
        for discipline, (low, high) in bounds.items():
            diffs = [float(row["rel_diff_vs_exp"]) for row in rows
                     if row["discipline"] == discipline and row["dist"] != "exp"]
            self.assertEqual(150, len(diffs))
            within = sum(low <= d <= high for d in diffs)
            self.assertGreaterEqual(within, 0.95 * len(diffs), discipline)
        titles = [line for line in (self.out / "simulate_cdf.dat").read_text().splitlines()
                  if line.startswith("# policy=")]
        self.assertEqual(6, len(titles))

    def test_pareto_unit_mean(self) -> None:
        for i, dist in enumerate((SizeDistribution.pareto_finite(), SizeDistribution.pareto_infinite())):
            sizes = sample_job_size(dist, stream_rng(7, StreamKind.SIZES, i + 1), 1_000_000)
            self.assertAlmostEqual(1.0, float(np.mean(sizes)), delta=0.02)


class TraceCaseStudyTest(AcceptanceTestCase):
    def test_pas_against_jsq(self) -> None:
        self.run_command("trace", "trace_case_study")
        hourly: dict[tuple[str, str, str], dict[str, str]] = {}
        for row in self.rows("trace"):
            hourly[(row["discipline"], row["hour"], row["policy"])] = row
        hours = {(discipline, hour) for discipline, hour, _ in hourly}
        self.assertEqual(48, len(hours))
        for discipline, hour in hours:
            pas, jsq = hourly[(discipline, hour, "pas")], hourly[(discipline, hour, "jsq")]
            self.assertGreater(float(pas["EE"]), float(jsq["EE"]), f"{discipline} hour {hour}")
        for row in self.rows("trace_summary"):
            self.assertEqual("3", row["n_reps"])
        summary = {(row["discipline"], row["policy"]): float(row["L"]) for row in self.rows("trace_summary")}
        for discipline in ("ps", "srpt"):
            self.assertAlmostEqual(summary[(discipline, "jsq")], summary[(discipline, "pas")],
                                   delta=0.05 * summary[(discipline, "jsq")])

    def test_buffer_blocking(self) -> None:
        self.run_command("trace", "trace_blocking", "--buffer", "10", "--buffer", "13")
        blocking = {row["buffer"]: float(row["blocking"]) for row in self.rows("trace_summary")}
        self.assertGreater(blocking["10"], 0.0)
        self.assertEqual(0.0, blocking["13"])
