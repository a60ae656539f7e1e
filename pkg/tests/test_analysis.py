"""Relative coverage and win-count analysis.

The cross-strategy fixture expectations were computed by hand, spreadsheet
style, from the path counts below, then frozen here:

    t=100  png max 50: afl .8   fidgety 1.0  thompson .9
           xml max 10: afl 1.0  fidgety .8   thompson 1.0
    t=200  png max 66: afl 5/6  fidgety 10/11  thompson 1.0
           xml max 30: afl 1.0  fidgety 4/5    thompson 1.0

    means/stderr over the two programs (stderr of two values is |a-b|/2):
      afl      t=100: .9 +- .1      t=200: 11/12 +- 1/12
      fidgety  t=100: .9 +- .1      t=200: 47/55 +- 3/55
      thompson t=100: .95 +- .05    t=200: 1.0 +- 0.0

    final paths png: 55/60/66, xml: 30/24/30 (afl/fidgety/thompson)
    wins: afl beats fidgety on xml only; thompson beats fidgety twice,
    afl once (xml is a tie, excluded).
"""

import random

import pytest

from banditfuzz.analysis import (
    AggregateReport,
    StrategyRun,
    aggregate,
    relative_coverage,
    resolve_checkpoints,
)
from banditfuzz.campaign import CampaignConfig, run_campaign

EXECS = [50, 100, 150, 200]
PATHS = {
    "png": {"afl": [30, 40, 48, 55], "fidgety": [35, 50, 52, 60], "thompson": [20, 45, 50, 66]},
    "xml": {"afl": [5, 10, 20, 30], "fidgety": [4, 8, 16, 24], "thompson": [6, 10, 22, 30]},
}


def series(strategy, program, interval=50):
    return StrategyRun(strategy, program, list(EXECS), list(PATHS[program][strategy]),
                       stats_interval=interval)


def fixture_runs():
    return [series(s, p) for p in PATHS for s in PATHS[p]]


class TestStrategyRun:
    def test_rejects_decreasing_paths(self):
        with pytest.raises(ValueError, match="decrease"):
            StrategyRun("afl", "png", [1, 2, 3], [5, 4, 6])

    def test_rejects_unordered_executions(self):
        with pytest.raises(ValueError, match="increasing"):
            StrategyRun("afl", "png", [1, 3, 3], [5, 5, 6])

    def test_rejects_empty_series(self):
        with pytest.raises(ValueError, match="non-empty"):
            StrategyRun("afl", "png", [], [])

    def test_paths_at_exact_row(self):
        assert series("afl", "png").paths_at(100) == 40

    def test_paths_at_within_one_interval(self):
        assert series("afl", "png").paths_at(149) == 40

    def test_paths_at_refuses_to_interpolate_past_interval(self):
        run = StrategyRun("afl", "png", [50, 100], [3, 9], stats_interval=50)
        with pytest.raises(ValueError, match="interpolate"):
            run.paths_at(151)

    def test_paths_at_before_first_row(self):
        with pytest.raises(ValueError, match="at-or-before"):
            series("afl", "png").paths_at(10)


class TestRelativeCoverage:
    def test_two_strategy_ratio(self):
        runs = [series("afl", "png"), series("fidgety", "png")]
        assert relative_coverage(runs, 100) == {"afl": 0.8, "fidgety": 1.0}

    def test_single_strategy_is_its_own_max(self):
        assert relative_coverage([series("afl", "png")], 100) == {"afl": 1.0}

    def test_zero_numerator(self):
        runs = [
            StrategyRun("a", "p", [10], [0], stats_interval=10),
            StrategyRun("b", "p", [10], [10], stats_interval=10),
        ]
        assert relative_coverage(runs, 10) == {"a": 0.0, "b": 1.0}

    def test_all_zero_is_an_error(self):
        runs = [StrategyRun("a", "p", [10], [0], stats_interval=10)]
        with pytest.raises(ValueError, match="rel-cov undefined"):
            relative_coverage(runs, 10)

    def test_mixed_programs_rejected(self):
        with pytest.raises(ValueError, match="several programs"):
            relative_coverage([series("afl", "png"), series("afl", "xml")], 100)

    def test_duplicate_strategy_rejected(self):
        with pytest.raises(ValueError, match="one per strategy"):
            relative_coverage([series("afl", "png"), series("afl", "png")], 100)

    def test_someone_always_scores_one(self):
        rng = random.Random(5)
        for _ in range(100):
            runs = [
                StrategyRun(f"s{i}", "p", [10], [rng.randint(0, 50)], stats_interval=10)
                for i in range(4)
            ]
            if all(r.paths[0] == 0 for r in runs):
                continue
            assert max(relative_coverage(runs, 10).values()) == 1.0

    def test_scale_free(self):
        runs = [series(s, "png") for s in ("afl", "fidgety", "thompson")]
        scaled = [
            StrategyRun(r.strategy, r.program, r.executions, [7 * p for p in r.paths],
                        stats_interval=r.stats_interval)
            for r in runs
        ]
        assert relative_coverage(runs, 200) == relative_coverage(scaled, 200)


class TestAggregate:
    def test_spreadsheet_fixture(self):
        report = aggregate(fixture_runs(), [100, 200])
        approx = lambda x: pytest.approx(x, abs=1e-12)

        assert report.mean_rel_cov("afl", 100) == approx(0.9)
        assert report.stderr_rel_cov("afl", 100) == approx(0.1)
        assert report.mean_rel_cov("fidgety", 100) == approx(0.9)
        assert report.stderr_rel_cov("fidgety", 100) == approx(0.1)
        assert report.mean_rel_cov("thompson", 100) == approx(0.95)
        assert report.stderr_rel_cov("thompson", 100) == approx(0.05)

        assert report.mean_rel_cov("afl", 200) == approx(11 / 12)
        assert report.stderr_rel_cov("afl", 200) == approx(1 / 12)
        assert report.mean_rel_cov("fidgety", 200) == approx(47 / 55)
        assert report.stderr_rel_cov("fidgety", 200) == approx(3 / 55)
        assert report.mean_rel_cov("thompson", 200) == approx(1.0)
        assert report.stderr_rel_cov("thompson", 200) == 0.0

        assert report.wins == {
            "afl": {"fidgety": 1, "thompson": 0},
            "fidgety": {"afl": 1, "thompson": 0},
            "thompson": {"afl": 1, "fidgety": 2},
        }

    def test_identical_runs_tie_everywhere(self):
        runs = [
            StrategyRun(s, p, [10, 20], [4, 8], stats_interval=10)
            for s in ("a", "b", "c")
            for p in ("p1", "p2")
        ]
        report = aggregate(runs, [20])
        for s in ("a", "b", "c"):
            assert report.mean_rel_cov(s, 20) == 1.0
            assert all(n == 0 for n in report.wins[s].values())

    def test_single_program_stderr_is_zero(self):
        runs = [series(s, "png") for s in ("afl", "fidgety")]
        assert aggregate(runs, [200]).stderr_rel_cov("afl", 200) == 0.0

    def test_wins_bounded_by_program_count(self):
        report = aggregate(fixture_runs(), [200])
        for s, row in report.wins.items():
            assert all(0 <= n <= len(report.programs) for n in row.values())

    def test_missing_cell_rejected(self):
        runs = fixture_runs()[:-1]
        with pytest.raises(ValueError, match="expected"):
            aggregate(runs, [100])

    def test_report_csv_round_trip(self, tmp_path):
        report = aggregate(fixture_runs(), [100, 200])
        out = tmp_path / "report.csv"
        report.write_report(out)
        lines = out.read_text().splitlines()
        assert f"200,thompson,{1.0!r},{0.0!r}" in lines
        header_idx = lines.index("strategy,afl,fidgety,thompson")
        matrix = [line.split(",") for line in lines[header_idx + 1:]]
        assert matrix[0] == ["afl", "", "1", "0"]
        assert matrix[2] == ["thompson", "1", "2", ""]


class TestResolveCheckpoints:
    def test_quartiles_from_budget(self):
        assert resolve_checkpoints(["q1", "q2", "q3", "q4"], [], budget_execs=200) == [
            50, 100, 150, 200,
        ]

    def test_budget_inferred_from_final_rows(self):
        runs = [series("afl", "png"), series("fidgety", "png")]
        assert resolve_checkpoints(["q2"], runs) == [100]

    def test_conflicting_finals_rejected(self):
        runs = [
            series("afl", "png"),
            StrategyRun("fidgety", "png", [50, 100], [1, 2], stats_interval=50),
        ]
        with pytest.raises(ValueError, match="different execution counts"):
            resolve_checkpoints(["q1"], runs)

    def test_bare_integers_pass_through(self):
        assert resolve_checkpoints(["75", "q4"], [], budget_execs=100) == [75, 100]

    def test_bad_token(self):
        with pytest.raises(ValueError, match="bad checkpoint"):
            resolve_checkpoints(["halfway"], [], budget_execs=100)


class TestLoadFromRunDir:
    def test_campaign_outputs_feed_analysis(self, tmp_path):
        runs = []
        for strategy in ("fidgety", "thompson"):
            out = tmp_path / strategy
            run_campaign(
                CampaignConfig(
                    target="keyword_server", strategy=strategy, out_dir=out,
                    budget_execs=400, rng_seed=8, stats_execs=100,
                )
            )
            runs.append(StrategyRun.load(out))
        assert [r.strategy for r in runs] == ["fidgety", "thompson"]
        assert all(r.program == "keyword_server" for r in runs)
        assert all(r.stats_interval == 100 for r in runs)
        assert all(r.final_executions == 401 for r in runs)

        rc = relative_coverage(runs, 401)
        assert max(rc.values()) == 1.0
        report = aggregate(runs, resolve_checkpoints(["q2", "q4"], runs))
        assert set(report.table) == {("fidgety", 200), ("thompson", 200),
                                     ("fidgety", 401), ("thompson", 401)}
