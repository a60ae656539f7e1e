"""Offline comparison of finished campaigns.

Relative coverage at a checkpoint is a strategy's path count divided by the
best strategy's path count at the same point, so the winner scores exactly
1.0. Checkpoints live on the executions axis; the row at-or-before the
checkpoint stands in for it only when it is within one stats interval,
otherwise the lookup refuses rather than interpolate.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class StrategyRun:
    """One campaign's time series, as read back from its output directory."""

    strategy: str
    program: str
    executions: list[int]
    paths: list[int]
    final_crashes: int = 0
    stats_interval: int | None = None

    def __post_init__(self):
        if len(self.executions) != len(self.paths) or not self.executions:
            raise ValueError("run needs matching, non-empty executions and paths series")
        for a, b in zip(self.executions, self.executions[1:]):
            if b <= a:
                raise ValueError("executions axis must be strictly increasing")
        for a, b in zip(self.paths, self.paths[1:]):
            if b < a:
                raise ValueError("path counts can never decrease")

    @classmethod
    def load(cls, run_dir: Path | str) -> "StrategyRun":
        run_dir = Path(run_dir)
        fields = {}
        for line in (run_dir / "fuzzer_stats").read_text().splitlines():
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()
        interval = None
        if fields.get("stats_interval", "").startswith("execs:"):
            interval = int(fields["stats_interval"].split(":", 1)[1])

        executions, paths = [], []
        final_crashes = 0
        with open(run_dir / "plot_data.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                executions.append(int(row["executions"]))
                paths.append(int(row["paths_total"]))
                final_crashes = int(row["unique_crashes"])
        return cls(
            strategy=fields["strategy"],
            program=fields["target"],
            executions=executions,
            paths=paths,
            final_crashes=final_crashes,
            stats_interval=interval,
        )

    @property
    def final_paths(self) -> int:
        return self.paths[-1]

    @property
    def final_executions(self) -> int:
        return self.executions[-1]

    def paths_at(self, t: int) -> int:
        """Path count at the last stats row at-or-before t.

        Refuses when no row lands within one stats interval of t; there is
        no interpolation here.
        """
        idx = None
        for i, x in enumerate(self.executions):
            if x <= t:
                idx = i
            else:
                break
        if idx is None:
            raise ValueError(f"{self.strategy}/{self.program}: no stats row at-or-before {t}")
        if self.stats_interval is None:
            if self.executions[idx] != t:
                raise ValueError(
                    f"{self.strategy}/{self.program}: no exec-based stats interval recorded; "
                    f"checkpoint {t} must hit a row exactly"
                )
        elif t - self.executions[idx] > self.stats_interval:
            raise ValueError(
                f"{self.strategy}/{self.program}: nearest row at {self.executions[idx]} is "
                f"more than one interval ({self.stats_interval}) before {t}; refusing to "
                f"interpolate"
            )
        return self.paths[idx]


def relative_coverage(runs: list[StrategyRun], t: int) -> dict[str, float]:
    """Per-strategy rel-cov for one program at checkpoint t."""
    if not runs:
        raise ValueError("no runs given")
    programs = {r.program for r in runs}
    if len(programs) > 1:
        raise ValueError(f"runs span several programs: {sorted(programs)}")
    by_strategy: dict[str, int] = {}
    for run in runs:
        if run.strategy in by_strategy:
            raise ValueError(f"two runs for strategy {run.strategy!r}; one per strategy here")
        by_strategy[run.strategy] = run.paths_at(t)
    best = max(by_strategy.values())
    if best <= 0:
        raise ValueError(f"no strategy found any path by {t}; rel-cov undefined")
    return {s: n / best for s, n in by_strategy.items()}


@dataclass
class AggregateReport:
    strategies: list[str]
    programs: list[str]
    checkpoints: list[int]
    # (strategy, checkpoint) -> rel-cov per program, in self.programs order
    table: dict[tuple[str, int], list[float]] = field(default_factory=dict)
    # wins[s][s2]: programs where s ends with strictly more paths than s2
    wins: dict[str, dict[str, int]] = field(default_factory=dict)

    def mean_rel_cov(self, strategy: str, t: int) -> float:
        return statistics.fmean(self.table[(strategy, t)])

    def stderr_rel_cov(self, strategy: str, t: int) -> float:
        vals = self.table[(strategy, t)]
        if len(vals) < 2:
            return 0.0
        return statistics.stdev(vals) / math.sqrt(len(vals))

    def write_report(self, path: Path | str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["# relative coverage, mean and standard error over programs"])
            writer.writerow(["checkpoint", "strategy", "mean_rel_cov", "stderr"])
            for t in self.checkpoints:
                for s in self.strategies:
                    writer.writerow(
                        [t, s, repr(self.mean_rel_cov(s, t)), repr(self.stderr_rel_cov(s, t))]
                    )
            writer.writerow(["# wins at the final checkpoint, row beats column, ties excluded"])
            writer.writerow(["strategy"] + self.strategies)
            for s in self.strategies:
                writer.writerow(
                    [s] + ["" if s == s2 else self.wins[s][s2] for s2 in self.strategies]
                )


def aggregate(runs: list[StrategyRun], checkpoints: list[int]) -> AggregateReport:
    """Cross-program summary: mean and standard error of rel-cov per strategy
    and checkpoint, plus the pairwise win matrix on final path counts."""
    if not runs or not checkpoints:
        raise ValueError("need at least one run and one checkpoint")
    by_program: dict[str, list[StrategyRun]] = {}
    for run in runs:
        by_program.setdefault(run.program, []).append(run)
    programs = sorted(by_program)
    strategies = sorted({r.strategy for r in runs})
    for program, prog_runs in by_program.items():
        have = sorted(r.strategy for r in prog_runs)
        if have != strategies:
            raise ValueError(
                f"program {program!r} has strategies {have}, expected {strategies}"
            )

    report = AggregateReport(strategies=strategies, programs=programs,
                             checkpoints=list(checkpoints))
    for t in checkpoints:
        per_strategy: dict[str, list[float]] = {s: [] for s in strategies}
        for program in programs:
            rc = relative_coverage(by_program[program], t)
            for s in strategies:
                per_strategy[s].append(rc[s])
        for s in strategies:
            report.table[(s, t)] = per_strategy[s]

    final: dict[tuple[str, str], int] = {
        (r.program, r.strategy): r.final_paths for r in runs
    }
    report.wins = {
        s: {
            s2: sum(1 for p in programs if final[(p, s)] > final[(p, s2)])
            for s2 in strategies
            if s2 != s
        }
        for s in strategies
    }
    return report


def resolve_checkpoints(items: list[str], runs: list[StrategyRun],
                        budget_execs: int | None = None) -> list[int]:
    """Turn 'q1'..'q4' into budget quartiles on the executions axis; bare
    integers pass through. Quartiles need the shared execution budget, given
    directly or implied by the runs' final rows lining up."""
    quartiles = {"q1": 1, "q2": 2, "q3": 3, "q4": 4}
    need_budget = any(item.strip() in quartiles for item in items)
    if need_budget and budget_execs is None:
        finals = {r.final_executions for r in runs}
        if len(finals) != 1:
            raise ValueError(
                "runs end at different execution counts; pass explicit checkpoints"
            )
        budget_execs = finals.pop()
    out = []
    for item in items:
        item = item.strip()
        if item in quartiles:
            out.append(budget_execs * quartiles[item] // 4)
        elif item.isdigit():
            out.append(int(item))
        else:
            raise ValueError(f"bad checkpoint {item!r}: use q1..q4 or an execution count")
    return out
