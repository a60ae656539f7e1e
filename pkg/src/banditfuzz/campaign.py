"""Campaign orchestration: configuration, the fuzz loop, stats and exports.

Strategies:

    afl        uniform operators, uniform-powers stacking, deterministic
               stage once per queue entry before havoc
    fidgety    afl without the deterministic stage
    empirical  fidgety with a fixed operator distribution loaded from a file
    thompson   adaptive distribution resampled from the arm posteriors,
               fixed stack of 4 by default

Campaigns with an execution budget run on a virtual clock: each execution
costs (1 + instrumentation hits) microseconds. That keeps every piece of
observable output, plot_data.csv included, a pure function of the config
and the rng seed. Wall-clock budgets use real time instead.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from pathlib import Path

from .corpus import BASE_ENERGY, Corpus
from .coverage import MAP_SIZE, CoverageMap, Novelty
from .executor import (
    DEFAULT_TIMEOUT_MS,
    ExecutionResult,
    ExecutionStatus,
    Target,
    execute,
    get_target,
    scrape_dictionary,
)
from .mutation import (
    MAX_INPUT,
    Dictionary,
    deterministic_stage,
    mutate_child,
    parse_stack_mode,
    sample_num_mutations,
)
from .scheduler import (
    DEFAULT_PRIOR,
    DEFAULT_REFRESH_EXECS,
    DEFAULT_REFRESH_SECS,
    OperatorScheduler,
    active_operators,
    load_distribution,
    save_counts,
)

STRATEGIES = ("afl", "fidgety", "empirical", "thompson")

DEFAULT_SEED_INPUT = b"0"
DEFAULT_STATS_SECS = 10.0
STATS_ROWS_PER_BUDGET = 40  # exec-budget runs default to ~this many rows


@dataclass
class CampaignConfig:
    target: str
    strategy: str
    out_dir: Path | str
    seeds_dir: Path | str | None = None
    dict_file: Path | str | None = None
    scrape_file: Path | str | None = None
    distribution_file: Path | str | None = None
    budget_execs: int | None = None
    budget_secs: float | None = None
    stack_mode: str | None = None  # None: fixed:4 for thompson, else uniform
    prior: tuple[float, float] = DEFAULT_PRIOR
    refresh_secs: float = DEFAULT_REFRESH_SECS
    refresh_execs: int = DEFAULT_REFRESH_EXECS
    rng_seed: int | None = None
    map_size: int = MAP_SIZE
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_input: int = MAX_INPUT
    base_energy: int = BASE_ENERGY
    stats_secs: float = DEFAULT_STATS_SECS
    stats_execs: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, pick one of {STRATEGIES}")
        if self.budget_execs is None and self.budget_secs is None:
            raise ValueError("campaign needs a budget: executions, seconds, or both")
        if self.budget_execs is not None and self.budget_execs < 0:
            raise ValueError("execution budget must be >= 0")
        if self.dict_file is not None and self.scrape_file is not None:
            raise ValueError("pass a token file or a scrape source, not both")
        if self.strategy == "empirical" and self.distribution_file is None:
            raise ValueError("empirical strategy needs a distribution file")
        if self.prior[0] <= 0 or self.prior[1] <= 0:
            raise ValueError("prior shape parameters must be positive")
        if self.refresh_execs < 1 or self.refresh_secs <= 0:
            raise ValueError("refresh cadence must be positive")
        parse_stack_mode(self.resolved_stack_mode())

    def resolved_stack_mode(self) -> str:
        if self.stack_mode is not None:
            return self.stack_mode
        return "fixed:4" if self.strategy == "thompson" else "uniform"

    @property
    def runs_deterministic_stage(self) -> bool:
        return self.strategy == "afl"

    @property
    def scheduler_mode(self) -> str:
        if self.strategy == "thompson":
            return "thompson"
        if self.strategy == "empirical":
            return "empirical"
        return "uniform"


class Campaign:
    """One fuzzing run. Build it from a config, call run(), then read the
    corpus, scheduler and stats off the instance."""

    def __init__(self, config: CampaignConfig):
        self.config = config
        self.target: Target = get_target(config.target)
        self.rng_seed = (
            config.rng_seed
            if config.rng_seed is not None
            else random.SystemRandom().randrange(1 << 32)
        )
        self.rng = random.Random(self.rng_seed)
        self.dictionary = self._resolve_dictionary()
        self.arms = active_operators(self.dictionary)
        empirical = (
            load_distribution(config.distribution_file)
            if config.distribution_file is not None
            else None
        )
        self.scheduler = OperatorScheduler(
            config.scheduler_mode,
            self.arms,
            prior=config.prior,
            empirical=empirical,
            refresh_secs=config.refresh_secs,
            refresh_execs=config.refresh_execs,
        )
        self.out_dir = Path(config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.corpus = Corpus(self.out_dir, base_energy=config.base_energy)
        self.cov_map = CoverageMap(config.map_size)
        self.stack_mode = config.resolved_stack_mode()

        # exec-budget campaigns run on the virtual clock (see module doc)
        self.virtual_clock = config.budget_execs is not None and config.budget_secs is None
        self.elapsed = 0.0
        self._wall_start: float | None = None
        self.executions = 0  # every target run, seeds included
        self.loop_execs = 0  # children only; what the exec budget counts
        self.det_execs = 0
        self.stats_rows: list[list[str]] = []
        self._stats_execs = config.stats_execs
        if self._stats_execs is None and config.budget_execs is not None:
            self._stats_execs = max(1, config.budget_execs // STATS_ROWS_PER_BUDGET)
        self._last_stats_execs = 0
        self._last_stats_elapsed = 0.0
        self._last_row_executions = -1

    def _resolve_dictionary(self) -> Dictionary:
        cfg = self.config
        if cfg.dict_file is not None:
            return Dictionary.from_file(cfg.dict_file)
        if cfg.scrape_file is not None:
            return scrape_dictionary(Path(cfg.scrape_file).read_bytes())
        return self.target.dictionary or Dictionary()

    # --- time and budget ----------------------------------------------------

    def _advance_clock(self, cost_us: float) -> None:
        if self.virtual_clock:
            self.elapsed += cost_us / 1e6
        else:
            self.elapsed = time.perf_counter() - self._wall_start

    def _budget_exhausted(self) -> bool:
        cfg = self.config
        if cfg.budget_execs is not None and self.loop_execs >= cfg.budget_execs:
            return True
        if cfg.budget_secs is not None and self.elapsed >= cfg.budget_secs:
            return True
        return False

    def _run_one(self, data: bytes) -> tuple[ExecutionResult, float]:
        """Execute, bill the clock, return (result, cost_us)."""
        res = execute(
            self.target,
            data,
            map_size=self.config.map_size,
            timeout_ms=self.config.timeout_ms,
        )
        cost_us = (1.0 + sum(res.trace.values())) if self.virtual_clock else res.duration_us
        self.executions += 1
        self._advance_clock(cost_us)
        return res, cost_us

    # --- the loop ------------------------------------------------------------

    def run(self) -> "Campaign":
        self._wall_start = time.perf_counter()
        self._write_stats_header()
        self._load_seeds()
        self._emit_stats_row()  # the seed row

        try:
            while not self._budget_exhausted():
                entry, energy = self.corpus.pick_input()
                if self.config.runs_deterministic_stage and not entry.deterministic_done:
                    if self._deterministic_pass(entry):
                        entry.deterministic_done = True
                for _ in range(energy):
                    if self._budget_exhausted():
                        break
                    self._havoc_child(entry)
        except BaseException:
            # harness faults and interrupts abort the run but keep the corpus
            self.corpus.checkpoint(self.cov_map, extra=self._checkpoint_extra())
            raise

        if self.executions != self._last_row_executions:
            self._emit_stats_row()
        self._finalize()
        return self

    def _load_seeds(self) -> None:
        seeds: list[bytes] = []
        if self.config.seeds_dir is not None:
            seeds_dir = Path(self.config.seeds_dir)
            for path in sorted(p for p in seeds_dir.iterdir() if p.is_file()):
                seeds.append(path.read_bytes())
        if not seeds:
            seeds = [DEFAULT_SEED_INPUT]
        for data in seeds:
            res, cost = self._run_one(data)
            self._absorb(data, res, cost, parent_id=None)
        if not self.corpus.entries:
            raise RuntimeError("no seed survived execution; nothing to fuzz")

    def _absorb(self, data: bytes, res, cost_us: float, parent_id) -> bool:
        """Fold an execution into corpus and map. True when it found a new
        code path (the bandit's definition of success)."""
        if res.status is ExecutionStatus.OK:
            verdict = self.cov_map.has_new_bits(res.trace)
            if verdict is not Novelty.NOTHING:
                self.corpus.add_if_interesting(
                    data,
                    verdict,
                    exec_time_us=cost_us,
                    path_edges=len(res.trace),
                    discovery_time=self.elapsed,
                    parent_id=parent_id,
                )
                return True
            return False
        if res.status is ExecutionStatus.CRASH:
            self.corpus.record_crash(data, res.trace, res.crash_kind)
        else:
            self.corpus.record_hang(data, res.trace)
        return False

    def _havoc_child(self, entry) -> None:
        stack = sample_num_mutations(self.rng, self.stack_mode)
        child, record = mutate_child(
            entry.data,
            stack,
            self.scheduler.current_distribution(),
            self.rng,
            dictionary=self.dictionary,
            max_len=self.config.max_input,
        )
        res, cost = self._run_one(child)
        self.loop_execs += 1
        success = self._absorb(child, res, cost, parent_id=entry.id)
        self.scheduler.update_counts(record, success)
        self.scheduler.maybe_refresh(self.elapsed, self.rng)
        self._maybe_emit_stats()

    def _deterministic_pass(self, entry) -> bool:
        """Run the sweep over one entry; False when the budget cut it short."""
        for child in deterministic_stage(entry.data, self.dictionary):
            if self._budget_exhausted():
                return False
            res, cost = self._run_one(child)
            self.loop_execs += 1
            self.det_execs += 1
            self._absorb(child, res, cost, parent_id=entry.id)
            self._maybe_emit_stats()
        return True

    # --- reporting ------------------------------------------------------------

    def _write_stats_header(self) -> None:
        cols = ["elapsed_secs", "executions", "paths_total", "unique_crashes", "unique_hangs"]
        cols += [f"p_{op.value}" for op in self.arms]
        (self.out_dir / "plot_data.csv").write_text(",".join(cols) + "\n")

    def _maybe_emit_stats(self) -> None:
        if self.virtual_clock:
            if self.loop_execs - self._last_stats_execs >= self._stats_execs:
                self._emit_stats_row()
        elif self.elapsed - self._last_stats_elapsed >= self.config.stats_secs:
            self._emit_stats_row()

    def _emit_stats_row(self) -> None:
        dist = self.scheduler.current_distribution().mapping()
        row = [
            f"{self.elapsed:.6f}",
            str(self.executions),
            str(len(self.corpus)),
            str(len(self.corpus.crashes)),
            str(len(self.corpus.hangs)),
        ]
        row += [repr(dist[op]) for op in self.arms]
        self.stats_rows.append(row)
        with open(self.out_dir / "plot_data.csv", "a") as fh:
            fh.write(",".join(row) + "\n")
        self._last_stats_execs = self.loop_execs
        self._last_stats_elapsed = self.elapsed
        self._last_row_executions = self.executions
        self.corpus.checkpoint(self.cov_map, extra=self._checkpoint_extra())

    def _checkpoint_extra(self) -> dict:
        return {
            "executions": self.executions,
            "loop_execs": self.loop_execs,
            "elapsed": self.elapsed,
            "rng_seed": self.rng_seed,
        }

    def _finalize(self) -> None:
        self.corpus.checkpoint(self.cov_map, extra=self._checkpoint_extra())
        self.export_training_counts()
        cfg = self.config
        stats_interval = (
            f"execs:{self._stats_execs}" if self.virtual_clock else f"secs:{cfg.stats_secs}"
        )
        lines = {
            "target": cfg.target,
            "strategy": cfg.strategy,
            "rng_seed": self.rng_seed,
            "budget_execs": cfg.budget_execs if cfg.budget_execs is not None else "",
            "budget_secs": cfg.budget_secs if cfg.budget_secs is not None else "",
            "executions": self.executions,
            "loop_execs": self.loop_execs,
            "det_execs": self.det_execs,
            "paths_total": len(self.corpus),
            "unique_crashes": len(self.corpus.crashes),
            "unique_hangs": len(self.corpus.hangs),
            "edges_covered": self.cov_map.edge_count(),
            "elapsed_secs": f"{self.elapsed:.6f}",
            "clock": "virtual" if self.virtual_clock else "wall",
            "stats_interval": stats_interval,
            "stack_mode": self.stack_mode,
            "arms": len(self.arms),
            "refreshes": self.scheduler.refreshes,
            "prior": f"{cfg.prior[0]},{cfg.prior[1]}",
            "map_size": cfg.map_size,
            "timeout_ms": cfg.timeout_ms,
            "max_input": cfg.max_input,
            "base_energy": cfg.base_energy,
            "dictionary_tokens": len(self.dictionary),
        }
        with open(self.out_dir / "fuzzer_stats", "w") as fh:
            for key, value in lines.items():
                fh.write(f"{key:<18}: {value}\n")

    def export_training_counts(self, path: Path | str | None = None) -> Path:
        """Write the per-operator success tallies for later merging into an
        empirical distribution. All-zero files are valid output here and
        rejected at normalization time."""
        out = Path(path) if path is not None else self.out_dir / "operator_counts.txt"
        counts = self.scheduler.success_counts()
        header = (
            f"success counts, target={self.config.target} "
            f"strategy={self.config.strategy} loop_execs={self.loop_execs}"
        )
        save_counts(out, counts, header=header)
        return out


def run_campaign(config: CampaignConfig) -> Campaign:
    return Campaign(config).run()
