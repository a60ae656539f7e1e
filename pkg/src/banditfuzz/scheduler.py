"""Operator scheduling: uniform, fixed empirical, or Thompson sampling.

Each mutation operator is a bandit arm with a Beta posterior over its
probability of producing a child that reaches new coverage. Feedback is
credited per stack slot: a child built from n draws contributes n
increments, one per (operator, site) pair in its mutation record.
"""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import dataclass

from .mutation import ALL_OPERATORS, EXTRA_OPERATORS, MutationOperator, MutationRecord

DEFAULT_PRIOR = (1.0, 1000.0)

DEFAULT_REFRESH_SECS = 600.0
DEFAULT_REFRESH_EXECS = 100_000

SUM_TOLERANCE = 1e-9


@dataclass
class ArmPosterior:
    """Beta posterior for one operator arm.

    The conjugate update never needs more state than the two prior shapes
    and the success/failure tallies.
    """

    alpha0: float = DEFAULT_PRIOR[0]
    beta0: float = DEFAULT_PRIOR[1]
    n_success: int = 0
    n_failure: int = 0

    def __post_init__(self):
        if self.alpha0 <= 0 or self.beta0 <= 0:
            raise ValueError("prior shape parameters must be positive")

    def posterior(self) -> tuple[float, float]:
        """Posterior shape: (alpha0 + successes, beta0 + failures)."""
        return (self.alpha0 + self.n_success, self.beta0 + self.n_failure)

    def sample(self, rng: random.Random) -> float:
        a, b = self.posterior()
        return rng.betavariate(a, b)


class OperatorDistribution:
    """Probability vector over an ordered set of operator arms."""

    __slots__ = ("operators", "probabilities", "_cum")

    def __init__(self, operators, probabilities):
        ops = tuple(operators)
        probs = [float(p) for p in probabilities]
        if not ops or len(ops) != len(probs):
            raise ValueError("operators and probabilities must align")
        if len(set(ops)) != len(ops):
            raise ValueError("duplicate operator")
        if any(p < 0 for p in probs):
            raise ValueError("negative probability")
        total = sum(probs)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.operators = ops
        self.probabilities = probs
        self._cum = list(itertools.accumulate(probs))

    @classmethod
    def uniform(cls, operators) -> "OperatorDistribution":
        ops = tuple(operators)
        return cls(ops, [1.0 / len(ops)] * len(ops))

    def sample(self, rng: random.Random) -> MutationOperator:
        i = bisect.bisect_right(self._cum, rng.random())
        if i >= len(self.operators):  # guard the last layer of float drift
            i = len(self.operators) - 1
        return self.operators[i]

    def probability_of(self, op: MutationOperator) -> float:
        try:
            return self.probabilities[self.operators.index(op)]
        except ValueError:
            return 0.0

    def mapping(self) -> dict[MutationOperator, float]:
        return dict(zip(self.operators, self.probabilities))

    def restricted(self, operators) -> "OperatorDistribution":
        """Re-normalize onto a sub-roster (arm masking)."""
        m = self.mapping()
        probs = [m.get(op, 0.0) for op in operators]
        total = sum(probs)
        if total <= 0:
            raise ValueError("no probability mass on the active operators")
        return OperatorDistribution(operators, [p / total for p in probs])


def active_operators(dictionary) -> tuple[MutationOperator, ...]:
    """The arm roster for a campaign: all 16 operators, or 14 with the
    dictionary-fed ones masked when there are no tokens."""
    if dictionary:
        return ALL_OPERATORS
    return tuple(op for op in ALL_OPERATORS if op not in EXTRA_OPERATORS)


def empirical_distribution(
    counts: dict[MutationOperator, int],
    operators=None,
    smoothing: bool = False,
) -> OperatorDistribution:
    """Maximum-likelihood distribution from success counts: each operator's
    share of the total. Optional add-one smoothing keeps zero-count arms
    alive."""
    ops = tuple(operators) if operators is not None else tuple(counts)
    vals = [int(counts.get(op, 0)) for op in ops]
    if any(v < 0 for v in vals):
        raise ValueError("negative count")
    if smoothing:
        vals = [v + 1 for v in vals]
    total = sum(vals)
    if total == 0:
        raise ValueError("all counts are zero, nothing to normalize")
    return OperatorDistribution(ops, [v / total for v in vals])


def update_counts(
    arms: dict[MutationOperator, ArmPosterior],
    record: MutationRecord,
    success: bool,
) -> None:
    """Credit every stack slot of one child to its operator's arm."""
    for op, _site in record:
        arm = arms[op]
        if success:
            arm.n_success += 1
        else:
            arm.n_failure += 1


def resample_distribution(
    arms: dict[MutationOperator, ArmPosterior],
    rng: random.Random,
    operators=None,
) -> OperatorDistribution:
    """Thompson step: one independent Beta draw per arm, normalized."""
    ops = tuple(operators) if operators is not None else tuple(arms)
    draws = [arms[op].sample(rng) for op in ops]
    total = sum(draws)
    return OperatorDistribution(ops, [d / total for d in draws])


class OperatorScheduler:
    """Hands the campaign its current operator distribution.

    mode "uniform": constant 1/K.
    mode "empirical": a fixed distribution loaded from a file.
    mode "thompson": starts uniform, resamples from the posteriors on the
    configured cadence (whichever of the two triggers fires first).
    """

    def __init__(
        self,
        mode: str,
        operators=ALL_OPERATORS,
        *,
        prior: tuple[float, float] = DEFAULT_PRIOR,
        empirical: OperatorDistribution | None = None,
        refresh_secs: float = DEFAULT_REFRESH_SECS,
        refresh_execs: int = DEFAULT_REFRESH_EXECS,
    ):
        if mode not in ("uniform", "empirical", "thompson"):
            raise ValueError(f"unknown scheduler mode {mode!r}")
        if mode == "empirical" and empirical is None:
            raise ValueError("empirical mode needs a loaded distribution")
        self.mode = mode
        self.operators = tuple(operators)
        self.arms = {op: ArmPosterior(prior[0], prior[1]) for op in self.operators}
        self.refresh_secs = refresh_secs
        self.refresh_execs = refresh_execs
        self.refreshes = 0
        self._execs_since = 0
        self._last_refresh: float | None = None
        if mode == "empirical":
            self._current = empirical.restricted(self.operators)
        else:
            self._current = OperatorDistribution.uniform(self.operators)

    def current_distribution(self) -> OperatorDistribution:
        return self._current

    def update_counts(self, record: MutationRecord, success: bool) -> None:
        update_counts(self.arms, record, success)

    def maybe_refresh(self, now: float, rng: random.Random) -> bool:
        """Advance the cadence by one executed child; resample when due."""
        if self.mode != "thompson":
            return False
        if self._last_refresh is None:
            self._last_refresh = now
        self._execs_since += 1
        if self._execs_since < self.refresh_execs and now - self._last_refresh < self.refresh_secs:
            return False
        self._current = resample_distribution(self.arms, rng, self.operators)
        self._execs_since = 0
        self._last_refresh = now
        self.refreshes += 1
        return True

    def success_counts(self) -> dict[MutationOperator, int]:
        """Raw success tallies over the full 16-operator roster; masked
        arms report zero."""
        return {
            op: (self.arms[op].n_success if op in self.arms else 0)
            for op in ALL_OPERATORS
        }

    def total_increments(self) -> int:
        return sum(a.n_success + a.n_failure for a in self.arms.values())


# --- file formats ---------------------------------------------------------
#
# Distribution file: one "<operator-name> <probability>" line per operator,
# all 16 names required, probabilities >= 0 summing to 1 within 1e-9.
# Counts file: same shape with raw integer counts; '#' lines are comments.


def save_distribution(path, dist: OperatorDistribution) -> None:
    m = dist.mapping()
    with open(path, "w") as fh:
        for op in ALL_OPERATORS:
            fh.write(f"{op.value} {m.get(op, 0.0)!r}\n")


def load_distribution(path) -> OperatorDistribution:
    raw = _read_name_value_lines(path)
    probs = {}
    for name, value in raw.items():
        try:
            op = MutationOperator(name)
        except ValueError:
            raise ValueError(f"unknown operator name {name!r} in {path}") from None
        probs[op] = float(value)
    missing = [op.value for op in ALL_OPERATORS if op not in probs]
    if missing:
        raise ValueError(f"distribution file {path} missing operators: {missing}")
    return OperatorDistribution(ALL_OPERATORS, [probs[op] for op in ALL_OPERATORS])


def save_counts(path, counts: dict[MutationOperator, int], header: str = "") -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(f"# total {sum(counts.values())}\n")
        for op in ALL_OPERATORS:
            fh.write(f"{op.value} {int(counts.get(op, 0))}\n")


def load_counts(path) -> dict[MutationOperator, int]:
    raw = _read_name_value_lines(path)
    counts = {}
    for name, value in raw.items():
        try:
            op = MutationOperator(name)
        except ValueError:
            raise ValueError(f"unknown operator name {name!r} in {path}") from None
        n = int(value)
        if n < 0:
            raise ValueError(f"negative count for {name} in {path}")
        counts[op] = n
    missing = [op.value for op in ALL_OPERATORS if op not in counts]
    if missing:
        raise ValueError(f"counts file {path} missing operators: {missing}")
    return counts


def merge_counts(count_maps) -> dict[MutationOperator, int]:
    merged = dict.fromkeys(ALL_OPERATORS, 0)
    for counts in count_maps:
        for op, n in counts.items():
            merged[op] += n
    return merged


def _read_name_value_lines(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<name> <value>'")
            name, value = parts
            if name in out:
                raise ValueError(f"{path}:{lineno}: duplicate entry {name!r}")
            out[name] = value
    return out
