"""In-process execution harness.

Targets run in the fuzzer's own process: a target is a deterministic
callable that takes (input bytes, trace recorder), calls the recorder at
its instrumentation points, returns None on a clean run and raises on a
bug. Timeouts are enforced cooperatively through the recorder's
instrumentation-event budget, which keeps hang classification
deterministic across runs.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .coverage import MAP_SIZE, TraceBudgetExhausted, TraceObservation, TraceRecorder
from .mutation import Dictionary

DEFAULT_TIMEOUT_MS = 50
HITS_PER_MS = 1000


class HarnessError(Exception):
    """A fault in the harness or instrumentation itself. Never recorded as
    a target crash; aborts the campaign instead."""


class ExecutionStatus(Enum):
    OK = "ok"
    CRASH = "crash"
    HANG = "hang"


@dataclass(frozen=True)
class Target:
    """An in-process fuzz target and its scraped string constants."""

    name: str
    entry: Callable[[bytes, TraceRecorder], None]
    dictionary: Dictionary | None = None


@dataclass
class ExecutionResult:
    status: ExecutionStatus
    trace: TraceObservation
    duration_us: float
    crash_kind: str | None = None

    @property
    def ok(self) -> bool:
        return self.status is ExecutionStatus.OK


def execute(
    target: Target,
    data: bytes,
    *,
    map_size: int = MAP_SIZE,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    hits_per_ms: int = HITS_PER_MS,
) -> ExecutionResult:
    """Run the target once on `data` with a fresh recorder.

    Any exception out of the target is a crash (keyed by exception type),
    an exhausted instrumentation budget is a hang. HarnessError and
    interpreter-level exits propagate.
    """
    rec = TraceRecorder(map_size, hit_budget=timeout_ms * hits_per_ms)
    start = time.perf_counter_ns()
    status = ExecutionStatus.OK
    kind = None
    try:
        target.entry(data, rec)
    except TraceBudgetExhausted:
        status = ExecutionStatus.HANG
    except HarnessError:
        raise
    except Exception as exc:
        status = ExecutionStatus.CRASH
        kind = type(exc).__name__
    duration_us = (time.perf_counter_ns() - start) / 1000.0
    return ExecutionResult(status, rec.counts, duration_us, kind)


def scrape_dictionary(blob: bytes, min_len: int = 4, cap: int = 512) -> Dictionary:
    """Pull string constants out of a flat binary blob: maximal runs of
    printable bytes at least min_len long, deduplicated, longest first,
    capped at `cap` tokens."""
    pattern = rb"[ -~]{%d,}" % min_len
    runs = list(dict.fromkeys(re.findall(pattern, blob)))
    runs.sort(key=len, reverse=True)
    return Dictionary(runs[:cap])


_REGISTRY: dict[str, Target] = {}


def register_target(target: Target) -> Target:
    if target.name in _REGISTRY:
        raise ValueError(f"target {target.name!r} already registered")
    _REGISTRY[target.name] = target
    return target


def _ensure_builtins() -> None:
    from . import targets  # noqa: F401  registration side effect


def get_target(name: str) -> Target:
    _ensure_builtins()
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown target {name!r}, available: {', '.join(sorted(_REGISTRY))}"
        ) from None


def available_targets() -> list[str]:
    _ensure_builtins()
    return sorted(_REGISTRY)
