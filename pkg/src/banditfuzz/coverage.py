"""Edge coverage bookkeeping.

The global map keeps one byte per edge; each bit marks a hit-count bucket
observed for that edge at least once. Per-execution traces are sparse
dicts of raw hit counts (edge index -> count) and are folded into the
global map through has_new_bits.
"""

from __future__ import annotations

import enum
import hashlib

MAP_SIZE = 1 << 16

# Raw hit counts collapse into 8 buckets before touching the bitmap:
# 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+.
def _bucket_lut() -> list[int]:
    lut = [0] * 256
    for n in range(1, 256):
        if n == 1:
            bit = 0
        elif n == 2:
            bit = 1
        elif n == 3:
            bit = 2
        elif n <= 7:
            bit = 3
        elif n <= 15:
            bit = 4
        elif n <= 31:
            bit = 5
        elif n <= 127:
            bit = 6
        else:
            bit = 7
        lut[n] = 1 << bit
    return lut


BUCKET_LUT = _bucket_lut()

# An execution trace: edge index -> raw hit count, counts saturated at 255.
TraceObservation = dict[int, int]


def bucket(count: int) -> int:
    """Bucket flag byte for a raw hit count. Zero or negative counts are a
    contract violation upstream, not a representable observation."""
    if count < 1:
        raise ValueError(f"hit count must be positive, got {count}")
    return BUCKET_LUT[count] if count < 255 else 0x80


def edge_index(prev_block: int, cur_block: int, map_size: int = MAP_SIZE) -> int:
    """Edge id for a prev->cur block transition, reduced into the map."""
    return ((prev_block >> 1) ^ cur_block) % map_size


class Novelty(enum.IntEnum):
    """What an execution trace contributed to the global map."""

    NOTHING = 0
    NEW_BUCKET = 1
    NEW_EDGE = 2


class TraceBudgetExhausted(BaseException):
    # BaseException on purpose: a broad `except Exception` inside a target
    # must not swallow the abort.
    pass


class TraceRecorder:
    """Collects one execution's edge hit counts.

    Targets call hit(block_id) at every instrumentation point. The recorder
    derives the edge id from the previous block, saturates counts at 255,
    and aborts the execution once the instrumentation-event budget runs out
    (that is the deterministic stand-in for a wall-clock timeout).
    """

    __slots__ = ("counts", "map_size", "_prev", "_left")

    def __init__(self, map_size: int = MAP_SIZE, hit_budget: int | None = None):
        self.counts: TraceObservation = {}
        self.map_size = map_size
        self._prev = 0
        self._left = hit_budget if hit_budget is not None else -1

    def hit(self, block_id: int) -> None:
        # Same formula as edge_index(); inlined, this is the hottest path.
        edge = ((self._prev >> 1) ^ block_id) % self.map_size
        self._prev = block_id
        cur = self.counts.get(edge, 0)
        if cur < 255:
            self.counts[edge] = cur + 1
        if self._left >= 0:
            self._left -= 1
            if self._left < 0:
                raise TraceBudgetExhausted


class CoverageMap:
    """Global bucketed edge bitmap, one byte of bucket flags per edge."""

    def __init__(self, map_size: int = MAP_SIZE):
        if map_size <= 0 or map_size & (map_size - 1):
            raise ValueError(f"map size must be a positive power of two, got {map_size}")
        self.map_size = map_size
        self.cells = bytearray(map_size)

    def has_new_bits(self, trace: TraceObservation) -> Novelty:
        """Fold one trace into the map and say what it contributed.

        NEW_EDGE if any touched cell was all zeroes before, NEW_BUCKET if
        only unseen bucket flags appeared, NOTHING otherwise. The map is
        updated in every case.
        """
        cells = self.cells
        lut = BUCKET_LUT
        verdict = 0
        for edge, count in trace.items():
            if count < 1:
                raise ValueError(f"hit count must be positive, got {count}")
            flag = lut[count] if count < 255 else 0x80
            old = cells[edge]
            if old & flag == 0:
                if old == 0:
                    verdict = 2
                elif verdict == 0:
                    verdict = 1
                cells[edge] = old | flag
        return Novelty(verdict)

    def edge_count(self) -> int:
        return self.map_size - self.cells.count(0)

    def to_bytes(self) -> bytes:
        return bytes(self.cells)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CoverageMap":
        m = cls(len(blob))
        m.cells[:] = blob
        return m

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CoverageMap) and self.cells == other.cells


def trace_signature(trace: TraceObservation) -> str:
    """Stable hash of the bucketed (edge, bucket) pair set of a trace.

    Used to deduplicate crashes and hangs by path.
    """
    pairs = sorted((edge, bucket(count)) for edge, count in trace.items())
    blob = ",".join(f"{e}:{b}" for e, b in pairs).encode()
    return hashlib.sha1(blob).hexdigest()
