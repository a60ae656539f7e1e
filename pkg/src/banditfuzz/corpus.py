"""Input queue, crash/hang stores and the on-disk corpus layout.

Directory layout under a campaign's output directory:

    queue/id:NNNNNN              queued inputs, 6-digit dense ids
    crashes/sig:XXXXXXXX,id:NNNN deduplicated crashers (8 hex chars of the
                                 sha1 path signature, 4-digit store index)
    hangs/sig:XXXXXXXX,id:NNNN   deduplicated budget exhaustions
    checkpoint.json              queue metadata + global coverage map
    fuzzer_stats                 human-readable summary (campaign module)
    plot_data.csv                time series rows (campaign module)

Crashing inputs never enter the queue; the queue never evicts.
"""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .coverage import CoverageMap, Novelty, TraceObservation, trace_signature

BASE_ENERGY = 100
MIN_ENERGY = 16
MAX_ENERGY = 1600

_QUEUE_NAME = re.compile(r"^id:(\d{6})$")


@dataclass
class QueueEntry:
    id: int
    data: bytes
    discovery_time: float  # campaign seconds at discovery
    exec_time_us: float
    path_edges: int
    deterministic_done: bool = False
    parent_id: int | None = None


@dataclass
class CrashRecord:
    data: bytes
    path_signature: str
    status: str  # "crash:<kind>" or "hang"


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


class Corpus:
    """The queue plus failure stores, optionally persisted under out_dir."""

    def __init__(self, out_dir: Path | str | None = None, base_energy: int = BASE_ENERGY):
        self.entries: list[QueueEntry] = []
        self.crashes: list[CrashRecord] = []
        self.hangs: list[CrashRecord] = []
        self.base_energy = base_energy
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self._crash_sigs: set[str] = set()
        self._hang_sigs: set[str] = set()
        self._cursor = 0
        self._sum_edges = 0
        self._sum_time = 0.0
        if self.out_dir is not None:
            for sub in ("queue", "crashes", "hangs"):
                (self.out_dir / sub).mkdir(parents=True, exist_ok=True)

    def __len__(self) -> int:
        return len(self.entries)

    def add_if_interesting(
        self,
        data: bytes,
        verdict: Novelty,
        *,
        exec_time_us: float,
        path_edges: int,
        discovery_time: float,
        parent_id: int | None = None,
    ) -> QueueEntry | None:
        """Append a queue entry when the verdict says the input mattered."""
        if verdict is Novelty.NOTHING:
            return None
        entry = QueueEntry(
            id=len(self.entries),
            data=data,
            discovery_time=discovery_time,
            exec_time_us=exec_time_us,
            path_edges=path_edges,
            parent_id=parent_id,
        )
        self.entries.append(entry)
        self._sum_edges += entry.path_edges
        self._sum_time += entry.exec_time_us
        if self.out_dir is not None:
            (self.out_dir / "queue" / f"id:{entry.id:06d}").write_bytes(data)
        return entry

    def pick_input(self) -> tuple[QueueEntry, int]:
        """Round-robin over the queue; new entries join the rotation as the
        cursor reaches them. Returns the entry with its havoc energy."""
        if not self.entries:
            raise IndexError("queue is empty")
        entry = self.entries[self._cursor % len(self.entries)]
        self._cursor += 1
        return entry, self.calculate_score(entry)

    def calculate_score(self, entry: QueueEntry) -> int:
        """Havoc energy for one round on this entry.

        base * coverage factor * speed factor * age factor, clamped to
        [MIN_ENERGY, MAX_ENERGY]. Entries covering more edges than the queue
        average get more energy, slow ones less, newest-quartile ones double.
        """
        n = len(self.entries)
        mean_edges = self._sum_edges / n
        mean_time = self._sum_time / n
        f_cov = _clamp(entry.path_edges / mean_edges, 0.25, 4.0)
        f_speed = _clamp(mean_time / max(entry.exec_time_us, 1e-9), 0.1, 3.0)
        f_age = 2.0 if entry.id >= (3 * n) // 4 else 1.0
        energy = self.base_energy * f_cov * f_speed * f_age
        return int(round(_clamp(energy, MIN_ENERGY, MAX_ENERGY)))

    def record_crash(self, data: bytes, trace: TraceObservation, kind: str) -> CrashRecord | None:
        """Store a crasher unless its path signature is already known."""
        return self._record(data, trace, f"crash:{kind}", self.crashes, self._crash_sigs, "crashes")

    def record_hang(self, data: bytes, trace: TraceObservation) -> CrashRecord | None:
        return self._record(data, trace, "hang", self.hangs, self._hang_sigs, "hangs")

    def _record(self, data, trace, status, store, sigs, subdir) -> CrashRecord | None:
        sig = trace_signature(trace)
        if sig in sigs:
            return None
        rec = CrashRecord(data=data, path_signature=sig, status=status)
        index = len(store)
        sigs.add(sig)
        store.append(rec)
        if self.out_dir is not None:
            name = f"sig:{sig[:8]},id:{index:04d}"
            (self.out_dir / subdir / name).write_bytes(data)
        return rec

    # --- persistence -------------------------------------------------------

    def checkpoint(self, coverage_map: CoverageMap, extra: dict | None = None) -> None:
        """Write checkpoint.json: entry metadata, failure signatures, the
        global map. Input bytes live in the queue/crash/hang files."""
        if self.out_dir is None:
            raise ValueError("corpus has no output directory")
        doc = {
            "cursor": self._cursor,
            "entries": [
                {
                    "id": e.id,
                    "discovery_time": e.discovery_time,
                    "exec_time_us": e.exec_time_us,
                    "path_edges": e.path_edges,
                    "deterministic_done": e.deterministic_done,
                    "parent_id": e.parent_id,
                }
                for e in self.entries
            ],
            "crashes": [{"sig": r.path_signature, "status": r.status} for r in self.crashes],
            "hangs": [{"sig": r.path_signature, "status": r.status} for r in self.hangs],
            "map_size": coverage_map.map_size,
            "coverage_map": base64.b64encode(coverage_map.to_bytes()).decode(),
            "extra": extra or {},
        }
        tmp = self.out_dir / "checkpoint.json.tmp"
        tmp.write_text(json.dumps(doc))
        tmp.replace(self.out_dir / "checkpoint.json")

    @classmethod
    def load(cls, out_dir: Path | str) -> tuple["Corpus", CoverageMap, dict]:
        """Rebuild a corpus and its global map from disk. Queue ids, order
        and metadata come back exactly as checkpointed."""
        out_dir = Path(out_dir)
        doc = json.loads((out_dir / "checkpoint.json").read_text())
        corpus = cls(out_dir)
        corpus._cursor = doc["cursor"]
        queue_dir = out_dir / "queue"
        by_id = {}
        for path in queue_dir.iterdir():
            m = _QUEUE_NAME.match(path.name)
            if not m:
                raise ValueError(f"unexpected file in queue/: {path.name}")
            by_id[int(m.group(1))] = path.read_bytes()
        for meta in doc["entries"]:
            eid = meta["id"]
            if eid != len(corpus.entries):
                raise ValueError(f"queue ids not dense at {eid}")
            if eid not in by_id:
                raise ValueError(f"queue file missing for id {eid}")
            entry = QueueEntry(
                id=eid,
                data=by_id[eid],
                discovery_time=meta["discovery_time"],
                exec_time_us=meta["exec_time_us"],
                path_edges=meta["path_edges"],
                deterministic_done=meta["deterministic_done"],
                parent_id=meta["parent_id"],
            )
            corpus.entries.append(entry)
            corpus._sum_edges += entry.path_edges
            corpus._sum_time += entry.exec_time_us
        for rec, store, sigs, sub in (
            (doc["crashes"], corpus.crashes, corpus._crash_sigs, "crashes"),
            (doc["hangs"], corpus.hangs, corpus._hang_sigs, "hangs"),
        ):
            for index, meta in enumerate(rec):
                matches = list((out_dir / sub).glob(f"sig:{meta['sig'][:8]},id:{index:04d}"))
                data = matches[0].read_bytes() if matches else b""
                store.append(CrashRecord(data=data, path_signature=meta["sig"], status=meta["status"]))
                sigs.add(meta["sig"])
        coverage_map = CoverageMap.from_bytes(base64.b64decode(doc["coverage_map"]))
        return corpus, coverage_map, doc.get("extra", {})
