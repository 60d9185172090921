"""Run ledger: per-stage wall clock and path counts, counters and numeric series.

One ledger is filled while a subcommand runs and is folded into the run manifest
by :meth:`RunManifest.finish`. Stages are named by the code that runs them
(``gen_paths``, ``picard_grid``, ``certify``); series hold per-iteration logs
such as the Picard sup-norm deltas.
"""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List

__all__ = ["RunLedger", "StageRecord", "metrics"]


@dataclass
class StageRecord:
    calls: int = 0
    seconds: float = 0.0
    paths: int = 0

    def to_dict(self) -> Dict[str, float]:
        return {"count": self.calls, "total": self.seconds, "paths": self.paths}


class RunLedger:
    """Thread-safe accumulator for one run; ``clock`` is injectable for tests."""

    def __init__(self, clock: Callable[[], float] = time.perf_counter) -> None:
        self.clock = clock
        self._lock = threading.Lock()
        self._stages: Dict[str, StageRecord] = {}
        self._counters: Dict[str, int] = {}
        self._series: Dict[str, List[float]] = {}

    @contextmanager
    def stage(self, name: str, *, paths: int = 0) -> Iterator[StageRecord]:
        """Charge the enclosed block to ``name``; re-entering a stage accumulates."""

        with self._lock:
            record = self._stages.setdefault(name, StageRecord())
        begun = self.clock()
        try:
            yield record
        finally:
            elapsed = self.clock() - begun
            with self._lock:
                record.calls += 1
                record.seconds += elapsed
                record.paths += int(paths)

    def increment(self, name: str, amount: int = 1) -> None:
        with self._lock:
            self._counters[name] = self._counters.get(name, 0) + int(amount)

    def extend(self, name: str, values: Iterable[float]) -> None:
        with self._lock:
            self._series.setdefault(name, []).extend(float(v) for v in values)

    def stage_timings(self) -> Dict[str, Dict[str, float]]:
        with self._lock:
            return {name: self._stages[name].to_dict() for name in sorted(self._stages)}

    def counters(self) -> Dict[str, int]:
        with self._lock:
            return dict(self._counters)

    def series(self) -> Dict[str, List[float]]:
        with self._lock:
            return {name: list(values) for name, values in self._series.items()}

    def reset(self) -> None:
        with self._lock:
            self._stages.clear()
            self._counters.clear()
            self._series.clear()


metrics = RunLedger()
