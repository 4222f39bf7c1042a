"""Monitoring - Penghitung dan histogram waktu untuk eksekusi skenario dan bootstrap."""

import logging
import threading
import time
from collections import defaultdict
from contextlib import contextmanager

logger = logging.getLogger(__name__)


class RunMetrics:
    """Counter dan histogram thread-safe.

    Counter bersifat deterministik dan boleh masuk ke hasil JSON; waktu hanya
    dicatat ke log.
    """

    def __init__(self, max_points: int = 10000):
        self.max_points = max_points
        self._counters: dict[str, int] = defaultdict(int)
        self._histograms: dict[str, list[float]] = defaultdict(list)
        self._lock = threading.Lock()

    def increment(self, name: str, value: int = 1):
        with self._lock:
            self._counters[name] += value

    def histogram(self, name: str, value: float):
        with self._lock:
            self._histograms[name].append(value)
            if len(self._histograms[name]) > self.max_points:
                self._histograms[name] = self._histograms[name][-self.max_points:]

    @contextmanager
    def timer(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.histogram(name, time.perf_counter() - start)

    def merge(self, counters: dict):
        with self._lock:
            for name, value in counters.items():
                self._counters[name] += value

    def get_counter(self, name: str) -> int:
        return self._counters.get(name, 0)

    def get_all_counters(self) -> dict:
        with self._lock:
            return dict(sorted(self._counters.items()))

    def get_histogram_stats(self, name: str) -> dict:
        with self._lock:
            values = sorted(self._histograms.get(name, []))
        if not values:
            return {"count": 0}
        n = len(values)
        return {
            "count": n,
            "min": values[0],
            "max": values[-1],
            "mean": round(sum(values) / n, 4),
            "median": values[n // 2],
            "p95": values[int(n * 0.95)] if n >= 20 else values[-1],
        }

    def log_timings(self):
        for name in sorted(self._histograms):
            stats = self.get_histogram_stats(name)
            logger.info(f"Waktu {name}: n={stats['count']}, rata-rata={stats['mean']}s, maks={stats['max']:.3f}s")
