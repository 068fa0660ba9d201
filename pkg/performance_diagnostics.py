"""
Timing utilities for simulation phases
"""

import functools
import logging
import time
from collections import defaultdict
from typing import Any, Callable, Dict, Optional

logger = logging.getLogger(__name__)


class PhaseTimings:
    """Accumulated wall time per phase label"""

    def __init__(self):
        self.total_ms: Dict[str, float] = defaultdict(float)
        self.calls: Dict[str, int] = defaultdict(int)

    def record(self, label: str, elapsed_ms: float) -> None:
        self.total_ms[label] += elapsed_ms
        self.calls[label] += 1

    def rows(self) -> list:
        """Summary rows (phase, calls, total_ms, mean_ms) sorted by total time"""
        return [
            {
                "phase": label,
                "calls": self.calls[label],
                "total_ms": round(total, 2),
                "mean_ms": round(total / self.calls[label], 2),
            }
            for label, total in sorted(self.total_ms.items(), key=lambda item: -item[1])
        ]

    def reset(self) -> None:
        self.total_ms.clear()
        self.calls.clear()


def measure_time(func_name: Optional[str] = None, timings: Optional[PhaseTimings] = None):
    """Decorator to log (and optionally accumulate) the execution time of a function"""
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            name = func_name or func.__name__
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                elapsed_time = (time.perf_counter() - start_time) * 1000
                logger.error(f"❌ [{name}] failed after {elapsed_time:.2f}ms: {str(e)}")
                raise
            elapsed_time = (time.perf_counter() - start_time) * 1000
            logger.debug(f"⏱️  [{name}] took {elapsed_time:.2f}ms")
            (timings or phase_timings).record(name, elapsed_time)
            return result

        return wrapper

    return decorator


class PhaseTimer:
    """Context manager for timing a simulation phase"""

    def __init__(self, label: str, timings: Optional[PhaseTimings] = None, level: int = logging.INFO):
        self.label = label
        self.timings = timings or phase_timings
        self.level = level
        self.start_time: Optional[float] = None
        self.elapsed_ms: Optional[float] = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed_ms = (time.perf_counter() - self.start_time) * 1000
        if exc_type is None:
            logger.log(self.level, f"⏱️  [{self.label}] took {self.elapsed_ms:.2f}ms")
            self.timings.record(self.label, self.elapsed_ms)
        else:
            logger.error(f"❌ [{self.label}] failed after {self.elapsed_ms:.2f}ms")
        return False


# Global timings shared by the decorators of one process
phase_timings = PhaseTimings()
