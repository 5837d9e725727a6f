"""Wall-clock benchmark of the full matcher."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

from .config import SolverConfig
from .image_core import GrayImage
from .pipeline import run, set_threads


@dataclass
class BenchReport:
    median_ms: float
    runs_ms: list[float]
    stage_ms: dict[str, float] = field(default_factory=dict)
    threads: int = 1
    width: int = 0
    height: int = 0
    # median over runs of (sum of stage times) / total
    stage_coverage: float = 0.0

    @property
    def stage_sum_ms(self) -> float:
        return sum(v for k, v in self.stage_ms.items() if k != "total")

    def lines(self) -> list[str]:
        out = [
            f"size={self.width}x{self.height}",
            f"threads={self.threads}",
            f"runs={len(self.runs_ms)}",
            f"median_ms={self.median_ms:.2f}",
            f"hz={1000.0 / self.median_ms:.2f}" if self.median_ms > 0 else "hz=inf",
            f"stage_coverage={self.stage_coverage:.3f}",
        ]
        out += [f"stage.{k}_ms={v:.2f}" for k, v in self.stage_ms.items()]
        return out


def benchmark(left: GrayImage, right: GrayImage, cfg: SolverConfig | None = None,
              repetitions: int = 3, threads: int = 1) -> BenchReport:
    """One untimed warm-up, then ``repetitions`` timed runs.

    Stage timings are per-stage medians over the timed runs.
    """
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    used = set_threads(threads)
    run(left, right, cfg)
    runs, stages = [], []
    for _ in range(repetitions):
        t = time.perf_counter()
        res = run(left, right, cfg)
        runs.append((time.perf_counter() - t) * 1e3)
        stages.append(res.timings)
    stage_ms = {k: statistics.median(s[k] for s in stages) for k in stages[0]}
    coverage = statistics.median(sum(v for k, v in s.items() if k != "total") / s["total"] for s in stages)
    return BenchReport(statistics.median(runs), runs, stage_ms, used, left.width, left.height, coverage)
