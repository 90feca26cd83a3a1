"""Monte-Carlo validation: are the computed levels uniform under the null?

Each simulation draws ``m`` samples from the model at a known parameter,
estimates the parameter, computes the confidence level, and the sorted
levels are compared with the grid ``(2i - 1) / (2j)``.

Random streams: simulation ``i`` uses ``numpy.random.Generator(PCG64(s_i))``
where ``s_i`` is the ``i``-th child of ``SeedSequence(seed).spawn(j)``. The
streams are therefore independent of how simulations are scheduled across
threads.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EstimateAtBoundary, InsufficientData, OverflowMassTooLarge
from .models import AnyModel, BinCounts, InfiniteModel, probabilities, truncate_support
from .statistic import evaluate


@dataclass(frozen=True)
class SimulationConfig:
    model: AnyModel
    theta_true: float
    m: int
    j: int
    seed: int
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("need at least one simulation (j >= 1)")
        n = truncate_support(self.model, self.theta_true, self.epsilon).n_bins
        if self.m < n:
            raise ValueError(f"m={self.m} draws is fewer than the model's {n} bins")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SimulationReport:
    sorted_levels: np.ndarray
    grid: np.ndarray
    ks_distance: float
    max_nodes: int
    elapsed_quadrature_s: float
    elapsed_simulation_s: float
    excluded: dict = field(default_factory=dict)

    @property
    def j(self) -> int:
        return int(self.sorted_levels.size)

    def summary(self) -> dict:
        j = self.j
        return {
            "j": j,
            "ks_distance": self.ks_distance,
            "ks_critical_1pct": 1.63 / math.sqrt(j) if j else math.nan,
            "max_nodes": self.max_nodes,
            "elapsed_quadrature_s": self.elapsed_quadrature_s,
            "elapsed_simulation_s": self.elapsed_simulation_s,
            "excluded": dict(self.excluded),
            "excluded_total": int(sum(self.excluded.values())),
        }


def uniform_grid(j: int) -> np.ndarray:
    return (2.0 * np.arange(1, j + 1) - 1.0) / (2.0 * j)


def ks_distance(sorted_levels: np.ndarray) -> float:
    """One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1)."""
    u = np.asarray(sorted_levels, dtype=float)
    j = u.size
    if j == 0:
        return math.nan
    return float(np.max(np.abs(u - uniform_grid(j))) + 0.5 / j)


def sample_multinomial(p, m: int, rng: np.random.Generator) -> BinCounts:
    """Counts of ``m`` independent draws over bins with probabilities ``p``.

    Uses numpy's conditional-binomial multinomial sampler. Probabilities
    are renormalized so truncated vectors are accepted.
    """
    p = np.asarray(p, dtype=float)
    if m < 1:
        raise ValueError("m must be positive")
    return BinCounts(rng.multinomial(m, p / p.sum()))


def draw_counts(model: AnyModel, theta: float, m: int, rng: np.random.Generator) -> BinCounts:
    if isinstance(model, InfiniteModel) and model.sampler is not None:
        return BinCounts(model.sampler(rng, theta, m))
    return sample_multinomial(probabilities(model, theta), m, rng)


def _one(config: SimulationConfig, seed_seq: np.random.SeedSequence, abs_tol: float):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    counts = draw_counts(config.model, config.theta_true, config.m, rng)
    try:
        result, quad_s = evaluate(config.model, counts, config.epsilon, abs_tol)
    except EstimateAtBoundary:
        return None, "boundary", 0, 0.0
    except InsufficientData:
        return None, "insufficient", 0, 0.0
    except OverflowMassTooLarge:
        return None, "overflow", 0, 0.0
    return result.confidence_level, None, result.quadrature.nodes_used, quad_s


def run_simulations(
    config: SimulationConfig,
    workers: int = 1,
    abs_tol: float = 1e-12,
) -> SimulationReport:
    """Run ``config.j`` simulations and collect the sorted confidence levels.

    Simulations whose estimate lands on the domain boundary (or that cannot
    be evaluated for lack of data or excess truncated mass) are excluded
    and counted in ``excluded``.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.j)
    start = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda s: _one(config, s, abs_tol), children))
    else:
        outcomes = [_one(config, s, abs_tol) for s in children]
    elapsed = time.perf_counter() - start

    levels = np.sort(np.array([o[0] for o in outcomes if o[0] is not None], dtype=float))
    excluded: dict = {}
    for o in outcomes:
        if o[1] is not None:
            excluded[o[1]] = excluded.get(o[1], 0) + 1
    return SimulationReport(
        sorted_levels=levels,
        grid=uniform_grid(levels.size),
        ks_distance=ks_distance(levels),
        max_nodes=max((o[2] for o in outcomes), default=0),
        elapsed_quadrature_s=float(sum(o[3] for o in outcomes)),
        elapsed_simulation_s=elapsed,
        excluded=excluded,
    )


def qq_csv(report: SimulationReport) -> str:
    # repr gives the shortest string that parses back to the same double
    buf = io.StringIO()
    buf.write("grid,level\n")
    for g, u in zip(report.grid, report.sorted_levels):
        buf.write(f"{float(g)!r},{float(u)!r}\n")
    return buf.getvalue()


def qq_export(report: SimulationReport, path) -> None:
    """Write the Q-Q points as CSV (``grid,level``), atomically."""
    path = os.fspath(path)
    if not path:
        raise FileNotFoundError("empty output path")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".qq-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(qq_csv(report))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_qq(path):
    """Parse a Q-Q CSV back into ``(grid, levels)`` arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["grid", "level"]:
        raise ValueError(f"{path}: missing 'grid,level' header")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
    return data[:, 0], data[:, 1]
