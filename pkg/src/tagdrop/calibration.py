"""Collision zone parameter estimation from measured TDR points.

The collision zone parameter alpha cannot be derived from first principles
(it bundles preamble recovery, channel estimation and every other physical
layer detail), so it is fitted: evaluate the exact collision-limited TDR
model on each measured operating point for a grid of candidate alphas and
keep the one with the lowest weighted RMSE. Grid search is deterministic,
derivative free, and the objective is cheap enough that no cleverness is
warranted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .model import ChannelModel, NetworkConfig, tdr_exact

__all__ = ["MeasuredPoint", "AlphaFit", "rmse", "fit_alpha", "point_from_trace_report"]

# An RMSE curve flatter than this across the whole grid carries no
# information about alpha (e.g. all single-tag measurements).
DEGENERATE_SPAN = 1e-6

DEFAULT_GRID_STEP = 0.001


@dataclass(frozen=True)
class MeasuredPoint:
    """One measured TDR with the configuration that produced it."""

    config: NetworkConfig
    measured_tdr: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.measured_tdr <= 1.0:
            raise ValueError(f"measured_tdr must be in [0, 1], got {self.measured_tdr}")
        if self.weight < 0.0:
            raise ValueError(f"weight must be >= 0, got {self.weight}")


@dataclass(frozen=True)
class AlphaFit:
    """Result of a grid fit: the argmin, its RMSE and the whole curve."""

    alpha_hat: float
    rmse: float
    grid_step: float
    curve: list[tuple[float, float]] = field(repr=False)
    degenerate: bool = False


def rmse(points: list[MeasuredPoint], alpha: float) -> float:
    """Weighted root mean squared error of the exact model at one alpha."""
    if not points:
        raise ValueError("points must be non-empty")
    total_w = sum(p.weight for p in points)
    if total_w <= 0.0:
        raise ValueError("at least one point must have positive weight")
    channel = ChannelModel(alpha=alpha, ber=0.0)
    acc = 0.0
    for p in points:
        err = tdr_exact(p.config, channel) - p.measured_tdr
        acc += p.weight * err * err
    return math.sqrt(acc / total_w)


def _alpha_grid(grid_step: float) -> list[float]:
    n = int(math.floor(1.0 / grid_step + 1e-9))
    grid = [i * grid_step for i in range(n + 1)]
    if grid[-1] < 1.0 - 1e-12:
        grid.append(1.0)
    return grid


def fit_alpha(points: list[MeasuredPoint], grid_step: float = DEFAULT_GRID_STEP) -> AlphaFit:
    """Grid search over alpha in {0, grid_step, ..., 1}.

    Ties break toward smaller alpha. The fit is flagged degenerate when the
    RMSE curve is flat to within DEGENERATE_SPAN, meaning the data cannot
    distinguish collision zone parameters at all.
    """
    if not points:
        raise ValueError("points must be non-empty")
    if not 0.0 < grid_step <= 0.1:
        raise ValueError(f"grid_step must be in (0, 0.1], got {grid_step}")
    curve = [(a, rmse(points, a)) for a in _alpha_grid(grid_step)]
    best_alpha, best_rmse = curve[0]
    for a, r in curve[1:]:
        if r < best_rmse:
            best_alpha, best_rmse = a, r
    lo = min(r for _, r in curve)
    hi = max(r for _, r in curve)
    return AlphaFit(
        alpha_hat=best_alpha,
        rmse=best_rmse,
        grid_step=grid_step,
        curve=curve,
        degenerate=(hi - lo) < DEGENERATE_SPAN,
    )


def point_from_trace_report(report, config: NetworkConfig, weight: float = 1.0) -> MeasuredPoint:
    """Adapt a windowed trace report into a fit point.

    The report only knows timing and the measured TDR; the full network
    configuration (tag count, packet geometry) must be supplied by whoever
    ran the measurement.
    """
    if report.l_cycles != config.cycles:
        raise ValueError(
            f"report was windowed with L={report.l_cycles} but config has L={config.cycles}"
        )
    if not math.isclose(report.t_cycle_s, config.t_cycle_s, rel_tol=1e-9):
        raise ValueError(
            f"report cycle {report.t_cycle_s} s does not match config cycle {config.t_cycle_s} s"
        )
    return MeasuredPoint(config=config, measured_tdr=report.tdr, weight=weight)
