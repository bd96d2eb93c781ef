"""Lower-envelope statistic ``X_n / g(1/log n)`` and its running minimum.

``g`` is the inverse of ``x -> x**rho L(x)``, so for unit ``L`` the statistic
is ``(log n)**(1/rho) X_n``. Its liminf along a path equals ``Lam**(1/rho)``;
finite paths can only band that constant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .core import IedClass, envelope_scale
from .errors import ArgumentError
from .io import csv_text, write_text

__all__ = ["EnvelopeReport", "envelope_report", "dip_indices", "log_moment_panel"]


@dataclass
class EnvelopeReport:
    n_grid: np.ndarray
    x: np.ndarray
    statistic: np.ndarray
    running_min: np.ndarray
    levels: tuple[float, ...]
    dip_counts: tuple[int, ...]
    theoretical_level: float
    window: tuple[int, int]

    @property
    def min_on_window(self) -> float:
        return float(self.running_min[-1])

    def to_csv(self, path=None) -> str:
        return write_text(
            csv_text(["n", "x", "statistic", "running_min"],
                     [self.n_grid, self.x, self.statistic, self.running_min]),
            path,
        )

    def summary(self) -> dict[str, Any]:
        return {
            "level": list(self.levels),
            "dip_count": list(self.dip_counts),
            "min_on_window": self.min_on_window,
            "theoretical_level": self.theoretical_level,
            "window": list(self.window),
        }

    to_dict = summary


def _values(traj):
    return np.asarray(getattr(traj, "values", traj), dtype=float)


def envelope_report(
    traj,
    cls: IedClass,
    window: tuple[int, int] = (100, None),
    levels: Sequence[float] = (),
) -> EnvelopeReport:
    """Statistic, running minimum and dip counts for ``n`` in ``window``.

    ``traj`` is a :class:`~iedtails.trajectory.Trajectory` (or an array whose
    entry ``n`` is ``X_n``); ``cls`` carries the limit class, whose
    ``level`` ``Lam**(1/rho)`` is reported as the theoretical level.
    """
    x_all = _values(traj)
    n_lo, n_hi = window
    if n_hi is None:
        n_hi = x_all.size - 1
    if not (isinstance(n_lo, (int, np.integer)) and isinstance(n_hi, (int, np.integer))):
        raise ArgumentError("window bounds must be integers")
    if n_lo < 3 or n_hi < n_lo or n_hi > x_all.size - 1:
        raise ArgumentError(
            f"window ({n_lo}, {n_hi}) must satisfy 3 <= n_lo <= n_hi <= {x_all.size - 1}"
        )
    n = np.arange(n_lo, n_hi + 1)
    x = x_all[n_lo:n_hi + 1]
    y = 1.0 / np.log(n)
    if cls.slow_var.is_unit:
        # g(y) = y**(1/rho), so the statistic is (log n)**(1/rho) x
        stat = x * np.log(n) ** (1.0 / cls.rho)
    else:
        stat = x / envelope_scale(y, cls)
    if np.any(stat <= 0):
        raise ArgumentError("envelope statistic requires a positive path on the window")
    rmin = np.minimum.accumulate(stat)
    levels = tuple(float(v) for v in levels)
    if any(v <= 0 for v in levels):
        raise ArgumentError("levels must be positive")
    counts = tuple(int(np.count_nonzero(stat <= v)) for v in levels)
    return EnvelopeReport(n, x, stat, rmin, levels, counts, cls.level, (int(n_lo), int(n_hi)))


def dip_indices(report: EnvelopeReport, level: float) -> list[int]:
    """All ``n`` in the window with statistic at or below ``level``."""
    if not level > 0:
        raise ArgumentError("level must be positive")
    return report.n_grid[report.statistic <= level].tolist()


def log_moment_panel(b, powers=(1, 2, 4)) -> dict[str, float]:
    """``E[(log+ B)**s]`` for a few ``s``; a sanity panel, not a verification."""
    lb = np.log(np.maximum(np.asarray(b, dtype=float), 1.0))
    return {f"s={s}": float(np.mean(lb**s)) for s in powers}
