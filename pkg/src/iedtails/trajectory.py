"""Simulated paths shared by the ARMA and SFPE modules."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .io import csv_text, write_text

__all__ = ["Trajectory"]


@dataclass
class Trajectory:
    """Path ``X_0, ..., X_n`` with ``X_0 = 0``.

    ``values[m]`` is ``X_m``; ``model`` and ``seed`` are metadata for manifests.
    """

    values: np.ndarray
    model: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    stream_id: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1 or self.values[0] != 0.0:
            raise ValueError("trajectory values must be 1-D and start at X_0 = 0")

    @property
    def n(self) -> int:
        return self.values.size - 1

    def to_csv(self, path=None) -> str:
        """``n,x`` rows for ``n = 0..N``."""
        idx = np.arange(self.values.size)
        return write_text(csv_text(["n", "x"], [idx, self.values]), path)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "model": self.model, "seed": self.seed, "stream_id": self.stream_id}
