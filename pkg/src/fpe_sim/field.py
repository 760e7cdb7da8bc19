"""DensityField: sampled W(x, t), the exchange format between engines."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = ["DensityField", "write_fields_csv", "FLOAT_FMT"]

# 17 significant digits, scientific notation
FLOAT_FMT = "{:.16e}"


def _fmt(v: float) -> str:
    return FLOAT_FMT.format(float(v))


@dataclass(frozen=True)
class DensityField:
    """Density samples ``ws`` at strictly increasing positions ``xs``.

    ``widths`` holds per-sample quadrature weights when the samples are cell
    or bin averages (finite-volume cells, histogram bins); without them the
    mass is a trapezoidal sum over ``xs``.  ``counts`` is only set for
    histograms.
    """

    t: float
    xs: np.ndarray
    ws: np.ndarray
    x_lo: float
    x_hi: float
    widths: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ws = np.asarray(self.ws, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ws", ws)
        if self.widths is not None:
            object.__setattr__(self, "widths", np.asarray(self.widths, dtype=float))
        if xs.shape != ws.shape or xs.ndim != 1:
            raise ValueError("xs and ws must be 1-d arrays of equal length")
        if xs.size > 1 and np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if self.x_lo > self.x_hi:
            raise ValueError("x_lo must not exceed x_hi")

    def mass(self) -> float:
        if self.widths is not None:
            return float(np.sum(self.ws * self.widths))
        return float(np.trapezoid(self.ws, self.xs))

    def peak(self) -> tuple[float, float]:
        i = int(np.argmax(self.ws))
        return float(self.xs[i]), float(self.ws[i])

    def cell_weights(self) -> np.ndarray:
        """Weights w_i with sum(w_i * ws_i) the mass estimate used by :meth:`mass`."""
        if self.widths is not None:
            return self.widths
        w = np.zeros_like(self.xs)
        if self.xs.size > 1:
            d = np.diff(self.xs)
            w[:-1] += 0.5 * d
            w[1:] += 0.5 * d
        return w

    def to_csv(self, path) -> None:
        write_fields_csv(path, [self])

    def histogram_to_csv(self, path) -> None:
        """Rows ``t,bin_center,density,count``."""
        if self.counts is None:
            raise ValueError("field carries no histogram counts")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "bin_center", "density", "count"])
            for x, d, c in zip(self.xs, self.ws, self.counts):
                w.writerow([_fmt(self.t), _fmt(x), _fmt(d), int(c)])


def write_fields_csv(path, fields) -> None:
    """Rows ``t,x,W`` for each field in order."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "W"])
        for f in fields:
            for x, v in zip(f.xs, f.ws):
                w.writerow([_fmt(f.t), _fmt(x), _fmt(v)])
