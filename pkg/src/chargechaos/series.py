"""Time series and histogram containers with their CSV formats."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


def _fmt(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".17g")


@dataclass
class ObservableSeries:
    """Estimated diagnostic on a time grid.

    CSV columns are ``t,value,std_error,n``. ``extra`` holds companion arrays
    of the same length (left/right sides of an identity, complex parts, ...);
    they are not part of the CSV.
    """

    times: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    realizations: int
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.std_errors = np.asarray(self.std_errors, dtype=float)
        n = len(self.times)
        if len(self.values) != n or len(self.std_errors) != n:
            raise ValueError("times, values and std_errors must have equal length")
        if np.any(self.std_errors < 0):
            raise ValueError("standard errors must be non-negative")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")

    def __len__(self):
        return len(self.times)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("t,value,std_error,n\n")
        for t, v, s in zip(self.times, self.values, self.std_errors):
            buf.write(f"{_fmt(t)},{_fmt(v)},{_fmt(s)},{int(self.realizations)}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as f:
                f.write(text)
        return text

    @classmethod
    def from_csv(cls, path, label: str = "") -> "ObservableSeries":
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        n = int(rows[0]["n"]) if rows else 1
        return cls(np.array([float(r["t"]) for r in rows]),
                   np.array([float(r["value"]) for r in rows]),
                   np.array([float(r["std_error"]) for r in rows]), n, label)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    label: str = ""

    @property
    def density(self) -> np.ndarray:
        widths = np.diff(self.edges)
        total = self.counts.sum()
        return self.counts / (total * widths) if total else np.zeros_like(widths)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("bin_left,bin_right,count,density\n")
        for a, b, c, d in zip(self.edges[:-1], self.edges[1:], self.counts, self.density):
            buf.write(f"{_fmt(a)},{_fmt(b)},{int(c)},{_fmt(d)}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as f:
                f.write(text)
        return text


def time_grid(t_min: float, t_max: float, points: int, spacing: str = "log") -> np.ndarray:
    """Linear or logarithmic grid including both end points."""
    if points < 2:
        raise ValueError("points must be >= 2")
    if spacing == "log":
        if t_min <= 0:
            raise ValueError("log spacing needs t_min > 0")
        return np.geomspace(t_min, t_max, points)
    if spacing == "linear":
        return np.linspace(t_min, t_max, points)
    raise ValueError(f"unknown spacing {spacing!r}")
