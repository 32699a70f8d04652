"""Error metrics, mass time series and convergence-rate fits."""

from __future__ import annotations

from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .record import RunRecord
from .spectral import SpectralField, mode_norm_sq

PI2 = math.pi**2


@dataclass
class TimeSeries:
    t: np.ndarray
    values: np.ndarray
    label: str = ""
    failed: bool = False

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ConfigError("time series needs strictly increasing times")


def rel_l2_grid(A, B) -> float:
    """``||A - B|| / ||B||`` over grid values; ``B`` is the reference."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ConfigError(f"grid shapes differ: {A.shape} vs {B.shape}")
    ref = np.linalg.norm(B.ravel())
    if ref == 0:
        raise ConfigError("reference field has zero norm")
    return float(np.linalg.norm((A - B).ravel()) / ref)


def h_minus_s_distance(F: SpectralField, G: SpectralField, s: float) -> float:
    """``sqrt(sum_m (1+|k|^2)^-s (a_m - b_m)^2)``."""
    if F.K != G.K or F.dim != G.dim:
        raise ConfigError(f"truncation mismatch: K={F.K} vs K={G.K}")
    w = (1.0 + mode_norm_sq(F.K, F.dim)) ** (-s)
    diff = F.coeffs - G.coeffs
    return float(math.sqrt(np.sum(w * diff * diff)))


def mass_series(record: RunRecord, which: str = "u") -> TimeSeries:
    """Per-step mass estimates (``Z |S| / N`` for particle runs, grid sums for FD runs)."""
    if which not in ("u", "v"):
        raise ConfigError("which must be 'u' or 'v'")
    t = record.column("t")
    m = record.column(f"mass_{which}")
    return TimeSeries(t, m, label=f"mass_{which}", failed=not record.completed)


def exact_mass_case2(t, m0: float = 8 * PI2, source: float = PI2):
    """Solution of ``M' = -M + source`` with ``M(0) = m0``: the chemical mass in the linear KS case."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ConfigError("time must be nonnegative")
    out = source + (m0 - source) * np.exp(-t)
    return float(out) if out.ndim == 0 else out


def fit_convergence_slope(pairs) -> tuple[float, float]:
    """Least-squares line through ``(log N, log error)``; returns ``(slope, intercept)``."""
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise ConfigError("need at least three (N, error) pairs")
    if np.any(arr <= 0):
        raise ConfigError("N and error must be positive")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(slope), float(intercept)


def fit_residual(pairs, slope: float, intercept: float) -> float:
    arr = np.asarray(pairs, dtype=np.float64)
    r = np.log(arr[:, 1]) - (slope * np.log(arr[:, 0]) + intercept)
    return float(np.sqrt(np.mean(r * r)))


def write_metrics_csv(path, rows) -> None:
    """Rows of ``(metric, t_or_N, value)``."""
    lines = ["metric,key,value"]
    for metric, key, value in rows:
        key_s = f"{key:.17g}" if isinstance(key, float) else str(key)
        lines.append(f"{metric},{key_s},{float(value):.17g}")
    Path(path).write_text("\n".join(lines) + "\n")
