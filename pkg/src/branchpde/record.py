"""Run records: config echo, per-step series, snapshots and status."""

from __future__ import annotations

from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .spectral import SpectralField

SERIES_COLUMNS = ("t", "count_u", "count_v", "mass_u", "mass_v", "floor_hits", "cap_hits")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


@dataclass
class Snapshot:
    step: int
    t: float
    fields: dict[str, SpectralField | np.ndarray]


@dataclass
class RunRecord:
    """Everything a run produced.

    ``fields`` of a snapshot hold physical fields: a :class:`SpectralField`
    for particle runs (already scaled by Z) or a grid array for FD runs.
    """

    kind: str
    config: dict[str, Any]
    seed: int | None
    series: list[dict[str, Any]] = field(default_factory=list)
    snapshots: list[Snapshot] = field(default_factory=list)
    status: str = "completed"
    failure: dict[str, Any] | None = None
    wall_clock: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    version: str = __version__

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def fail(self, step: int, reason: str) -> None:
        self.status = "failed"
        self.failure = {"step": step, "reason": reason}

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r.get(name) is None else r[name] for r in self.series], dtype=float)

    def series_csv(self) -> str:
        lines = [",".join(SERIES_COLUMNS)]
        for row in self.series:
            lines.append(",".join(_fmt(row.get(c)) for c in SERIES_COLUMNS))
        return "\n".join(lines) + "\n"

    def snapshot_at(self, t: float, tol: float = 1e-12) -> Snapshot:
        for s in self.snapshots:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")

    def to_json(self, snapshot_index: dict | None = None) -> str:
        doc = {
            "kind": self.kind,
            "version": self.version,
            "seed": self.seed,
            "status": self.status,
            "failure": self.failure,
            "config": self.config,
            "snapshots": snapshot_index
            if snapshot_index is not None
            else [{"step": s.step, "t": s.t, "fields": sorted(s.fields)} for s in self.snapshots],
            "wall_clock": self.wall_clock,
            "notes": self.notes,
            "series_columns": list(SERIES_COLUMNS),
            "n_steps": len(self.series) - 1,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def load_run_json(run_dir) -> dict:
    return json.loads((Path(run_dir) / "run.json").read_text())
