"""Per-slot training record and its CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("k", "loss", "gap", "test_acc", "nmse_db", "max_staleness", "n_selected")


def _fmt(v: float) -> str:
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "-inf" if v < 0 else "inf"
    return repr(v)


@dataclass(eq=False)
class TrainingHistory:
    """Row 0 is the initial model; row k holds the model after slot k."""

    k: np.ndarray
    loss: np.ndarray
    gap: np.ndarray
    test_acc: np.ndarray
    nmse_db: np.ndarray
    max_staleness: np.ndarray
    n_selected: np.ndarray
    grad_norm_sq: np.ndarray  # at the model entering each slot
    comm_mse_expected: np.ndarray
    zeta: np.ndarray
    x_final: np.ndarray | None = None
    errors: np.ndarray | None = None  # (n_slots + 1, 3, D): e_a, e_d, e_c
    updates: np.ndarray | None = None
    models: np.ndarray | None = None  # (n_slots + 1, D) when errors are recorded
    meta: dict = field(default_factory=dict)

    @classmethod
    def start(cls, task, x0: np.ndarray, n_slots: int, record_errors: bool = False) -> "TrainingHistory":
        n = n_slots + 1
        h = cls(
            k=np.arange(n), loss=np.full(n, np.nan), gap=np.full(n, np.nan),
            test_acc=np.full(n, np.nan), nmse_db=np.full(n, np.nan),
            max_staleness=np.zeros(n, dtype=int), n_selected=np.zeros(n, dtype=int),
            grad_norm_sq=np.full(n, np.nan), comm_mse_expected=np.zeros(n), zeta=np.zeros(n),
            x_final=np.array(x0, dtype=float),
            errors=np.zeros((n, 3, task.D)) if record_errors else None,
            updates=np.zeros((n, task.D)) if record_errors else None,
            models=np.zeros((n, task.D)) if record_errors else None,
        )
        if h.models is not None:
            h.models[0] = x0
        h.loss[0] = task.loss(x0)
        h.gap[0] = h.loss[0] - task.F_star
        h.test_acc[0] = task.accuracy(x0)
        return h

    def record(self, k: int, task, x: np.ndarray, metrics, errors=None) -> None:
        self.loss[k] = task.loss(x)
        self.gap[k] = self.loss[k] - task.F_star
        self.test_acc[k] = task.accuracy(x)
        self.nmse_db[k] = metrics.nmse_db
        self.max_staleness[k] = max(self.max_staleness[k - 1], metrics.max_staleness)
        self.n_selected[k] = metrics.n_selected
        self.grad_norm_sq[k] = metrics.grad_norm_sq
        self.comm_mse_expected[k] = metrics.comm_mse_expected
        self.zeta[k] = metrics.zeta
        self.x_final = np.array(x, dtype=float)
        if self.errors is not None and errors is not None:
            self.errors[k] = np.stack([errors.e_a, errors.e_d, errors.e_c])
            self.updates[k] = metrics.update
            self.models[k] = x

    @property
    def n_slots(self) -> int:
        return len(self.k) - 1

    @property
    def ms(self) -> int:
        return int(self.max_staleness[-1])

    def mean_nmse_db(self) -> float:
        """Average NMSE in dB over slots with a finite value."""
        v = self.nmse_db[1:]
        v = v[np.isfinite(v)]
        return float(v.mean()) if v.size else float("nan")

    def final_gap(self, window: int = 1) -> float:
        return float(np.mean(self.gap[-window:]))

    def final_accuracy(self, window: int = 1) -> float:
        return float(np.mean(self.test_acc[-window:]))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(len(self.k)):
            w.writerow([int(self.k[i]), _fmt(self.loss[i]), _fmt(self.gap[i]), _fmt(self.test_acc[i]),
                        _fmt(self.nmse_db[i]), int(self.max_staleness[i]), int(self.n_selected[i])])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @staticmethod
    def read_csv(path: str | Path) -> dict[str, np.ndarray]:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return {c: np.array([float(r[c]) for r in rows]) for c in COLUMNS}
