"""Decision variables over one cycle of K slots, and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from uavafl.errors import ShapeError


@dataclass(eq=False)
class Schedule:
    """Selection ``A`` (M, K), amplitudes ``B`` (M, K), denoising ``Z`` (K,)
    and trajectory ``Q`` (K + 1, 3). Slot k (1-based) is column k - 1 of
    A/B/Z and row k of Q; row 0 of Q is the dispatch point.

    ``error_free`` marks strategies that bypass the radio (aggregate exactly);
    ``relaxed`` names constraints a strategy deliberately does not honour.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    Z: np.ndarray | None = None
    label: str = ""
    error_free: bool = False
    relaxed: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.Q = np.asarray(self.Q, dtype=float)
        M, K = self.A.shape
        if self.B.shape != (M, K):
            raise ShapeError(f"B shape {self.B.shape} != A shape {(M, K)}")
        if self.Q.shape != (K + 1, 3):
            raise ShapeError(f"Q must have shape ({K + 1}, 3), got {self.Q.shape}")
        if self.Z is None:
            self.Z = np.zeros(K)
        self.Z = np.asarray(self.Z, dtype=float)
        if self.Z.shape != (K,):
            raise ShapeError(f"Z must have shape ({K},)")

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def K(self) -> int:
        return self.A.shape[1]

    def cycle_slot(self, k: int) -> int:
        """Cycle slot (1..K) executed at training slot ``k`` under periodic repetition."""
        return (k - 1) % self.K + 1

    def selected(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.A[:, self.cycle_slot(k) - 1] > 0.5)

    def position(self, k: int) -> np.ndarray:
        return self.Q[self.cycle_slot(k)]

    def with_(self, **kw) -> "Schedule":
        return replace(self, **kw)

    def expanded(self, n_slots: int) -> "Schedule":
        """Periodic repetition to ``n_slots`` slots (trajectory included)."""
        idx = np.array([self.cycle_slot(k) - 1 for k in range(1, n_slots + 1)])
        Q = np.vstack([self.Q[:1], self.Q[1:][idx]])
        return replace(self, A=self.A[:, idx], B=self.B[:, idx], Z=self.Z[idx], Q=Q)

    # -- CSV -----------------------------------------------------------------

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "x", "y", "z"] + [f"a_{m}" for m in range(self.M)]
                   + [f"b_{m}" for m in range(self.M)] + ["zeta"])
        for k in range(self.K + 1):
            if k == 0:
                a = [0] * self.M
                b = [repr(0.0)] * self.M
                z = repr(0.0)
            else:
                a = [int(round(v)) if v in (0.0, 1.0) else repr(float(v)) for v in self.A[:, k - 1]]
                b = [repr(float(v)) for v in self.B[:, k - 1]]
                z = repr(float(self.Z[k - 1]))
            w.writerow([k] + [repr(float(c)) for c in self.Q[k]] + a + b + [z])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, label: str = "") -> "Schedule":
        text = Path(source).read_text() if _is_path(source) else str(source)
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        M = sum(1 for h in header if h.startswith("a_"))
        data = np.array([[float(v) for v in r] for r in body])
        Q = data[:, 1:4]
        A = data[1:, 4:4 + M].T
        B = data[1:, 4 + M:4 + 2 * M].T
        Z = data[1:, 4 + 2 * M]
        return cls(A=A, B=B, Q=Q, Z=Z, label=label)


def _is_path(source) -> bool:
    if isinstance(source, Path):
        return True
    return "\n" not in str(source) and Path(str(source)).exists()
