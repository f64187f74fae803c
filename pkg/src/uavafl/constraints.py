"""Staleness and busy-window constraints on a selection matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SelectionViolation:
    kind: str  # staleness | busy | binary
    device: int
    slot: int  # first slot of the offending window (1-based)

    def __str__(self) -> str:
        return f"{self.kind} constraint violated for device {self.device} in window starting at slot {self.slot}"


def window_matrix(K: int, length: int, cyclic: bool) -> np.ndarray:
    """Rows are 0/1 indicators of consecutive windows of ``length`` slots.

    Non-cyclic: windows starting at slots 1..K-length+1. Cyclic: K windows
    wrapping around the end of the horizon.
    """
    length = int(length)
    if cyclic:
        length = min(length, K)
        W = np.zeros((K, K))
        for k in range(K):
            W[k, (k + np.arange(length)) % K] = 1.0
        return W
    n = K - length + 1
    if n <= 0:
        return np.zeros((0, K))
    W = np.zeros((n, K))
    for k in range(n):
        W[k, k:k + length] = 1.0
    return W


def check_selection(A: np.ndarray, S: int | None, compute_times, cyclic: bool = False,
                    first_only: bool = False, binary: bool = True) -> list[SelectionViolation]:
    """Every violated staleness window (sum >= 1 over S slots) and busy window
    (sum <= 1 over c_m + 1 slots); ``S=None`` skips the staleness check and
    ``binary=False`` accepts fractional entries."""
    A = np.asarray(A, dtype=float)
    M, K = A.shape
    c = np.broadcast_to(np.asarray(compute_times, dtype=int), (M,))
    out: list[SelectionViolation] = []
    bad = np.flatnonzero((np.abs(A) > 1e-9) & (np.abs(A - 1.0) > 1e-9)) if binary else []
    for idx in bad:
        out.append(SelectionViolation("binary", int(idx // K), int(idx % K) + 1))
        if first_only:
            return out
    if S is not None:
        sums = A @ window_matrix(K, S, cyclic).T
        for m, k in zip(*np.nonzero(sums < 1.0 - 1e-9)):
            out.append(SelectionViolation("staleness", int(m), int(k) + 1))
            if first_only:
                return out
    for cm in np.unique(c):
        if cm <= 0:
            continue
        rows = np.flatnonzero(c == cm)
        sums = A[rows] @ window_matrix(K, cm + 1, cyclic).T
        for i, k in zip(*np.nonzero(sums > 1.0 + 1e-9)):
            out.append(SelectionViolation("busy", int(rows[i]), int(k) + 1))
            if first_only:
                return out
    out.sort(key=lambda v: (v.slot, v.device, v.kind))
    return out
