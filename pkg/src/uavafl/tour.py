"""Closed-tour heuristics over planar points (nearest neighbour + 2-opt)."""

from __future__ import annotations

import itertools

import numpy as np


def tour_length(points: np.ndarray, order) -> float:
    p = np.asarray(points, float)[list(order)]
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def nearest_neighbour_tour(points: np.ndarray, start: int = 0) -> list[int]:
    """Closed tour from ``start``, returned as [start, ..., start]."""
    points = np.asarray(points, float)
    left = set(range(len(points))) - {start}
    tour = [start]
    while left:
        last = points[tour[-1]]
        nxt = min(left, key=lambda j: (float(np.linalg.norm(points[j] - last)), j))
        tour.append(nxt)
        left.remove(nxt)
    return tour + [start]


def two_opt(points: np.ndarray, tour: list[int]) -> list[int]:
    """Reverse segments of a closed tour while that shortens it."""
    points = np.asarray(points, float)
    tour = list(tour)

    def d(i, j):
        return float(np.linalg.norm(points[i] - points[j]))

    improved = True
    while improved:
        improved = False
        for i in range(1, len(tour) - 2):
            for j in range(i + 1, len(tour) - 1):
                a, b, c, e = tour[i - 1], tour[i], tour[j], tour[j + 1]
                if d(a, c) + d(b, e) < d(a, b) + d(c, e) - 1e-9:
                    tour[i:j + 1] = tour[i:j + 1][::-1]
                    improved = True
    return tour


def short_tour(points: np.ndarray, start: int = 0) -> list[int]:
    return two_opt(points, nearest_neighbour_tour(points, start))


def exact_tour_length(points: np.ndarray) -> float:
    """Optimal closed tour length through ``points`` by enumeration (small inputs)."""
    best = np.inf
    for perm in itertools.permutations(range(1, len(points))):
        best = min(best, tour_length(points, (0, *perm, 0)))
    return best
