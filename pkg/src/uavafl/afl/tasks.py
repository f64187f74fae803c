"""Desk-scale learning tasks with per-device datasets.

Both tasks expose full-batch local losses/gradients, the global average and
its minimizer. The quadratic task has an exactly prescribed Hessian spectrum,
so its curvature constants are known in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from uavafl.errors import ConfigurationError
from uavafl.seeding import substream


class LearningTask:
    kind = "abstract"
    M: int
    D: int
    x0: np.ndarray
    x_star: np.ndarray
    F_star: float

    def local_loss(self, m: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def local_gradients(self, x: np.ndarray) -> np.ndarray:
        """All device gradients at ``x``, shape (M, D)."""
        raise NotImplementedError

    def local_gradient(self, m: int, x: np.ndarray) -> np.ndarray:
        return self.local_gradients(x)[m]

    def loss(self, x: np.ndarray) -> float:
        return float(np.mean([self.local_loss(m, x) for m in range(self.M)]))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.local_gradients(x).mean(axis=0)

    def gap(self, x: np.ndarray) -> float:
        return self.loss(x) - self.F_star

    def accuracy(self, x: np.ndarray) -> float:
        return float("nan")

    def curvature(self) -> tuple[float, float]:
        """(mu, L) of the global objective."""
        raise NotImplementedError


def _sym_sqrt(H: np.ndarray, inverse: bool = False) -> np.ndarray:
    w, U = np.linalg.eigh(H)
    w = np.clip(w, 0.0, None)
    s = 1.0 / np.sqrt(w) if inverse else np.sqrt(w)
    return (U * s) @ U.T


def _random_orthogonal(rng: np.random.Generator, D: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((D, D)))
    return Q * np.sign(np.diag(R))


@dataclass(eq=False)
class QuadraticTask(LearningTask):
    """f_m(x) = ||A_m x - b_m||^2 / (2 S_d) + rho/2 ||x||^2."""

    A: np.ndarray  # (M, S_d, D)
    b: np.ndarray  # (M, S_d)
    rho: float = 0.0
    x0: np.ndarray | None = None
    kind = "quadratic"

    def __post_init__(self):
        M, S_d, D = self.A.shape
        self.M, self.D, self.S_d = M, D, S_d
        self.H_m = np.einsum("msi,msj->mij", self.A, self.A) / S_d + self.rho * np.eye(D)
        self.c_m = np.einsum("msi,ms->mi", self.A, self.b) / S_d
        self.const_m = np.sum(self.b**2, axis=1) / (2.0 * S_d)
        self.H = self.H_m.mean(axis=0)
        self.c = self.c_m.mean(axis=0)
        self.x_star = np.linalg.solve(self.H, self.c)
        self.F_star = self.loss(self.x_star)
        if self.x0 is None:
            self.x0 = np.zeros(D)

    def local_loss(self, m: int, x: np.ndarray) -> float:
        x = np.asarray(x, float)
        return float(0.5 * x @ self.H_m[m] @ x - self.c_m[m] @ x + self.const_m[m])

    def local_gradients(self, x: np.ndarray) -> np.ndarray:
        return self.H_m @ np.asarray(x, float) - self.c_m

    def loss(self, x: np.ndarray) -> float:
        x = np.asarray(x, float)
        return float(0.5 * x @ self.H @ x - self.c @ x + self.const_m.mean())

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.H @ np.asarray(x, float) - self.c

    def curvature(self) -> tuple[float, float]:
        w = np.linalg.eigvalsh(self.H)
        return float(w[0]), float(w[-1])

    def local_minimizer(self, m: int) -> np.ndarray:
        return np.linalg.solve(self.H_m[m], self.c_m[m])


def make_quadratic_task(seed: int, M: int, D: int = 10, samples_per_device: int = 20,
                        mu: float = 0.2, L: float = 10.0, heterogeneity: float = 1.0,
                        noise: float = 0.1, shared: bool = False, rho: float = 0.0,
                        init_scale: float = 3.0) -> QuadraticTask:
    """Quadratic task whose average Hessian has eigenvalues exactly spanning [mu, L].

    Per-device optima differ by ``heterogeneity``; ``shared=True`` gives every
    device the same dataset (so all local objectives coincide).
    """
    if M < 1 or D < 2:
        raise ConfigurationError("need M >= 1 and D >= 2")
    if not (0 < mu <= L) or rho < 0 or rho > mu:
        raise ConfigurationError("need 0 <= rho <= mu <= L, mu > 0")
    if M * samples_per_device < D and not shared:
        raise ConfigurationError("too few samples for a full-rank design")
    rng = substream(seed, "task", "quadratic")
    spectrum = np.concatenate([[mu], np.sort(rng.uniform(mu, L, D - 2)), [L]]) if D > 2 else np.array([mu, L])
    U = _random_orthogonal(rng, D)
    H_target = (U * (spectrum - rho)) @ U.T
    n_sets = 1 if shared else M
    X = rng.standard_normal((n_sets, samples_per_device, D))
    H0 = np.einsum("msi,msj->ij", X, X) / (n_sets * samples_per_device)
    T = _sym_sqrt(H0, inverse=True) @ _sym_sqrt(H_target)
    A = X @ T
    centre = rng.standard_normal(D)
    x_true = centre + heterogeneity * rng.standard_normal((n_sets, D))
    b = np.einsum("msd,md->ms", A, x_true) + noise * rng.standard_normal((n_sets, samples_per_device))
    if shared:
        A = np.repeat(A, M, axis=0)
        b = np.repeat(b, M, axis=0)
    task = QuadraticTask(A=A, b=b, rho=rho)
    direction = rng.standard_normal(D)
    task.x0 = task.x_star + init_scale * direction / np.linalg.norm(direction)
    return task


@dataclass(eq=False)
class LogisticTask(LearningTask):
    """l2-regularized logistic regression, labels in {0, 1}; last feature is a bias."""

    X: np.ndarray  # (M, S_d, D)
    y: np.ndarray  # (M, S_d)
    X_test: np.ndarray
    y_test: np.ndarray
    rho: float = 0.01
    x0: np.ndarray | None = None
    kind = "logistic"

    def __post_init__(self):
        self.M, self.S_d, self.D = self.X.shape
        if self.x0 is None:
            self.x0 = np.zeros(self.D)
        Xa = self.X.reshape(-1, self.D)
        ya = self.y.reshape(-1)
        res = minimize(
            lambda x: self._loss_all(Xa, ya, x), self.x0, jac=lambda x: self._grad_all(Xa, ya, x),
            hess=lambda x: self._hess_all(Xa, ya, x), method="trust-exact",
            options={"gtol": 1e-12, "maxiter": 500},
        )
        self.x_star = res.x
        self.F_star = self.loss(self.x_star)

    def _loss_all(self, X, y, x):
        z = X @ x
        s = 2.0 * y - 1.0
        return float(-np.mean(log_expit(s * z)) + 0.5 * self.rho * x @ x)

    def _grad_all(self, X, y, x):
        return X.T @ (expit(X @ x) - y) / len(y) + self.rho * x

    def _hess_all(self, X, y, x):
        p = expit(X @ x)
        return (X.T * (p * (1 - p))) @ X / len(y) + self.rho * np.eye(self.D)

    def local_loss(self, m: int, x: np.ndarray) -> float:
        return self._loss_all(self.X[m], self.y[m], np.asarray(x, float))

    def local_gradients(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        r = expit(self.X @ x) - self.y
        return np.einsum("msd,ms->md", self.X, r) / self.S_d + self.rho * x

    def loss(self, x: np.ndarray) -> float:
        # equal local dataset sizes, so the global loss is the plain average
        return self._loss_all(self.X.reshape(-1, self.D), self.y.reshape(-1), np.asarray(x, float))

    def accuracy(self, x: np.ndarray) -> float:
        pred = (self.X_test @ np.asarray(x, float)) > 0.0
        return float(np.mean(pred == (self.y_test > 0.5)))

    def curvature(self) -> tuple[float, float]:
        Xa = self.X.reshape(-1, self.D)
        top = float(np.linalg.eigvalsh(Xa.T @ Xa / len(Xa))[-1])
        return self.rho, 0.25 * top + self.rho


def make_logistic_task(seed: int, M: int, D: int = 10, samples_per_device: int = 50,
                       test_size: int = 2000, separation: float = 1.0, rho: float = 0.01,
                       heterogeneity: float = 0.5) -> LogisticTask:
    """Two Gaussian classes; ``heterogeneity`` skews each device's class balance."""
    if D < 2 or D % 2:
        raise ConfigurationError("logistic task needs an even D >= 2 (bias included)")
    rng = substream(seed, "task", "logistic")
    direction = rng.standard_normal(D - 1)
    direction *= separation / np.linalg.norm(direction)

    def draw(n, p1):
        y = (rng.uniform(size=n) < p1).astype(float)
        feats = rng.standard_normal((n, D - 1)) + np.outer(2.0 * y - 1.0, direction)
        return np.hstack([feats, np.ones((n, 1))]), y

    X = np.empty((M, samples_per_device, D))
    y = np.empty((M, samples_per_device))
    for m in range(M):
        p1 = float(np.clip(0.5 + heterogeneity * rng.uniform(-0.5, 0.5), 0.05, 0.95))
        X[m], y[m] = draw(samples_per_device, p1)
    X_test, y_test = draw(test_size, 0.5)
    return LogisticTask(X=X, y=y, X_test=X_test, y_test=y_test, rho=rho)
