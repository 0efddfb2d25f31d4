"""Bayesian linear-Gaussian regression: closed-form information quantities.

``Y_x = theta^T x + eps`` with ``theta ~ N(mu, Sigma)`` and ``eps ~ N(0, sigma^2)``
independent. Differential entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BayesianLinearGaussian:
    mean: np.ndarray
    cov: np.ndarray
    noise_var: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("cov must be d x d with d = len(mean)")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise ValueError("cov must be symmetric")
        np.linalg.cholesky(cov)  # raises LinAlgError unless positive definite
        if not self.noise_var > 0:
            raise ValueError("noise variance must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @classmethod
    def isotropic(cls, d: int, prior_var: float = 1.0, noise_var: float = 1.0):
        return cls(np.zeros(d), prior_var * np.eye(d), noise_var)

    def quad(self, x, v=None) -> float:
        """``x^T Sigma v`` (``v`` defaults to ``x``)."""
        x = np.asarray(x, dtype=np.float64)
        v = x if v is None else np.asarray(v, dtype=np.float64)
        return float(x @ self.cov @ v)

    def label_var(self, x) -> float:
        return self.quad(x) + self.noise_var


def mi_label_theta(model: BayesianLinearGaussian, x) -> float:
    """``I(Y_x; theta) = 1/2 log(x^T Sigma x + sigma^2) - 1/2 log sigma^2``."""
    return 0.5 * float(np.log1p(model.quad(x) / model.noise_var))


def correlation(model: BayesianLinearGaussian, x, v) -> float:
    """Correlation between the labels at ``x`` and ``v``."""
    return model.quad(x, v) / np.sqrt(model.label_var(x) * model.label_var(v))


def mi_labels(model: BayesianLinearGaussian, x, v) -> float:
    """``I(Y_x; Y_v) = -1/2 log(1 - r^2)`` for jointly Gaussian labels."""
    r = correlation(model, x, v)
    if abs(r) >= 1.0:
        return np.inf
    return -0.5 * float(np.log1p(-r * r))


def bound_constant(model: BayesianLinearGaussian, val_points) -> float:
    """Uniform bound on the mean label MI: ``E_v[v^T Sigma v] / (2 sigma^2)``."""
    V = np.atleast_2d(np.asarray(val_points, dtype=np.float64))
    if V.shape[0] < 1:
        raise ValueError("need at least one validation point")
    quad = np.einsum("nd,de,ne->n", V, model.cov, V)
    return float(quad.mean() / (2.0 * model.noise_var))


def decomposition(model: BayesianLinearGaussian, x, val_points) -> tuple[float, float, float]:
    """``(I(Y_x; theta), mean_v I(Y_x; Y_v), mean_v I(Y_x; theta | Y_v))``.

    The residual is the difference of the first two, which is the chain-rule
    identity for labels that are conditionally independent given ``theta``.
    """
    V = np.atleast_2d(np.asarray(val_points, dtype=np.float64))
    total = mi_label_theta(model, x)
    relevant = float(np.mean([mi_labels(model, x, v) for v in V]))
    return total, relevant, total - relevant


def cmi_label_theta_given(model: BayesianLinearGaussian, x, v) -> float:
    """``I(Y_x; theta | Y_v)`` via the posterior covariance after observing ``Y_v``."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    sv = model.cov @ v
    post_cov = model.cov - np.outer(sv, sv) / model.label_var(v)
    return 0.5 * float(np.log1p((x @ post_cov @ x) / model.noise_var))
