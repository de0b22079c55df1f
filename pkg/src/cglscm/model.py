"""GL-SCM and CGL-SCM parameterizations and their exact Gaussian moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .graph import CausalDiagram, build_masks

__all__ = ["NumericalError", "ParameterError", "GaussianDist", "CglScm", "GlScm",
           "build_B", "gl_to_cgl", "observational_dist", "joint_ux_dist",
           "log_likelihood", "gaussian_loglik", "implied_moments"]

JITTER = 1e-9
_LOG_2PI = np.log(2 * np.pi)


class NumericalError(ArithmeticError):
    """A covariance or linear system that cannot be factorized."""


class ParameterError(ValueError):
    """Model parameters violate the diagram's support or positivity constraints."""


@dataclass(frozen=True)
class GaussianDist:
    mean: np.ndarray
    cov: np.ndarray

    def marginal(self, idx):
        idx = np.atleast_1d(idx)
        return GaussianDist(self.mean[idx], self.cov[np.ix_(idx, idx)])


def _check_support(name, value, mask):
    off = np.abs(value) * (1 - mask)
    if np.any(off > 0):
        i, j = np.argwhere(off > 0)[0]
        raise ParameterError(f"{name}[{i},{j}] = {value[i, j]!r} lies outside the diagram")


@dataclass(frozen=True, eq=False)
class CglScm:
    """Centralized model: ``U ~ N(0, I)``, ``eps ~ N(0, diag(psi2))``.

    ``T[i, j]`` is the weight of edge ``X_i -> X_j`` and ``C[k, j]`` the loading
    of confounder ``U_k`` on ``X_j``; both are dense arrays bound to the
    diagram's node order.
    """

    diagram: CausalDiagram
    T: np.ndarray
    C: np.ndarray
    mu: np.ndarray
    psi2: np.ndarray | None = None

    def __post_init__(self):
        n, k = self.diagram.n_nodes, self.diagram.n_confounders
        T = np.array(self.T, dtype=float).reshape(n, n)
        C = np.array(self.C, dtype=float).reshape(k, n)
        mu = np.array(self.mu, dtype=float).reshape(n)
        psi2 = np.ones(n) if self.psi2 is None else np.array(self.psi2, dtype=float).reshape(n)
        masks = build_masks(self.diagram)
        _check_support("T", T, masks.t_mask)
        _check_support("C", C, masks.c_mask)
        if np.any(psi2 <= 0):
            raise ParameterError("noise variances must be strictly positive")
        for name, arr in (("T", T), ("C", C), ("mu", mu), ("psi2", psi2)):
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def B(self) -> np.ndarray:
        return build_B(self.T, build_masks(self.diagram).d)

    def replace(self, **changes) -> "CglScm":
        kw = dict(diagram=self.diagram, T=self.T, C=self.C, mu=self.mu, psi2=self.psi2)
        kw.update(changes)
        return CglScm(**kw)


@dataclass(frozen=True, eq=False)
class GlScm:
    """General model with free confounder means/variances and noise means.

    ``Cprime`` holds the loadings of the non-standardized confounders
    ``U'_k ~ N(mu_u[k], sigma2_u[k])``; ``mu_eps`` are the noise means.
    """

    diagram: CausalDiagram
    T: np.ndarray
    Cprime: np.ndarray
    mu_u: np.ndarray
    sigma2_u: np.ndarray
    mu_bias: np.ndarray
    mu_eps: np.ndarray
    psi2: np.ndarray

    def __post_init__(self):
        n, k = self.diagram.n_nodes, self.diagram.n_confounders
        shapes = dict(T=(n, n), Cprime=(k, n), mu_u=(k,), sigma2_u=(k,),
                      mu_bias=(n,), mu_eps=(n,), psi2=(n,))
        for name, shape in shapes.items():
            object.__setattr__(self, name,
                               np.array(getattr(self, name), dtype=float).reshape(shape))
        masks = build_masks(self.diagram)
        _check_support("T", self.T, masks.t_mask)
        _check_support("Cprime", self.Cprime, masks.c_mask)
        if np.any(self.psi2 <= 0):
            raise ParameterError("noise variances must be strictly positive")
        if np.any(self.sigma2_u <= 0):
            raise ParameterError("confounder variances must be strictly positive")


def build_B(T, d: int) -> np.ndarray:
    """Total-effect matrix ``I + T + T^2 + ... + T^d``."""
    T = np.asarray(T, dtype=float)
    B = np.eye(T.shape[0])
    power = np.eye(T.shape[0])
    for _ in range(d):
        power = power @ T
        B = B + power
    return B


def gl_to_cgl(m: GlScm) -> CglScm:
    """Standardize the confounders of a GL-SCM without changing P(X).

    Writing ``U' = mu_u + sigma * Z`` with ``Z ~ N(0, 1)`` rescales each
    loading by the standard deviation ``sigma`` and folds every mean into
    the node bias.
    """
    if np.any(np.asarray(m.sigma2_u) <= 0):
        raise ParameterError("confounder variances must be strictly positive")
    sd = np.sqrt(m.sigma2_u)
    C = m.Cprime * sd[:, None]
    mu = m.Cprime.T @ m.mu_u + m.mu_bias + m.mu_eps
    return CglScm(m.diagram, m.T, C, mu, m.psi2)


def implied_moments(B, C, mu, psi2=None):
    """Mean ``B^T mu`` and covariance ``(CB)^T CB + B^T diag(psi2) B``."""
    CB = C @ B
    if psi2 is None:
        noise = B.T @ B
    else:
        noise = B.T @ (np.asarray(psi2)[:, None] * B)
    cov = CB.T @ CB + noise
    return B.T @ mu, 0.5 * (cov + cov.T)


def observational_dist(m: CglScm) -> GaussianDist:
    mean, cov = implied_moments(m.B, m.C, m.mu, m.psi2)
    return GaussianDist(mean, cov)


def joint_ux_dist(m: CglScm) -> GaussianDist:
    """Joint Gaussian over the stacked vector ``(U, X)``."""
    k = m.diagram.n_confounders
    obs = observational_dist(m)
    CB = m.C @ m.B
    cov = np.block([[np.eye(k), CB], [CB.T, obs.cov]])
    return GaussianDist(np.concatenate([np.zeros(k), obs.mean]), cov)


def cholesky(cov):
    """Lower Cholesky factor, retrying once with ``JITTER * I`` added."""
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        pass
    try:
        return linalg.cholesky(cov + JITTER * np.eye(cov.shape[0]), lower=True)
    except linalg.LinAlgError:
        cond = np.linalg.cond(cov)
        raise NumericalError(
            f"covariance is not positive definite (condition number {cond:.3g})") from None


def gaussian_loglik(X, mean, cov) -> float:
    """Sum of multivariate normal log-densities of the rows of ``X``."""
    X = np.atleast_2d(X)
    L = cholesky(cov)
    z = linalg.solve_triangular(L, (X - mean).T, lower=True)
    n, p = X.shape
    logdet = 2 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * (n * (p * _LOG_2PI + logdet) + np.sum(z * z)))


def log_likelihood(m: CglScm, data) -> float:
    X = getattr(data, "values", data)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.diagram.n_nodes:
        raise ValueError(f"data has shape {X.shape}; expected (N, {m.diagram.n_nodes})")
    d = observational_dist(m)
    return gaussian_loglik(X, d.mean, d.cov)
