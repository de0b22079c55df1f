"""EM estimation of CGL-SCM parameters with masked gradient-ascent M-steps.

The model is ``X = B^T mu + B^T C^T U + B^T eps`` with ``U ~ N(0, I)`` and
``eps ~ N(0, I)``. ``B`` carries a unit diagonal and is free on the
reachability mask; ``C`` is free on the confounder mask.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .graph import CausalDiagram, build_masks
from .model import NumericalError, build_B, cholesky, gaussian_loglik, implied_moments

__all__ = ["FitConfig", "Posterior", "FitResult", "FitDivergence", "init_params",
           "e_step", "m_objective", "m_step_gradients", "update_mu",
           "observed_loglik", "fit", "fit_edges", "fitted_model"]

log = logging.getLogger(__name__)

MAX_HALVINGS = 10


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    ``eta`` multiplies the per-sample average gradient of the M-step
    objective, so its scale does not depend on the number of rows.
    ``em_tol`` is relative: the outer loop stops once the observed-data
    log-likelihood changes by less than ``em_tol * |loglik|``.
    """

    eta: float = 0.1
    max_em_iters: int = 2000
    max_inner_iters: int = 200
    em_tol: float = 1e-10
    inner_tol: float = 1e-6
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("eta", "em_tol", "inner_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.init_scale < 0:
            raise ValueError("init_scale must be non-negative")
        if self.max_em_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray   # N x |U|
    cov: np.ndarray    # |U| x |U|, shared by all rows


@dataclass
class FitResult:
    B_hat: np.ndarray
    C_hat: np.ndarray
    mu_hat: np.ndarray
    loglik_trace: list[float]
    converged: bool
    iterations: int
    grad_norm_B: list[float] = field(default_factory=list)
    grad_norm_C: list[float] = field(default_factory=list)
    eta: float = 0.0


class FitDivergence(NumericalError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


def _values(data):
    return np.asarray(getattr(data, "values", data), dtype=float)


def init_params(g: CausalDiagram, data, cfg: FitConfig):
    X = _values(data)
    masks = build_masks(g)
    rng = np.random.default_rng(cfg.seed)
    s = cfg.init_scale
    R = rng.uniform(-s, s, size=masks.b_mask.shape)
    S = rng.uniform(-s, s, size=masks.c_mask.shape)
    B = np.eye(g.n_nodes) + R * masks.b_mask
    C = S * masks.c_mask
    return B, C, X.mean(axis=0)


def e_step(B, C, mu, data) -> Posterior:
    X = _values(data)
    CB = C @ B
    _, sigma_xx = implied_moments(B, C, mu)
    L = cholesky(sigma_xx)
    # gain = CB Sigma_xx^{-1}, computed as a solve against the Cholesky factor
    gain = linalg.cho_solve((L, True), CB.T).T
    mean = (X - B.T @ mu) @ gain.T
    cov = np.eye(C.shape[0]) - gain @ CB.T
    return Posterior(mean, 0.5 * (cov + cov.T))


def _whiten(B, X):
    # rows z_i = B^{-T} x_i
    try:
        return linalg.solve(B.T, X.T).T
    except linalg.LinAlgError:
        raise NumericalError("B is singular") from None


def _inv(B):
    try:
        return linalg.inv(B)
    except linalg.LinAlgError:
        raise NumericalError("B is singular") from None


def _logdet_btb(B):
    sign, logabs = np.linalg.slogdet(B)
    if sign == 0 or not np.isfinite(logabs):
        raise NumericalError("B^T B is singular")
    return 2.0 * logabs


@dataclass(frozen=True)
class _Stats:
    """Sufficient statistics of the data and one E-step posterior."""

    n: int
    Sxx: np.ndarray
    sx: np.ndarray
    Sxm: np.ndarray
    sm: np.ndarray
    Smm: np.ndarray
    cov: np.ndarray

    @classmethod
    def of(cls, X, post):
        M = post.mean
        return cls(X.shape[0], X.T @ X, X.sum(axis=0), X.T @ M, M.sum(axis=0),
                   M.T @ M, post.cov)


def _objective(B, C, mu, st: _Stats) -> float:
    V = _inv(B)
    VtSxm = V.T @ st.Sxm
    quad = (np.sum(V * (st.Sxx @ V)) - 2 * mu @ (V.T @ st.sx)
            - 2 * np.sum(VtSxm * C.T) + st.n * mu @ mu + 2 * mu @ (C.T @ st.sm)
            + np.sum(C * (st.Smm @ C)) + st.n * np.sum(C * (st.cov @ C)))
    return float(-st.n * _logdet_btb(B) - quad)


def _gradients(B, C, mu, st: _Stats):
    V = _inv(B)
    # Z^T E and M^T E with Z = X B^{-1}, E = Z - mu - M C
    ZtE = V.T @ st.Sxx @ V - np.outer(V.T @ st.sx, mu) - V.T @ st.Sxm @ C
    MtE = st.Sxm.T @ V - np.outer(st.sm, mu) - st.Smm @ C
    grad_B = 2.0 * ZtE @ V.T - 2.0 * st.n * V.T
    grad_C = 2.0 * (MtE - st.n * st.cov @ C)
    return grad_B, grad_C


def _update_mu(B, C, st: _Stats):
    return (_inv(B).T @ st.sx - C.T @ st.sm) / st.n


def m_objective(B, C, mu, data, post: Posterior) -> float:
    """Expected complete-data objective.

    ``-n log|B^T B| - sum_i E[(x_i - B^T mu - B^T C^T U)^T (B^T B)^{-1} (...)]``
    with the expectation under the posterior of ``U``.
    """
    X = _values(data)
    n = X.shape[0]
    E = _whiten(B, X) - mu - post.mean @ C
    quad = np.sum(E * E) + n * np.trace(post.cov @ C @ C.T)
    return float(-n * _logdet_btb(B) - quad)


def m_step_gradients(B, C, mu, data, post: Posterior):
    """Unmasked gradients of :func:`m_objective` with respect to ``B`` and ``C``."""
    return _gradients(B, C, mu, _Stats.of(_values(data), post))


def update_mu(B, C, data, post: Posterior) -> np.ndarray:
    Z = _whiten(B, _values(data))
    return np.mean(Z - post.mean @ C, axis=0)


def observed_loglik(B, C, mu, data) -> float:
    mean, cov = implied_moments(B, C, mu)
    return gaussian_loglik(_values(data), mean, cov)


def _canonical_signs(C):
    C = C.copy()
    for row in C:
        nz = np.flatnonzero(row)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return C


class _Ascent:
    """Masked constant-step gradient ascent with halving on a failed step."""

    def __init__(self, eta):
        self.eta = eta
        self.halvings = 0

    def run(self, params, objective, gradient, mask, n, cfg):
        value = objective(params)
        gnorm = np.inf
        for _ in range(cfg.max_inner_iters):
            g = gradient(params) * mask / n
            gnorm = float(np.linalg.norm(g))
            if gnorm < cfg.inner_tol:
                break
            while True:
                trial = params + self.eta * g
                try:
                    new_value = objective(trial)
                except NumericalError:
                    new_value = -np.inf
                if np.isfinite(new_value) and new_value >= value - 1e-12 * abs(value):
                    break
                if self.halvings >= MAX_HALVINGS:
                    raise NumericalError(
                        f"M-step cannot make progress after {MAX_HALVINGS} step halvings "
                        f"(eta now {self.eta:.3g}); try a smaller --eta")
                self.eta /= 2
                self.halvings += 1
                log.info("M-step overshoot; halving eta to %g", self.eta)
            if new_value <= value:
                break
            params, value = trial, new_value
        return params, gnorm


def _check(g, data):
    X = _values(data)
    if X.ndim != 2 or X.shape[1] != g.n_nodes:
        raise ValueError(f"data has shape {X.shape}; expected (N, {g.n_nodes})")
    return X


def _em(X, B_of, theta, C, mu, theta_grad, theta_mask, c_mask, cfg):
    """Generalized EM shared by the free-B and edge-weight parameterizations.

    ``B_of(theta)`` maps the structural parameters to ``B`` and
    ``theta_grad(theta, grad_B)`` pulls a ``B`` gradient back to ``theta``.
    """
    n = X.shape[0]
    trace = [observed_loglik(B_of(theta), C, mu, X)]
    gB_trace, gC_trace = [], []
    ascent = _Ascent(cfg.eta)
    converged = False
    it = 0
    for it in range(1, cfg.max_em_iters + 1):
        try:
            B = B_of(theta)
            st = _Stats.of(X, e_step(B, C, mu, X))
            theta, gB = ascent.run(
                theta, lambda t: _objective(B_of(t), C, mu, st),
                lambda t: theta_grad(t, _gradients(B_of(t), C, mu, st)[0]),
                theta_mask, n, cfg)
            B = B_of(theta)
            C, gC = ascent.run(
                C, lambda c: _objective(B, c, mu, st),
                lambda c: _gradients(B, c, mu, st)[1],
                c_mask, n, cfg)
            mu = _update_mu(B, C, st)
            ll = observed_loglik(B, C, mu, X)
        except NumericalError as exc:
            raise FitDivergence(f"EM iteration {it}: {exc}", trace) from exc
        if not np.isfinite(ll):
            raise FitDivergence(
                f"EM iteration {it}: non-finite log-likelihood; try a smaller --eta", trace)
        gB_trace.append(gB)
        gC_trace.append(gC)
        prev = trace[-1]
        trace.append(ll)
        log.debug("EM iteration %d: loglik %.10g", it, ll)
        if abs(ll - prev) < cfg.em_tol * abs(ll):
            converged = True
            break
    return theta, C, mu, FitResult(
        B_hat=B_of(theta), C_hat=_canonical_signs(C), mu_hat=mu, loglik_trace=trace,
        converged=converged, iterations=it, grad_norm_B=gB_trace, grad_norm_C=gC_trace,
        eta=ascent.eta)


def fit(g: CausalDiagram, data, cfg: FitConfig | None = None) -> FitResult:
    """EM with ``B`` free on the reachability mask (unit diagonal kept fixed)."""
    cfg = cfg or FitConfig()
    X = _check(g, data)
    masks = build_masks(g)
    B, C, mu = init_params(g, X, cfg)
    return _em(X, lambda b: b, B, C, mu, lambda b, grad: grad,
               masks.b_mask, masks.c_mask, cfg)[3]


def fit_edges(g: CausalDiagram, data, cfg: FitConfig | None = None, start=None) -> FitResult:
    """EM over direct edge weights, with ``B = I + T + ... + T^d`` tied to ``T``.

    Every iterate is consistent with some edge weighting of ``g``, which
    removes the flat likelihood directions that a free ``B`` can have.
    ``start`` is an optional ``(T, C, mu)`` warm start, typically the edges
    recovered from a :func:`fit` result; otherwise :func:`init_params` is used
    and ``T`` is read off the initial ``B``.
    """
    from .edge_recovery import recover_edges

    cfg = cfg or FitConfig()
    X = _check(g, data)
    masks = build_masks(g)
    if start is None:
        B, C, mu = init_params(g, X, cfg)
        T = recover_edges(g, B).T_hat
    else:
        T, C, mu = (np.array(a, dtype=float) for a in start)

    def B_of(t):
        return build_B(t, masks.d)

    def pull_back(t, grad_B):
        # dB = B dT B for B = (I - T)^{-1}
        B = B_of(t)
        return B.T @ grad_B @ B.T

    return _em(X, B_of, T, C, mu, pull_back, masks.t_mask, masks.c_mask, cfg)[3]


def fitted_model(g: CausalDiagram, result: FitResult):
    """CGL-SCM built from a fit: edge weights recovered from ``B_hat``, unit noise.

    Returns ``(model, report)`` where ``report`` carries the edge-recovery
    residual.
    """
    from .edge_recovery import recover_edges
    from .model import CglScm

    report = recover_edges(g, result.B_hat)
    return CglScm(g, report.T_hat, result.C_hat, result.mu_hat), report
