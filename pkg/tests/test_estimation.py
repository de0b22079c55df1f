import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cglscm import (CausalDiagram, CglScm, FitConfig, FitDivergence, build_masks, e_step,
                    fit, fit_edges, init_params, joint_ux_dist, m_objective,
                    m_step_gradients, observational_dist, recover_edges, sample, update_mu)
from cglscm.benchmarks import FRONTDOOR_GRAPH, frontdoor, napkin
from cglscm.estimation import Posterior, observed_loglik
from cglscm.model import implied_moments

from conftest import central_difference, mc_draw, random_diagram, random_model


def condition_joint(m, x):
    """Generic Gaussian conditioning of U on X = x (Schur complement)."""
    j = joint_ux_dist(m)
    k = m.diagram.n_confounders
    S_ux, S_xx = j.cov[:k, k:], j.cov[k:, k:]
    mean = S_ux @ np.linalg.solve(S_xx, x - j.mean[k:])
    cov = j.cov[:k, :k] - S_ux @ np.linalg.solve(S_xx, S_ux.T)
    return mean, cov


def random_point(rng, max_nodes=5, n=30):
    """Random (graph, B on its mask, C, mu, data, posterior)."""
    m = random_model(rng, max_nodes=max_nodes, max_confounders=2)
    g = m.diagram
    masks = build_masks(g)
    B = np.eye(g.n_nodes) + rng.uniform(-1, 1, masks.b_mask.shape) * masks.b_mask
    X, _ = mc_draw(m, n, seed=int(rng.integers(2**31)))
    post = e_step(B, m.C, m.mu, X)
    return g, B, m.C, m.mu, X, post


# -- initialization ---------------------------------------------------------

def test_init_zero_scale():
    X = sample(frontdoor(), 100, 0).values
    B, C, mu = init_params(FRONTDOOR_GRAPH, X, FitConfig(init_scale=0))
    np.testing.assert_array_equal(B, np.eye(3))
    assert not C.any()
    np.testing.assert_array_equal(mu, X.mean(0))


def test_init_support_and_determinism():
    X = sample(frontdoor(), 100, 0).values
    cfg = FitConfig(seed=5, init_scale=0.3)
    B, C, _ = init_params(FRONTDOOR_GRAPH, X, cfg)
    masks = build_masks(FRONTDOOR_GRAPH)
    assert np.all((B - np.eye(3) != 0) == (masks.b_mask > 0))
    assert np.all((C != 0) == (masks.c_mask > 0))
    assert np.abs(B - np.eye(3)).max() <= 0.3
    B2, C2, _ = init_params(FRONTDOOR_GRAPH, X, cfg)
    np.testing.assert_array_equal(B, B2)
    np.testing.assert_array_equal(C, C2)


# -- E-step -----------------------------------------------------------------

def test_e_step_centered_observation():
    m = frontdoor()
    post = e_step(m.B, m.C, m.mu, [observational_dist(m).mean])
    np.testing.assert_allclose(post.mean, 0, atol=1e-15)


def test_e_step_without_confounding():
    m = frontdoor()
    X = sample(m, 10, 1).values
    post = e_step(m.B, np.zeros_like(m.C), m.mu, X)
    assert not post.mean.any()
    np.testing.assert_array_equal(post.cov, np.eye(1))


def test_e_step_frontdoor_against_conditioning():
    m = frontdoor()
    post = e_step(m.B, m.C, m.mu, [[1.0, 1.0, 1.0]])
    mean, cov = condition_joint(m, np.ones(3))
    np.testing.assert_allclose(post.mean[0], mean, atol=1e-10)
    np.testing.assert_allclose(post.cov, cov, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_e_step_equals_generic_conditioning(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, max_confounders=3)
    X = rng.normal(size=(5, m.diagram.n_nodes))
    post = e_step(m.B, m.C, m.mu, X)
    for i, x in enumerate(X):
        mean, cov = condition_joint(m, x)
        np.testing.assert_allclose(post.mean[i], mean, atol=1e-10)
        np.testing.assert_allclose(post.cov, cov, atol=1e-10)
    np.testing.assert_allclose(post.cov, post.cov.T, atol=1e-15)
    assert np.linalg.eigvalsh(np.eye(len(post.cov)) - post.cov).min(initial=0) >= -1e-12


# -- M-step objective -------------------------------------------------------

def test_objective_has_no_logdet_contribution_on_a_dag():
    m = napkin()
    X = sample(m, 50, 2).values
    post = e_step(m.B, m.C, m.mu, X)
    assert np.linalg.det(m.B.T @ m.B) == pytest.approx(1.0, abs=1e-14)
    E = np.linalg.solve(m.B.T, X.T).T - m.mu - post.mean @ m.C
    quad = np.sum(E * E) + 50 * np.trace(post.cov @ m.C @ m.C.T)
    assert m_objective(m.B, m.C, m.mu, X, post) == pytest.approx(-quad, rel=1e-13)


def test_objective_collapses_without_structure():
    X = sample(frontdoor(), 40, 3).values
    C = np.zeros((1, 3))
    post = e_step(np.eye(3), C, X.mean(0), X)
    val = m_objective(np.eye(3), C, X.mean(0), X, post)
    assert val == pytest.approx(-np.sum((X - X.mean(0)) ** 2), rel=1e-13)


def test_objective_against_posterior_sampling():
    rng = np.random.default_rng(7)
    m = napkin()
    X = sample(m, 20, 4).values
    B = m.B + 0.1 * build_masks(m.diagram).b_mask
    C, mu = m.C * 1.3, m.mu + 0.2
    post = e_step(m.B, m.C, m.mu, X)
    P = np.linalg.inv(B.T @ B)
    L = np.linalg.cholesky(post.cov)
    draws = 100_000
    totals = np.zeros(draws)
    for i, x in enumerate(X):
        U = post.mean[i] + rng.standard_normal((draws, 2)) @ L.T
        R = x - B.T @ mu - U @ (C @ B)
        totals += np.einsum("si,ij,sj->s", R, P, R)
    n = len(X)
    est = -n * np.log(np.linalg.det(B.T @ B)) - totals
    value = m_objective(B, C, mu, X, post)
    assert abs(est.mean() - value) < 3 * est.std(ddof=1) / np.sqrt(draws)


# -- gradients ----------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradients_match_finite_differences(seed):
    g, B, C, mu, X, post = random_point(np.random.default_rng(seed))
    gB, gC = m_step_gradients(B, C, mu, X, post)
    fB = central_difference(lambda b: m_objective(b, C, mu, X, post), B)
    assert np.linalg.norm(gB - fB) <= 1e-5 * np.linalg.norm(fB)
    if C.size:
        fC = central_difference(lambda c: m_objective(B, c, mu, X, post), C)
        assert np.linalg.norm(gC - fC) <= 1e-5 * max(np.linalg.norm(fC), 1e-8)


def test_frontdoor_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    m = frontdoor()
    X = sample(m, 200, 5).values
    masks = build_masks(m.diagram)
    B = np.eye(3) + rng.uniform(-1, 1, (3, 3)) * masks.b_mask
    C = rng.uniform(-1, 1, (1, 3)) * masks.c_mask
    mu = rng.normal(size=3)
    post = e_step(B, C, mu, X)
    gB, gC = m_step_gradients(B, C, mu, X, post)
    fB = central_difference(lambda b: m_objective(b, C, mu, X, post), B)
    fC = central_difference(lambda c: m_objective(B, c, mu, X, post), C)
    assert np.linalg.norm(gB - fB) < 1e-5 * np.linalg.norm(fB)
    assert np.linalg.norm(gC - fC) < 1e-5 * np.linalg.norm(fC)


def test_C_gradient_vanishes_at_grid_optimum():
    m = frontdoor()
    X = sample(m, 300, 6).values
    post = e_step(m.B, m.C, m.mu, X)
    f = lambda a, b: m_objective(m.B, np.array([[a, 0.0, b]]), m.mu, X, post)
    center, width = np.zeros(2), 2.0
    while width > 1e-8:
        grid = np.linspace(-width, width, 11)
        vals = [(f(center[0] + a, center[1] + b), a, b) for a in grid for b in grid]
        _, a, b = max(vals)
        center += (a, b)
        width /= 4
    C = np.array([[center[0], 0.0, center[1]]])
    _, gC = m_step_gradients(m.B, C, m.mu, X, post)
    assert np.abs(gC * build_masks(m.diagram).c_mask).max() / len(X) < 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_score_at_truth_shrinks_with_n(seed):
    # at the generating parameters the expected complete-data score is zero;
    # 10 seeds at N = 1e5 stay below 10 / sqrt(N)
    m = frontdoor()
    X = sample(m, 100_000, 100 + seed).values
    post = e_step(m.B, m.C, m.mu, X)
    gB, gC = m_step_gradients(m.B, m.C, m.mu, X, post)
    masks = build_masks(m.diagram)
    bound = 10 / np.sqrt(len(X))
    assert np.abs(gB * masks.b_mask).max() / len(X) < bound
    assert np.abs(gC * masks.c_mask).max() / len(X) < bound


def test_C_gradient_is_zero_for_unconfounded_truth():
    m = frontdoor().replace(C=np.zeros((1, 3)))
    X = sample(m, 50_000, 12).values
    post = e_step(m.B, m.C, m.mu, X)
    _, gC = m_step_gradients(m.B, m.C, m.mu, X, post)
    assert np.abs(gC).max() / len(X) < 1e-12


# -- mu update --------------------------------------------------------------

def test_update_mu_trivial_cases():
    X = sample(napkin(), 30, 8).values
    C = np.zeros((2, 4))
    post = e_step(np.eye(4), C, np.zeros(4), X)
    np.testing.assert_allclose(update_mu(np.eye(4), C, X, post), X.mean(0), atol=1e-14)
    m = napkin()
    zero = Posterior(np.zeros((30, 2)), np.eye(2))
    np.testing.assert_allclose(update_mu(m.B, m.C, X, zero),
                               np.linalg.solve(m.B.T, X.T).mean(1), atol=1e-14)


def test_update_mu_consistent_at_scale():
    m = frontdoor()
    X = sample(m, 10**6, 9).values
    post = e_step(m.B, m.C, m.mu, X)
    np.testing.assert_allclose(update_mu(m.B, m.C, X, post), [0.3, 0.1, 0.2], atol=0.02)


def test_update_mu_maximizes_objective():
    m = napkin()
    X = sample(m, 100, 10).values
    post = e_step(m.B, m.C, m.mu, X)
    mu = update_mu(m.B, m.C, X, post)
    best = m_objective(m.B, m.C, mu, X, post)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert m_objective(m.B, m.C, mu + 0.01 * rng.normal(size=4), X, post) < best


# -- full fits ----------------------------------------------------------------

def _check_masks(g, res):
    masks = build_masks(g)
    n = g.n_nodes
    np.testing.assert_array_equal(np.diag(res.B_hat), 1.0)
    assert not np.any(res.B_hat * (1 - masks.b_mask - np.eye(n)))
    assert not np.any(res.C_hat * (1 - masks.c_mask))


def _assert_monotone(trace):
    trace = np.asarray(trace)
    slack = 1e-6 * np.abs(trace[1:])
    assert np.all(np.diff(trace) >= -slack)


def test_fit_without_structure():
    m = CglScm(FRONTDOOR_GRAPH, np.zeros((3, 3)), np.zeros((1, 3)), [0.3, 0.1, 0.2])
    X = sample(m, 10_000, 13).values
    res = fit(FRONTDOOR_GRAPH, X, FitConfig(seed=1))
    np.testing.assert_allclose(res.B_hat, np.eye(3), atol=0.05)
    assert np.abs(res.C_hat).max() < 0.2
    np.testing.assert_allclose(res.B_hat.T @ res.mu_hat, X.mean(0), atol=1e-3)
    _assert_monotone(res.loglik_trace)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_masks_hold_after_every_iteration(k):
    g = napkin().diagram
    X = sample(napkin(), 2000, 14).values
    res = fit(g, X, FitConfig(max_em_iters=k, seed=3, init_scale=0.5))
    assert res.iterations == k
    _check_masks(g, res)


@pytest.mark.parametrize("make", [frontdoor, napkin])
@pytest.mark.parametrize("seed", [0, 1])
def test_fit_recovers_observational_distribution(make, seed):
    m = make()
    X = sample(m, 10_000, seed).values
    res = fit(m.diagram, X, FitConfig(seed=seed))
    _check_masks(m.diagram, res)
    _assert_monotone(res.loglik_trace)
    assert res.converged
    truth = observational_dist(m)
    mean, cov = implied_moments(res.B_hat, res.C_hat, res.mu_hat)
    assert np.abs(mean - truth.mean).max() < 0.05
    assert np.linalg.norm(cov - truth.cov) / np.linalg.norm(truth.cov) < 0.05


def test_fit_is_deterministic():
    X = sample(frontdoor(), 3000, 15).values
    a = fit(FRONTDOOR_GRAPH, X, FitConfig(seed=4))
    b = fit(FRONTDOOR_GRAPH, X, FitConfig(seed=4))
    assert a.B_hat.tobytes() == b.B_hat.tobytes() and a.loglik_trace == b.loglik_trace


def test_fitted_signs_are_canonical():
    X = sample(napkin(), 3000, 16).values
    res = fit(napkin().diagram, X, FitConfig(seed=2))
    for row in res.C_hat:
        assert row[np.flatnonzero(row)[0]] >= 0


def test_fit_edges_stays_on_the_consistent_manifold():
    m = napkin()
    X = sample(m, 10_000, 17).values
    res = fit_edges(m.diagram, X, FitConfig(seed=0))
    _assert_monotone(res.loglik_trace)
    assert recover_edges(m.diagram, res.B_hat).reconstruction_residual < 1e-12
    mean, cov = implied_moments(res.B_hat, res.C_hat, res.mu_hat)
    truth = observational_dist(m)
    assert np.linalg.norm(cov - truth.cov) / np.linalg.norm(truth.cov) < 0.05


def test_runaway_step_size_is_reported():
    X = sample(frontdoor(), 1000, 18).values
    with pytest.raises(FitDivergence, match="eta") as info:
        fit(FRONTDOOR_GRAPH, X, FitConfig(eta=1e9))
    assert isinstance(info.value.trace, list) and len(info.value.trace) >= 1


def test_large_step_is_halved_not_fatal():
    X = sample(frontdoor(), 1000, 18).values
    res = fit(FRONTDOOR_GRAPH, X, FitConfig(eta=20.0, seed=1))
    assert res.eta < 20.0
    _assert_monotone(res.loglik_trace)


def test_config_validation():
    with pytest.raises(ValueError):
        FitConfig(eta=0)
    with pytest.raises(ValueError):
        FitConfig(max_em_iters=0)


def test_data_shape_mismatch():
    with pytest.raises(ValueError, match="expected"):
        fit(FRONTDOOR_GRAPH, np.zeros((10, 4)))
