import itertools

import numpy as np
import pytest

from cglscm import CausalDiagram, CglScm, build_masks


def random_diagram(rng, max_nodes=8, edge_prob=0.4, max_confounders=3, min_nodes=2):
    """Random DAG over nodes in a shuffled (non-topological) listing order."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    rank = rng.permutation(n)
    nodes = [f"V{i}" for i in range(n)]
    edges = [(nodes[i], nodes[j]) for i, j in itertools.permutations(range(n), 2)
             if rank[i] < rank[j] and rng.random() < edge_prob]
    confounders = []
    for k in range(int(rng.integers(0, max_confounders + 1))):
        size = int(rng.integers(2, n + 1))
        kids = rng.choice(n, size=size, replace=False)
        confounders.append((f"U{k}", [nodes[i] for i in sorted(kids)]))
    return CausalDiagram(nodes, edges, confounders)


def random_model(rng, g=None, psi2=False, **kw):
    g = g or random_diagram(rng, **kw)
    masks = build_masks(g)
    T = rng.uniform(-1, 1, masks.t_mask.shape) * masks.t_mask
    C = rng.uniform(-1, 1, masks.c_mask.shape) * masks.c_mask
    mu = rng.normal(size=g.n_nodes)
    p = rng.uniform(0.5, 2, g.n_nodes) if psi2 else None
    return CglScm(g, T, C, mu, p)


def mc_draw(m, n, seed):
    """Draw from the structural equations node by node (independent of cglscm.sampler)."""
    rng = np.random.default_rng(seed)
    g = m.diagram
    U = rng.standard_normal((n, g.n_confounders))
    X = np.zeros((n, g.n_nodes))
    from cglscm.graph import topological_order
    for j in topological_order(g):
        X[:, j] = (m.mu[j] + X @ m.T[:, j] + U @ m.C[:, j]
                   + np.sqrt(m.psi2[j]) * rng.standard_normal(n))
    return X, U


def central_difference(f, x, h=1e-5):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
