"""Interventional queries answered exactly by mechanism surgery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import build_masks
from .model import CglScm, GaussianDist, build_B, implied_moments

__all__ = ["QueryError", "DoQuery", "Gaussian1D", "QueryComparison",
           "interventional_dist", "intervene", "compare_queries"]


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class DoQuery:
    interventions: dict
    target: str

    def __str__(self):
        do = ", ".join(f"{k} = {v:g}" for k, v in self.interventions.items())
        return f"P({self.target} | do({do}))"

    def validate(self, nodes):
        for v in [*self.interventions, self.target]:
            if v not in nodes:
                raise QueryError(f"unknown node {v!r}")
        if self.target in self.interventions:
            raise QueryError(f"target {self.target!r} is also intervened on")


@dataclass(frozen=True)
class Gaussian1D:
    mean: float
    var: float

    def __str__(self):
        return f"N({self.mean:.4f}, {self.var:.4f})"


@dataclass(frozen=True)
class QueryComparison:
    query: DoQuery
    original: Gaussian1D
    estimated: Gaussian1D

    @property
    def mean_error(self) -> float:
        return abs(self.estimated.mean - self.original.mean)

    @property
    def var_error(self) -> float:
        """Variance error relative to the original variance."""
        return abs(self.estimated.var - self.original.var) / self.original.var


def interventional_dist(m: CglScm, interventions: dict) -> GaussianDist:
    """Joint distribution of all nodes in the model mutilated by ``do(interventions)``.

    Intervened nodes lose their incoming edges, confounder loadings and noise
    and take their bias equal to the forced value, so they are constants.
    """
    g = m.diagram
    idx = [g.index(v) for v in interventions]
    T, C = m.T.copy(), m.C.copy()
    mu, psi2 = m.mu.copy(), m.psi2.copy()
    T[:, idx] = 0.0
    C[:, idx] = 0.0
    psi2[idx] = 0.0
    mu[idx] = [float(z) for z in interventions.values()]
    B = build_B(T, build_masks(g).d)
    mean, cov = implied_moments(B, C, mu, psi2)
    return GaussianDist(mean, cov)


def intervene(m: CglScm, q: DoQuery) -> Gaussian1D:
    q.validate(m.diagram.nodes)
    dist = interventional_dist(m, q.interventions)
    i = m.diagram.index(q.target)
    return Gaussian1D(float(dist.mean[i]), float(max(dist.cov[i, i], 0.0)))


def compare_queries(m_true: CglScm, m_fit: CglScm, queries) -> list[QueryComparison]:
    if m_true.diagram.nodes != m_fit.diagram.nodes:
        raise QueryError("models are defined over different node sets")
    return [QueryComparison(q, intervene(m_true, q), intervene(m_fit, q)) for q in queries]
