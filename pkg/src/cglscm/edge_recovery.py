"""Recover direct edge weights from a total-effect matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CausalDiagram, StructureError, build_masks, topological_order
from .model import build_B

__all__ = ["EdgeRecoveryReport", "recover_edges"]


@dataclass(frozen=True)
class EdgeRecoveryReport:
    T_hat: np.ndarray
    reconstruction_residual: float


def recover_edges(g: CausalDiagram, B, order=None) -> EdgeRecoveryReport:
    """Back out ``T`` from ``B = I + T + ... + T^d``.

    For each node ``i`` its direct children are visited in topological order
    and ``t_ik = b_ik - sum_j t_ij b_jk``, the sum running over the children
    ``j`` already visited. ``order`` overrides the default topological order.
    The residual is the largest deviation between ``B`` and the matrix rebuilt
    from the recovered ``T``; it is zero only when ``B`` is consistent with
    some edge weighting of ``g``.
    """
    B = np.asarray(B, dtype=float)
    masks = build_masks(g)
    n = g.n_nodes
    if B.shape != (n, n):
        raise StructureError(f"B has shape {B.shape}; expected {(n, n)}")
    off = B * (1 - masks.b_mask - np.eye(n))
    if np.any(off != 0):
        i, j = np.argwhere(off != 0)[0]
        raise StructureError(
            f"B[{g.nodes[i]},{g.nodes[j]}] is nonzero but {g.nodes[j]} is not "
            f"reachable from {g.nodes[i]}")
    order = topological_order(g) if order is None else list(order)
    pos = {v: r for r, v in enumerate(order)}
    T = np.zeros((n, n))
    for i in range(n):
        kids = sorted((g.index(c) for c in g.children(g.nodes[i])), key=pos.__getitem__)
        for r, k in enumerate(kids):
            T[i, k] = B[i, k] - sum(T[i, j] * B[j, k] for j in kids[:r])
    rebuilt = build_B(T, masks.d)
    resid = float(np.max(np.abs((B - rebuilt) * masks.b_mask), initial=0.0))
    return EdgeRecoveryReport(T, resid)
