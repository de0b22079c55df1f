"""Causal diagrams with latent confounders and their structural masks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CausalDiagram", "MaskSet", "StructureError",
           "topological_order", "longest_path", "build_masks"]


class StructureError(ValueError):
    """Raised for an invalid causal diagram (cycle, bad confounder, ...)."""


@dataclass(frozen=True)
class CausalDiagram:
    """Known causal graph over endogenous nodes.

    ``nodes`` fixes the row/column order of every matrix derived from the
    diagram. ``confounders`` is a sequence of ``(name, children)`` pairs; each
    latent confounder must point into at least two distinct nodes.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...] = ()
    confounders: tuple[tuple[str, tuple[str, ...]], ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((a, b) for a, b in self.edges))
        object.__setattr__(self, "confounders",
                           tuple((u, tuple(ch)) for u, ch in self.confounders))
        if len(set(self.nodes)) != len(self.nodes):
            raise StructureError("duplicate node names")
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.nodes)})
        seen = set()
        for a, b in self.edges:
            for v in (a, b):
                if v not in self._index:
                    raise StructureError(f"edge {a}->{b}: unknown node {v!r}")
            if a == b:
                raise StructureError(f"self-loop on {a!r}")
            if (a, b) in seen:
                raise StructureError(f"duplicate edge {a}->{b}")
            seen.add((a, b))
        names = set()
        for u, children in self.confounders:
            if u in names or u in self._index:
                raise StructureError(f"confounder name {u!r} is not unique")
            names.add(u)
            if len(set(children)) != len(children):
                raise StructureError(f"confounder {u!r} lists a child twice")
            if len(children) < 2:
                raise StructureError(
                    f"confounder {u!r} has {len(children)} child(ren); need at least 2")
            for v in children:
                if v not in self._index:
                    raise StructureError(f"confounder {u!r}: unknown node {v!r}")
        topological_order(self)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_confounders(self) -> int:
        return len(self.confounders)

    @property
    def confounder_names(self) -> tuple[str, ...]:
        return tuple(u for u, _ in self.confounders)

    def index(self, node: str) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise KeyError(f"unknown node {node!r}") from None

    def children(self, node: str) -> list[str]:
        return [b for a, b in self.edges if a == node]

    def parents(self, node: str) -> list[str]:
        return [a for a, b in self.edges if b == node]


@dataclass(frozen=True)
class MaskSet:
    t_mask: np.ndarray
    b_mask: np.ndarray
    c_mask: np.ndarray
    d: int


def topological_order(g: CausalDiagram) -> list[int]:
    """Kahn's algorithm; ties go to the node listed first in ``g.nodes``."""
    n = len(g.nodes)
    idx = {v: i for i, v in enumerate(g.nodes)}
    indeg = [0] * n
    succ = [[] for _ in range(n)]
    for a, b in g.edges:
        succ[idx[a]].append(idx[b])
        indeg[idx[b]] += 1
    order = []
    ready = [i for i in range(n) if indeg[i] == 0]
    while ready:
        ready.sort()
        i = ready.pop(0)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if len(order) < n:
        raise StructureError("directed cycle: " + " -> ".join(_find_cycle(g, idx, succ)))
    return order


def _find_cycle(g, idx, succ):
    color = [0] * len(g.nodes)
    stack = []

    def visit(i):
        color[i] = 1
        stack.append(i)
        for j in succ[i]:
            if color[j] == 1:
                return stack[stack.index(j):] + [j]
            if color[j] == 0:
                found = visit(j)
                if found:
                    return found
        color[i] = 2
        stack.pop()
        return None

    for i in range(len(g.nodes)):
        if color[i] == 0:
            cyc = visit(i)
            if cyc:
                return [g.nodes[k] for k in cyc]
    return []


def longest_path(g: CausalDiagram) -> int:
    """Number of edges on the longest directed path (0 if there are none)."""
    depth = [0] * len(g.nodes)
    for i in topological_order(g):
        for c in g.children(g.nodes[i]):
            j = g.index(c)
            depth[j] = max(depth[j], depth[i] + 1)
    return max(depth, default=0)


def build_masks(g: CausalDiagram) -> MaskSet:
    n, k = g.n_nodes, g.n_confounders
    t_mask = np.zeros((n, n))
    for a, b in g.edges:
        t_mask[g.index(a), g.index(b)] = 1.0
    d = longest_path(g)
    acc = np.zeros((n, n))
    power = np.eye(n)
    for _ in range(d):
        power = power @ t_mask
        acc += power
    b_mask = (acc > 0).astype(float)
    c_mask = np.zeros((k, n))
    for r, (_, children) in enumerate(g.confounders):
        for v in children:
            c_mask[r, g.index(v)] = 1.0
    return MaskSet(t_mask=t_mask, b_mask=b_mask, c_mask=c_mask, d=d)
