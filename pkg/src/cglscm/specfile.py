"""Plain-text model-spec format.

One directive per line; ``#`` starts a comment; fields are separated by
whitespace::

    format cglscm-model 1
    nodes X1 X2 X3
    edge X1 X2 0.5
    edge X2 X3 0.9
    confounder U4 X1:-0.2 X3:0.3
    mu 0.3 0.1 0.2
    psi2 1.0 1.0 1.0

``nodes`` fixes the matrix order and must come before any other directive
except ``format``. A *graph* file is the same document with the weights left
out (``edge X1 X2``, ``confounder U4 X1 X3``) and no ``mu``/``psi2`` lines.
``psi2`` defaults to all ones. Numbers are written with ``repr`` so a
serialize/parse round trip is exact.
"""

from __future__ import annotations

import numpy as np

from .graph import CausalDiagram, StructureError
from .model import CglScm, ParameterError

__all__ = ["FORMAT_TAG", "SpecParseError", "parse_spec", "parse_model", "parse_graph",
           "dump_model", "dump_graph", "load_model", "load_graph", "save_model"]

FORMAT_TAG = ("cglscm-model", "1")


class SpecParseError(ValueError):
    def __init__(self, msg, line=None, col=None, source="<spec>"):
        self.line, self.col, self.source = line, col, source
        where = source if line is None else f"{source}:{line}:{col}"
        super().__init__(f"{where}: {msg}")


def _tokens(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks, pos = [], 0
        for tok in line.split():
            pos = line.index(tok, pos)
            toks.append((tok, pos + 1))
            pos += len(tok)
        if toks:
            yield lineno, toks


def parse_spec(text: str, source="<spec>"):
    """Parse a spec document into ``(diagram, params)``.

    ``params`` is ``None`` for a bare graph, otherwise a dict with ``T``,
    ``C``, ``mu`` and ``psi2`` arrays.
    """
    def err(msg, lineno, col):
        return SpecParseError(msg, lineno, col, source)

    def num(tok, lineno, col):
        try:
            return float(tok)
        except ValueError:
            raise err(f"expected a number, got {tok!r}", lineno, col) from None

    nodes = None
    edges, weights, confounders, loadings = [], [], [], []
    vectors = {}
    weighted = set()
    for lineno, toks in _tokens(text):
        (key, kcol), args = toks[0], toks[1:]
        if key == "format":
            if tuple(t for t, _ in args) != FORMAT_TAG:
                raise err(f"unsupported format {' '.join(t for t, _ in args)!r}", lineno, kcol)
            continue
        if key == "nodes":
            if nodes is not None:
                raise err("duplicate 'nodes' line", lineno, kcol)
            if not args:
                raise err("'nodes' needs at least one name", lineno, kcol)
            nodes = [t for t, _ in args]
            continue
        if nodes is None:
            raise err(f"{key!r} before 'nodes'", lineno, kcol)
        if key == "edge":
            if len(args) not in (2, 3):
                raise err("expected 'edge FROM TO [WEIGHT]'", lineno, kcol)
            edges.append((args[0][0], args[1][0]))
            if len(args) == 3:
                weights.append(num(args[2][0], lineno, args[2][1]))
                weighted.add("edge")
            else:
                weights.append(None)
        elif key == "confounder":
            if len(args) < 3:
                raise err("expected 'confounder NAME CHILD[:LOADING] ...'", lineno, kcol)
            children, loads = [], []
            for tok, col in args[1:]:
                child, sep, val = tok.partition(":")
                children.append(child)
                if sep:
                    loads.append(num(val, lineno, col + len(child) + 1))
                    weighted.add("confounder")
                else:
                    loads.append(None)
            confounders.append((args[0][0], children))
            loadings.append(loads)
        elif key in ("mu", "psi2"):
            if key in vectors:
                raise err(f"duplicate {key!r} line", lineno, kcol)
            if len(args) != len(nodes):
                raise err(f"{key!r} needs {len(nodes)} values, got {len(args)}", lineno, kcol)
            vectors[key] = np.array([num(t, lineno, c) for t, c in args])
        else:
            raise err(f"unknown directive {key!r}", lineno, kcol)
    if nodes is None:
        raise SpecParseError("missing 'nodes' line", source=source)
    try:
        diagram = CausalDiagram(nodes, edges, confounders)
    except StructureError as exc:
        raise SpecParseError(str(exc), source=source) from None

    if not weighted and "mu" not in vectors:
        return diagram, None
    if any(w is None for w in weights) or any(v is None for ls in loadings for v in ls):
        raise SpecParseError("model spec mixes weighted and unweighted entries", source=source)
    if "mu" not in vectors:
        raise SpecParseError("model spec is missing 'mu'", source=source)
    n, k = len(nodes), len(confounders)
    T, C = np.zeros((n, n)), np.zeros((k, n))
    for (a, b), w in zip(edges, weights):
        T[diagram.index(a), diagram.index(b)] = w
    for r, ((_, children), loads) in enumerate(zip(confounders, loadings)):
        for child, v in zip(children, loads):
            C[r, diagram.index(child)] = v
    return diagram, dict(T=T, C=C, mu=vectors["mu"], psi2=vectors.get("psi2", np.ones(n)))


def parse_model(text: str, source="<spec>") -> CglScm:
    diagram, params = parse_spec(text, source)
    if params is None:
        raise SpecParseError("this is a graph without parameters; a model spec is required",
                             source=source)
    try:
        return CglScm(diagram, **params)
    except ParameterError as exc:
        raise SpecParseError(str(exc), source=source) from None


def parse_graph(text: str, source="<spec>") -> CausalDiagram:
    return parse_spec(text, source)[0]


def _header(g: CausalDiagram):
    return [" ".join(("format",) + FORMAT_TAG), "nodes " + " ".join(g.nodes)]


def dump_graph(g: CausalDiagram) -> str:
    lines = _header(g)
    lines += [f"edge {a} {b}" for a, b in g.edges]
    lines += [f"confounder {u} " + " ".join(ch) for u, ch in g.confounders]
    return "\n".join(lines) + "\n"


def dump_model(m: CglScm) -> str:
    g = m.diagram
    lines = _header(g)
    for a, b in g.edges:
        lines.append(f"edge {a} {b} {float(m.T[g.index(a), g.index(b)])!r}")
    for r, (u, children) in enumerate(g.confounders):
        loads = " ".join(f"{c}:{float(m.C[r, g.index(c)])!r}" for c in children)
        lines.append(f"confounder {u} {loads}")
    lines.append("mu " + " ".join(repr(float(v)) for v in m.mu))
    lines.append("psi2 " + " ".join(repr(float(v)) for v in m.psi2))
    return "\n".join(lines) + "\n"


def load_model(path) -> CglScm:
    with open(path) as fh:
        return parse_model(fh.read(), str(path))


def load_graph(path) -> CausalDiagram:
    with open(path) as fh:
        return parse_graph(fh.read(), str(path))


def save_model(m: CglScm, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_model(m))
