"""Open graphs, flow, brickwork generation and measurement patterns.

Vertices are ``(wire, layer)`` tuples with 0-based wires and layers. The
partial order of a flow is given as an integer rank per vertex (the layer for
brickwork graphs); ``a > b`` means ``rank[a] > rank[b]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable


@dataclass(frozen=True)
class OpenGraph:
    vertices: tuple
    edges: frozenset
    inputs: tuple
    outputs: tuple
    _adj: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertices")
        adj = {v: set() for v in self.vertices}
        norm = set()
        for e in self.edges:
            a, b = tuple(e)
            if a == b:
                raise ValueError(f"self-loop on {a}")
            if a not in vs or b not in vs:
                raise ValueError(f"edge {e} references a missing vertex")
            adj[a].add(b)
            adj[b].add(a)
            norm.add(frozenset((a, b)))
        for v in (*self.inputs, *self.outputs):
            if v not in vs:
                raise ValueError(f"io vertex {v} not in graph")
        if set(self.inputs) & set(self.outputs):
            raise ValueError("inputs must be measured (I is a subset of O^c)")
        object.__setattr__(self, "edges", frozenset(norm))
        object.__setattr__(self, "_adj", adj)

    @classmethod
    def build(cls, vertices: Iterable, edges: Iterable, inputs: Iterable, outputs: Iterable) -> "OpenGraph":
        return cls(tuple(vertices), frozenset(frozenset(e) for e in edges), tuple(inputs), tuple(outputs))

    def neighbors(self, v) -> set:
        return self._adj[v]

    def has_edge(self, a, b) -> bool:
        return b in self._adj.get(a, ())

    @property
    def measured(self) -> list:
        """``O^c`` in vertex order."""
        outs = set(self.outputs)
        return [v for v in self.vertices if v not in outs]


@dataclass(frozen=True)
class Flow:
    f: dict
    order: dict

    def inverse(self) -> dict:
        return {j: i for i, j in self.f.items()}


@dataclass(frozen=True)
class FlowReport:
    ok: bool
    condition: str = ""
    vertex: Hashable = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_flow(graph: OpenGraph, flow: Flow) -> FlowReport:
    """Check the three flow conditions; report the first violation found."""
    rank = flow.order
    missing = [v for v in graph.vertices if v not in rank]
    if missing:
        return FlowReport(False, "order", missing[0], "vertex has no rank")
    inputs = set(graph.inputs)
    for i in graph.measured:
        if i not in flow.f:
            return FlowReport(False, "domain", i, "f undefined on a measured vertex")
        fi = flow.f[i]
        if fi in inputs:
            return FlowReport(False, "domain", i, f"f({i}) = {fi} is an input")
        if not graph.has_edge(i, fi):
            return FlowReport(False, "edge", i, f"({i}, f({i})={fi}) is not an edge")
        if not rank[fi] > rank[i]:
            return FlowReport(False, "order", i, f"f({i})={fi} does not come after {i}")
        for k in graph.neighbors(fi):
            if k != i and not rank[k] > rank[i]:
                return FlowReport(False, "neighbour", i, f"{k} in N(f({i})) does not come after {i}")
    extra = set(flow.f) - set(graph.measured)
    if extra:
        return FlowReport(False, "domain", sorted(extra)[0], "f defined on an output")
    return FlowReport(True)


def brick_vertical_layers(w: int, q: int) -> list[int]:
    """Layers carrying a vertical edge between wires ``w`` and ``w + 1``.

    Pairs with even 0-based ``w`` (odd in 1-based numbering) have bricks
    starting at layers 1, 9, 17, ...; the others at 5, 13, 21, .... Vertical
    edges sit at brick columns 3 and 5, i.e. two and four layers after the
    brick start. Bricks that overhang layer ``q`` keep only their in-range
    edges.
    """
    start = 1 if w % 2 == 0 else 5
    out = []
    for s in range(start, q + 1, 8):
        out.extend(v for v in (s + 2, s + 4) if v <= q)
    return out


def brickwork(n: int, q: int) -> OpenGraph:
    """Brickwork graph with ``n`` wires and ``q + 1`` layers ``0..q``."""
    if n < 1 or q < 1:
        raise ValueError(f"need n >= 1 and q >= 1, got n={n}, q={q}")
    vertices = [(w, l) for l in range(q + 1) for w in range(n)]
    edges = [((w, l), (w, l + 1)) for w in range(n) for l in range(q)]
    for w in range(n - 1):
        edges.extend(((w, l), (w + 1, l)) for l in brick_vertical_layers(w, q))
    return OpenGraph.build(vertices, edges, [(w, 0) for w in range(n)], [(w, q) for w in range(n)])


def canonical_flow(graph: OpenGraph) -> Flow:
    """Flow ``f(w, l) = (w, l + 1)`` ordered by layer."""
    f = {v: (v[0], v[1] + 1) for v in graph.measured}
    return Flow(f=f, order={v: v[1] for v in graph.vertices})


def dependencies(graph: OpenGraph, flow: Flow) -> tuple[dict, dict]:
    """X- and Z-dependency sets for every vertex."""
    inv = flow.inverse()
    xdeps = {v: ({inv[v]} if v in inv else set()) for v in graph.vertices}
    zdeps = {v: set() for v in graph.vertices}
    for i in graph.measured:
        for j in graph.neighbors(flow.f[i]):
            if j != i:
                zdeps[j].add(i)
    return xdeps, zdeps


@dataclass(frozen=True)
class MeasurementPattern:
    graph: OpenGraph
    flow: Flow
    phi: dict
    xdeps: dict = field(default=None)
    zdeps: dict = field(default=None)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        report = validate_flow(self.graph, self.flow)
        if not report:
            raise ValueError(f"pattern graph has no valid flow: {report.condition} at {report.vertex}")
        missing = [v for v in self.graph.measured if v not in self.phi]
        if missing:
            raise ValueError(f"no measurement angle for {missing[0]}")
        if self.xdeps is None or self.zdeps is None:
            x, z = dependencies(self.graph, self.flow)
            object.__setattr__(self, "xdeps", x)
            object.__setattr__(self, "zdeps", z)

    @property
    def inputs(self) -> tuple:
        return self.graph.inputs

    @property
    def outputs(self) -> tuple:
        return self.graph.outputs

    def measurement_order(self) -> list:
        """``O^c`` linearised layer-major (rank, then vertex)."""
        return sorted(self.graph.measured, key=lambda v: (self.flow.order[v], v))

    def layers(self) -> list[list]:
        """All vertices grouped by rank."""
        by: dict = {}
        for v in self.graph.vertices:
            by.setdefault(self.flow.order[v], []).append(v)
        return [sorted(by[r]) for r in sorted(by)]


def dump_pattern(pattern: MeasurementPattern) -> str:
    """Text dump: ``vertex wire layer phi xdeps zdeps`` per line.

    Vertices are numbered layer-major; dependency lists use those numbers,
    ``-`` marks an empty field or an unmeasured vertex's angle.
    """
    order = sorted(pattern.graph.vertices, key=lambda v: (pattern.flow.order[v], v))
    num = {v: i for i, v in enumerate(order)}

    def deps(s):
        return ",".join(str(num[d]) for d in sorted(s, key=num.get)) or "-"

    lines = []
    for v in order:
        phi = pattern.phi.get(v)
        lines.append(f"{num[v]} {v[0]} {v[1]} {'-' if phi is None else phi} "
                     f"{deps(pattern.xdeps[v])} {deps(pattern.zdeps[v])}")
    return "\n".join(lines) + "\n"
