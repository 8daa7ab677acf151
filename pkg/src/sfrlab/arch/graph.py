"""Network DAG container, structural validation and scheduling."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..errors import GraphError
from .layers import Spec, TensorShape

__all__ = ["INPUT", "Node", "NetworkGraph", "Violation", "validate", "topological_order"]

#: Reserved name of the graph's virtual source (the network input tensor).
INPUT = "input"


@dataclass(frozen=True)
class Node:
    spec: Spec
    inputs: tuple[str, ...]


@dataclass(frozen=True)
class Violation:
    node: str
    rule: str
    detail: str

    def __str__(self):
        return f"{self.node}: [{self.rule}] {self.detail}"


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable DAG of layer/block nodes.

    Nodes are kept in insertion order; ``inputs`` order matters for
    Concat (channel order) and Add.  The virtual node ``"input"`` feeds
    the graph and ``input_shape`` is the nominal shape it expects.
    """

    name: str
    nodes: Mapping[str, Node]
    output: str
    encoder_end: str
    input_shape: TensorShape
    _order: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(self.nodes))
        object.__setattr__(self, "_order", ())

    @classmethod
    def from_sequence(cls, name, items: Iterable[tuple[str, Spec, Iterable[str]]], *,
                      input_shape: TensorShape, encoder_end: str | None = None,
                      output: str | None = None) -> "NetworkGraph":
        nodes = {}
        for node_name, spec, inputs in items:
            if node_name in nodes or node_name == INPUT:
                raise GraphError([Violation(node_name, "unique-name", "duplicate node name")])
            nodes[node_name] = Node(spec, tuple(inputs))
        last = next(reversed(nodes)) if nodes else INPUT
        return cls(name, nodes, output or last, encoder_end or output or last, input_shape)

    @classmethod
    def chain(cls, name, items: Iterable[tuple[str, Spec]], **kw) -> "NetworkGraph":
        """Build a linear graph where each node consumes its predecessor."""
        seq, prev = [], INPUT
        for node_name, spec in items:
            seq.append((node_name, spec, (prev,)))
            prev = node_name
        return cls.from_sequence(name, seq, **kw)

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, name):
        return name in self.nodes

    def __getitem__(self, name) -> Node:
        return self.nodes[name]

    @property
    def is_lowered(self) -> bool:
        return not any(n.spec.composite for n in self.nodes.values())

    def consumers(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {INPUT: []}
        out.update({n: [] for n in self.nodes})
        for name, node in self.nodes.items():
            for src in node.inputs:
                if src in out and name not in out[src]:
                    out[src].append(name)
        return out

    def order(self) -> tuple[str, ...]:
        """Deterministic topological order (cached; see :func:`topological_order`)."""
        if not self._order:
            object.__setattr__(self, "_order", tuple(topological_order(self)))
        return self._order

    def ancestors(self, name: str) -> set[str]:
        seen, stack = set(), [name]
        while stack:
            cur = stack.pop()
            if cur in seen or cur == INPUT:
                continue
            seen.add(cur)
            stack.extend(self.nodes[cur].inputs)
        return seen


def topological_order(graph: NetworkGraph) -> list[str]:
    """Kahn's algorithm with a lexicographic tie-break on node names."""
    indeg = {n: len(set(node.inputs) - {INPUT}) for n, node in graph.nodes.items()}
    consumers = graph.consumers()
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        name = heapq.heappop(ready)
        order.append(name)
        for nxt in consumers[name]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(graph.nodes):
        stuck = sorted(set(graph.nodes) - set(order))
        raise GraphError([Violation(stuck[0], "acyclic", f"cycle through {stuck}")])
    return order


def validate(graph: NetworkGraph) -> list[Violation]:
    """Return every structural/parameter violation; empty means valid."""
    out: list[Violation] = []
    names = set(graph.nodes)

    for name, node in graph.nodes.items():
        for problem in node.spec.check():
            out.append(Violation(name, "params", problem))
        dangling = [src for src in node.inputs if src != INPUT and src not in names]
        for src in dangling:
            out.append(Violation(name, "edge", f"input {src!r} does not exist"))
        arity = node.spec.arity
        n_in = len(node.inputs)
        if arity is None and n_in < 2:
            out.append(Violation(name, "arity", f"{node.spec.op} needs >= 2 inputs, has {n_in}"))
        elif arity is not None and n_in != arity:
            out.append(Violation(name, "arity", f"{node.spec.op} needs {arity} input(s), has {n_in}"))

    for attr in ("output", "encoder_end"):
        target = getattr(graph, attr)
        if target not in names:
            out.append(Violation(str(target), attr, f"designated {attr} node does not exist"))
    if any(v.rule == "edge" for v in out):
        return out

    try:
        topological_order(graph)
    except GraphError as exc:
        out.extend(exc.violations)
        return out

    # reachability from the input
    consumers = graph.consumers()
    seen, stack = set(), [INPUT]
    while stack:
        cur = stack.pop()
        for nxt in consumers[cur]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    for name in graph.nodes:
        if name not in seen:
            out.append(Violation(name, "reachable", "not reachable from the input"))

    # every sink other than the output is dead code
    if graph.output in names:
        feeding = graph.ancestors(graph.output)
        for name in graph.nodes:
            if name not in feeding:
                out.append(Violation(name, "reaches-output", "does not feed the output node"))
    return out
