"""Architecture JSON: ``{"name", "input", "nodes": [{"id", "op", "params", "inputs"}], "encoder_end"}``.

The last entry of ``nodes`` is the graph output.
"""

from __future__ import annotations

import json
from pathlib import Path

from .graph import NetworkGraph
from .layers import TensorShape, spec_from_dict

__all__ = ["graph_to_dict", "graph_from_dict", "dump_graph", "load_graph"]


def graph_to_dict(graph: NetworkGraph) -> dict:
    names = [n for n in graph.nodes if n != graph.output] + [graph.output]
    return {
        "name": graph.name,
        "input": graph.input_shape.as_list(),
        "nodes": [
            {
                "id": n,
                "op": graph.nodes[n].spec.op,
                "params": graph.nodes[n].spec.params(),
                "inputs": list(graph.nodes[n].inputs),
            }
            for n in names
        ],
        "encoder_end": graph.encoder_end,
    }


def graph_from_dict(data: dict) -> NetworkGraph:
    try:
        items = [
            (entry["id"], spec_from_dict(entry["op"], entry.get("params")), entry["inputs"])
            for entry in data["nodes"]
        ]
        shape = TensorShape(*data["input"])
        return NetworkGraph.from_sequence(
            data["name"], items, input_shape=shape, encoder_end=data["encoder_end"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed architecture JSON: {exc}") from exc


def dump_graph(graph: NetworkGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph), indent=2) + "\n", encoding="utf-8")


def load_graph(path) -> NetworkGraph:
    return graph_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
