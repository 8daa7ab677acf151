"""Architecture IR: layer/block records, network graphs, presets, shapes and lowering."""

from .graph import INPUT, NetworkGraph, Node, Violation, topological_order, validate
from .layers import *  # noqa: F401,F403
from .layers import TensorShape
from .lowering import expand_block, lower, lower_with_map
from .presets import BLOCK_PRESETS, NETWORK_PRESETS, PRESET_IDS, VARIANT_PRESETS, build_preset
from .serialize import dump_graph, graph_from_dict, graph_to_dict, load_graph
from .shapes import infer_shapes

__all__ = [
    "INPUT",
    "NetworkGraph",
    "Node",
    "Violation",
    "TensorShape",
    "topological_order",
    "validate",
    "expand_block",
    "lower",
    "lower_with_map",
    "BLOCK_PRESETS",
    "NETWORK_PRESETS",
    "PRESET_IDS",
    "VARIANT_PRESETS",
    "build_preset",
    "dump_graph",
    "load_graph",
    "graph_from_dict",
    "graph_to_dict",
    "infer_shapes",
]
