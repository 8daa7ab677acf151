"""Cost model, receptive-field analysis and naive reference executor for ESFNet-style networks."""

from .arch import NetworkGraph, TensorShape, build_preset, infer_shapes, lower
from .cost import graph_cost, layer_cost, receptive_field
from .executor import forward
from .weights import init_weights, load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "NetworkGraph",
    "TensorShape",
    "build_preset",
    "infer_shapes",
    "lower",
    "graph_cost",
    "layer_cost",
    "receptive_field",
    "forward",
    "init_weights",
    "load_weights",
    "save_weights",
]
