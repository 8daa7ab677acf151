"""Forward execution of lowered graphs and activation-footprint accounting."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .arch import layers as L
from .arch.graph import INPUT, NetworkGraph
from .arch.layers import TensorShape
from .arch.shapes import infer_shapes, same_padding
from .errors import ShapeError
from .weights import WeightStore

__all__ = ["TraceRecord", "ExecutionTrace", "forward", "activation_footprint", "BYTES_PER_ELEMENT"]

BYTES_PER_ELEMENT = 4
BN_EPSILON = 1e-5


@dataclass(frozen=True)
class TraceRecord:
    node: str
    shape: TensorShape
    checksum: str


@dataclass
class ExecutionTrace:
    records: list[TraceRecord] = field(default_factory=list)
    peak_bytes: int = 0

    @property
    def order(self) -> list[str]:
        return [r.node for r in self.records]


def _last_use(graph: NetworkGraph, order) -> dict[str, int]:
    pos = {name: i for i, name in enumerate(order)}
    last = {INPUT: -1}
    for name in order:
        last.setdefault(name, pos[name])
        for src in graph.nodes[name].inputs:
            last[src] = max(last.get(src, -1), pos[name])
    last[graph.output] = len(order)  # the result outlives the schedule
    return last


def activation_footprint(graph: NetworkGraph, input: TensorShape | None = None) -> int:
    """Peak bytes of simultaneously live activations (4 bytes/element).

    Schedule is :meth:`NetworkGraph.order`; a node's output is allocated
    while its inputs are still live, and a tensor is freed right after
    its last consumer runs.
    """
    shapes = infer_shapes(graph, input)
    order = graph.order()
    last = _last_use(graph, order)
    sizes = {INPUT: (input or graph.input_shape).numel * BYTES_PER_ELEMENT}
    live = sizes[INPUT]
    peak = live
    for i, name in enumerate(order):
        sizes[name] = shapes[name][1].numel * BYTES_PER_ELEMENT
        live += sizes[name]
        peak = max(peak, live)
        for src in set(graph.nodes[name].inputs) | {name}:
            if last[src] == i:
                live -= sizes[src]
    return peak


def _checksum(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


def _run_layer(name, spec, ins, weights: WeightStore, threads):
    x = ins[0]
    if isinstance(spec, L.StandardConv):
        w = weights[name]["weight"]
        return K.conv2d(x, w, spec.stride, spec.dilation, same_padding(spec.k_h, spec.dilation),
                        same_padding(spec.k_w, spec.dilation), 1, threads=threads)
    if isinstance(spec, L.DepthwiseConv):
        w = weights[name]["weight"]
        return K.conv2d(x, w, spec.stride, spec.dilation, same_padding(spec.k_h, spec.dilation),
                        same_padding(spec.k_w, spec.dilation), spec.channels, threads=threads)
    if isinstance(spec, L.PointwiseConv):
        return K.conv2d(x, weights[name]["weight"], threads=threads)
    if isinstance(spec, L.TransposedConv):
        return K.transposed_conv2d(x, weights[name]["weight"], spec.stride, spec.padding,
                                   spec.output_padding, threads=threads)
    if isinstance(spec, L.BatchNorm):
        p = weights[name]
        return K.batchnorm_inference(x, p["gamma"], p["beta"], p["mean"], p["var"], BN_EPSILON)
    if isinstance(spec, L.MaxPool):
        return K.maxpool2d(x, spec.k, spec.stride)
    if isinstance(spec, L.ReLU):
        return K.relu(x)
    if isinstance(spec, L.Add):
        return K.add(*ins)
    if isinstance(spec, L.Concat):
        return K.concat(*ins)
    if isinstance(spec, L.ChannelShuffle):
        return K.channel_shuffle(x, spec.groups)
    if isinstance(spec, L.BilinearUpsample):
        return K.bilinear_upsample(x, spec.factor)
    if isinstance(spec, L.ArgmaxChannels):
        return K.argmax_channels(x)[None].astype(np.float32)
    raise TypeError(f"cannot execute {spec.op}; lower the graph first")


def forward(graph: NetworkGraph, weights: WeightStore, x, taps=(), *, threads: int = 1):
    """Run ``graph`` on one ``(C, H, W)`` image.

    Returns ``(output, trace, tapped)`` where ``tapped`` maps each
    requested node name to a copy of its output.
    """
    if not graph.is_lowered:
        raise ValueError("forward needs a lowered graph")
    x = K.as_tensor(x)
    c, h, w = x.shape
    expected = infer_shapes(graph, TensorShape(h, w, c))
    taps = set(taps)
    unknown = taps - set(graph.nodes)
    if unknown:
        raise KeyError(f"tap nodes not in graph: {sorted(unknown)}")
    weights.check_against(graph)

    order = graph.order()
    last = _last_use(graph, order)
    values = {INPUT: x}
    live = x.nbytes
    trace = ExecutionTrace(peak_bytes=live)
    tapped = {}
    for i, name in enumerate(order):
        node = graph.nodes[name]
        out = _run_layer(name, node.spec, [values[s] for s in node.inputs], weights, threads)
        got = TensorShape(out.shape[1], out.shape[2], out.shape[0])
        if got != expected[name][1]:
            raise ShapeError(name, f"produced {got}, expected {expected[name][1]}")
        values[name] = out
        live += out.nbytes
        trace.peak_bytes = max(trace.peak_bytes, live)
        trace.records.append(TraceRecord(name, got, _checksum(out)))
        if name in taps:
            tapped[name] = out.copy()
        for src in set(node.inputs) | {name}:
            if last[src] == i:
                live -= values.pop(src).nbytes
    return values[graph.output], trace, tapped
