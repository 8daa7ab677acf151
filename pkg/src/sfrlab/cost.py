"""FLOPs, parameter counts, feature stride and receptive field.

Counting convention:

* one multiply-accumulate is one FLOP; convolutions carry no bias;
* standard conv: ``k_h*k_w*H_out*W_out*C_in*C_out`` FLOPs, ``k_h*k_w*C_in*C_out`` params;
* depthwise conv: ``k_h*k_w*H_out*W_out*C_in*multiplier`` FLOPs, ``k_h*k_w*C_in*multiplier`` params;
* transposed conv is costed as the dense conv it equals after zero insertion,
  i.e. over the output grid: ``k*k*H_out*W_out*C_in*C_out`` FLOPs, ``k*k*C_in*C_out`` params;
* batch norm: one FLOP per output element and two params (scale, shift) per channel;
* pooling, ReLU, add, concat, shuffle, bilinear upsample and argmax are free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .arch import layers as L
from .arch.graph import INPUT, NetworkGraph
from .arch.layers import TensorShape
from .arch.lowering import lower_with_map
from .arch.shapes import infer_shapes
from .errors import UnreachableNodeError

__all__ = [
    "CostEntry",
    "CostReport",
    "layer_cost",
    "graph_cost",
    "receptive_field",
    "rf_trace",
    "nine_x_claim_check",
]


@dataclass(frozen=True)
class CostEntry:
    flops: int = 0
    params: int = 0

    def __add__(self, other: "CostEntry") -> "CostEntry":
        return CostEntry(self.flops + other.flops, self.params + other.params)


@dataclass
class CostReport:
    name: str
    input_shape: TensorShape
    entries: dict[str, CostEntry]
    ops: dict[str, str]
    out_shapes: dict[str, TensorShape]
    receptive_field: int
    feature_stride: int
    activation_footprint: int
    block_of: dict[str, str] = field(default_factory=dict)

    @property
    def total(self) -> CostEntry:
        total = CostEntry()
        for entry in self.entries.values():
            total = total + entry
        return total

    @property
    def total_flops(self) -> int:
        return self.total.flops

    @property
    def total_params(self) -> int:
        return self.total.params

    def block_totals(self) -> dict[str, CostEntry]:
        """Per top-level node totals (composite blocks summed over their layers)."""
        out: dict[str, CostEntry] = {}
        for name, entry in self.entries.items():
            top = self.block_of.get(name, name)
            out[top] = out.get(top, CostEntry()) + entry
        return out

    def to_dict(self) -> dict:
        return {
            "preset": self.name,
            "input": self.input_shape.as_list(),
            "layers": [
                {
                    "id": name,
                    "op": self.ops[name],
                    "flops": entry.flops,
                    "params": entry.params,
                    "out_shape": self.out_shapes[name].as_list(),
                }
                for name, entry in self.entries.items()
            ],
            "total_flops": self.total_flops,
            "total_params": self.total_params,
            "receptive_field": self.receptive_field,
            "feature_stride": self.feature_stride,
            "activation_peak_bytes": self.activation_footprint,
        }


def layer_cost(layer: L.Spec, in_shape, out_shape: TensorShape) -> CostEntry:
    """Cost of one primitive layer; ``in_shape`` may be a shape or a sequence of shapes."""
    ins = list(in_shape) if isinstance(in_shape, (list, tuple)) else [in_shape]
    x, y = ins[0], out_shape
    hw_out = y.height * y.width

    if isinstance(layer, L.StandardConv):
        _check(layer, x.channels == layer.in_ch and y.channels == layer.out_ch, x, y)
        per_out = layer.k_h * layer.k_w * layer.in_ch * layer.out_ch
        return CostEntry(per_out * hw_out, per_out)
    if isinstance(layer, L.DepthwiseConv):
        _check(layer, x.channels == layer.channels and y.channels == layer.out_ch, x, y)
        per_out = layer.k_h * layer.k_w * layer.channels * layer.multiplier
        return CostEntry(per_out * hw_out, per_out)
    if isinstance(layer, L.PointwiseConv):
        _check(layer, x.channels == layer.in_ch and y.channels == layer.out_ch, x, y)
        per_out = layer.in_ch * layer.out_ch
        return CostEntry(per_out * hw_out, per_out)
    if isinstance(layer, L.TransposedConv):
        _check(layer, x.channels == layer.in_ch and y.channels == layer.out_ch, x, y)
        per_out = layer.k * layer.k * layer.in_ch * layer.out_ch
        return CostEntry(per_out * hw_out, per_out)
    if isinstance(layer, L.BatchNorm):
        _check(layer, x == y and y.channels == layer.channels, x, y)
        return CostEntry(y.numel, 2 * layer.channels)
    if layer.composite:
        raise TypeError(f"layer_cost takes primitive layers; lower {layer.op} first")
    return CostEntry()


def _check(layer, ok, x, y):
    if not ok:
        raise ValueError(f"{layer.op} is inconsistent with shapes {x} -> {y}")


def _rf_step(spec: L.Spec, rf: Fraction, fs: Fraction, dim: str) -> tuple[Fraction, Fraction]:
    height = dim == "height"
    if isinstance(spec, (L.StandardConv, L.DepthwiseConv)):
        k = spec.k_h if height else spec.k_w
        return rf + (k - 1) * fs * spec.dilation, fs * spec.stride
    if isinstance(spec, L.MaxPool):
        return rf + (spec.k - 1) * fs, fs * spec.stride
    if isinstance(spec, L.TransposedConv):
        # a dense conv over the zero-inserted map, whose pixel pitch is fs/stride
        fs = fs / spec.stride
        return rf + (spec.k - 1) * fs, fs
    if isinstance(spec, L.BilinearUpsample):
        return rf, fs / spec.factor
    return rf, fs


def _as_number(value: Fraction):
    return int(value) if value.denominator == 1 else value


def rf_trace(graph: NetworkGraph, node: str | None = None, dim: str = "height") -> list[dict]:
    """Per-layer ``{id, op, feature_stride, rf}`` along the lowered ancestors of ``node``.

    ``node`` defaults to the encoder end.  Joins (concat/add) take the
    maximum over their branches.
    """
    lowered, exits = lower_with_map(graph)
    target = lowered.encoder_end if node is None else exits.get(node, node)
    if target not in lowered.nodes:
        raise UnreachableNodeError(target)
    keep = lowered.ancestors(target)
    state = {INPUT: (Fraction(1), Fraction(1))}
    trace = []
    for name in lowered.order():
        if name not in keep:
            continue
        spec = lowered.nodes[name].spec
        rf = max(state[s][0] for s in lowered.nodes[name].inputs)
        fs = max(state[s][1] for s in lowered.nodes[name].inputs)
        state[name] = _rf_step(spec, rf, fs, dim)
        trace.append({
            "id": name,
            "op": spec.op,
            "feature_stride": _as_number(state[name][1]),
            "rf": _as_number(state[name][0]),
        })
    return trace


def receptive_field(graph: NetworkGraph, node: str | None = None, dim: str = "height") -> dict:
    """``{"rf", "feature_stride"}`` at ``node`` (default: the encoder end).

    ``rf = 1 + sum((k_i - 1) * stride_product_before_i * dilation_i)``
    """
    last = rf_trace(graph, node, dim)[-1]
    return {"rf": last["rf"], "feature_stride": last["feature_stride"]}


def graph_cost(graph: NetworkGraph, input: TensorShape | None = None) -> CostReport:
    """Exact integer cost of ``graph`` (lowered first if it has composite blocks)."""
    from .executor import activation_footprint

    input = input or graph.input_shape
    lowered, exits = lower_with_map(graph)
    shapes = infer_shapes(lowered, input)
    block_of = {}
    for top, last in exits.items():
        if top != last:
            for name in lowered.nodes:
                if name.startswith(top + "/"):
                    block_of[name] = top
    entries, ops, outs = {}, {}, {}
    for name in lowered.order():
        ins, out = shapes[name]
        spec = lowered.nodes[name].spec
        entries[name] = layer_cost(spec, ins, out)
        ops[name] = spec.op
        outs[name] = out
    rf = receptive_field(lowered)
    return CostReport(
        name=graph.name,
        input_shape=input,
        entries=entries,
        ops=ops,
        out_shapes=outs,
        receptive_field=rf["rf"],
        feature_stride=rf["feature_stride"],
        activation_footprint=activation_footprint(lowered, input),
        block_of=block_of,
    )


def nine_x_claim_check(k: int, f: int, c: int) -> tuple[Fraction, Fraction]:
    """Standard-vs-depthwise-separable (FLOPs ratio, params ratio) for a KxK, FxF, C->C conv."""
    if min(k, f, c) < 1:
        raise ValueError("k, f and c must be >= 1")
    flops = Fraction(k * k * f * f * c * c, k * k * f * f * c + f * f * c * c)
    params = Fraction(k * k * c * c, k * k * c + c * c)
    return flops, params
