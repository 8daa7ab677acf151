"""Expansion of composite blocks into primitive layers."""

from __future__ import annotations

from ..errors import GraphError
from . import layers as L
from .graph import NetworkGraph, validate

__all__ = ["lower", "lower_with_map", "expand_block"]


def _bt_unit(kind: str, q: int, d: int) -> list[L.Spec]:
    fac, dw = "Fac" in kind, "Dw" in kind
    if fac and dw:
        return [L.DepthwiseConv(3, 1, 1, d, q), L.BatchNorm(q),
                L.DepthwiseConv(1, 3, 1, d, q), L.BatchNorm(q)]
    if dw:
        return [L.DepthwiseConv(3, 3, 1, d, q), L.BatchNorm(q)]
    if fac:
        return [L.StandardConv(3, 1, 1, d, q, q), L.BatchNorm(q), L.ReLU(),
                L.StandardConv(1, 3, 1, d, q, q), L.BatchNorm(q), L.ReLU()]
    return [L.StandardConv(3, 3, 1, d, q, q), L.BatchNorm(q), L.ReLU()]


def _nonbt_unit(kind: str, c: int, d: int) -> list[L.Spec]:
    fac, dw = "Fac" in kind, "Dw" in kind
    if fac and dw:
        return [L.DepthwiseConv(3, 1, 1, d, c), L.BatchNorm(c),
                L.DepthwiseConv(1, 3, 1, d, c), L.BatchNorm(c),
                L.PointwiseConv(c, c), L.BatchNorm(c), L.ReLU()]
    if dw:
        return [L.DepthwiseConv(3, 3, 1, d, c), L.BatchNorm(c),
                L.PointwiseConv(c, c), L.BatchNorm(c), L.ReLU()]
    if fac:
        return [L.StandardConv(3, 1, 1, d, c, c), L.BatchNorm(c), L.ReLU(),
                L.StandardConv(1, 3, 1, d, c, c), L.BatchNorm(c), L.ReLU()]
    return [L.StandardConv(3, 3, 1, d, c, c), L.BatchNorm(c), L.ReLU()]


def _residual_branch(kind: str, channels: int, dilation: int, ratio: int = 4) -> list[L.Spec]:
    if kind.startswith("Bt"):
        q = channels // ratio
        return ([L.PointwiseConv(channels, q), L.BatchNorm(q), L.ReLU()]
                + _bt_unit(kind, q, dilation)
                + [L.PointwiseConv(q, channels), L.BatchNorm(channels)])
    # non-bottleneck: undilated unit then dilated unit; no ReLU before the add
    return _nonbt_unit(kind, channels, 1) + _nonbt_unit(kind, channels, dilation)[:-1]


def _tag(spec: L.Spec) -> str:
    if isinstance(spec, (L.StandardConv, L.DepthwiseConv)):
        prefix = "conv" if isinstance(spec, L.StandardConv) else "dw"
        return f"{prefix}{spec.k_h}x{spec.k_w}"
    if isinstance(spec, L.PointwiseConv):
        return "pw"
    return {
        "BatchNorm": "bn", "ReLU": "relu", "MaxPool": "pool", "Concat": "concat",
        "Add": "add", "ChannelShuffle": "shuffle", "TransposedConv": "trans",
    }.get(spec.op, spec.op.lower())


def expand_block(name: str, spec: L.Spec, src: str) -> tuple[list[tuple[str, L.Spec, tuple]], str]:
    """Primitive nodes for one composite block fed by ``src``.

    Returns the node list and the name of the node carrying the block's
    output.
    """
    items: list[tuple[str, L.Spec, tuple]] = []

    def emit(layer, inputs):
        sub = f"{name}/{len(items) + 1:02d}_{_tag(layer)}"
        items.append((sub, layer, tuple(inputs)))
        return sub

    def chain(specs, prev):
        for layer in specs:
            prev = emit(layer, (prev,))
        return prev

    if isinstance(spec, (L.InitialBlock, L.DownsampleBlock)):
        if isinstance(spec, L.InitialBlock):
            conv = emit(L.StandardConv(3, 3, 2, 1, spec.in_ch, spec.out_ch - spec.in_ch), (src,))
        elif spec.branch == "multiplier":
            conv = emit(L.DepthwiseConv(3, 3, 2, 1, spec.in_ch, spec.multiplier), (src,))
        else:
            dw = emit(L.DepthwiseConv(3, 3, 2, 1, spec.in_ch), (src,))
            conv = emit(L.PointwiseConv(spec.in_ch, spec.out_ch - spec.in_ch), (dw,))
        pool = emit(L.MaxPool(2, 2), (src,))
        tail = [L.ChannelShuffle(2)] if getattr(spec, "shuffle", False) else []
        out = chain(tail + [L.BatchNorm(spec.out_ch), L.ReLU()],
                    emit(L.Concat(), (conv, pool)))
    elif isinstance(spec, (L.SFRB, L.ResidualVariant)):
        if isinstance(spec, L.SFRB):
            branch = _residual_branch("Bt-Fac-Dw", spec.channels, spec.dilation, spec.compress_ratio)
        else:
            branch = _residual_branch(spec.kind, spec.channels, spec.dilation)
        last = chain(branch, src)
        out = emit(L.ReLU(), (emit(L.Add(), (last, src)),))
    elif isinstance(spec, L.DecoderUpsample):
        out = chain([L.TransposedConv(3, 2, spec.in_ch, spec.out_ch, output_padding=1, padding=1),
                     L.BatchNorm(spec.out_ch), L.ReLU()], src)
    else:
        raise TypeError(f"{spec.op} is not a composite block")
    return items, out


def lower_with_map(graph: NetworkGraph) -> tuple[NetworkGraph, dict[str, str]]:
    """Lower ``graph`` and return ``{original node: node now carrying its output}``."""
    violations = validate(graph)
    if violations:
        raise GraphError(violations)
    exits: dict[str, str] = {}
    items = []
    for name, node in graph.nodes.items():
        inputs = tuple(exits.get(s, s) for s in node.inputs)
        if node.spec.composite:
            sub, exits[name] = expand_block(name, node.spec, inputs[0])
            items.extend(sub)
        else:
            items.append((name, node.spec, inputs))
            exits[name] = name
    # forward references are impossible in insertion-ordered presets, but
    # JSON graphs may list nodes out of order: patch any stale inputs
    items = [(n, s, tuple(exits.get(i, i) for i in ins)) for n, s, ins in items]
    lowered = NetworkGraph.from_sequence(
        graph.name, items, input_shape=graph.input_shape,
        encoder_end=exits[graph.encoder_end], output=exits[graph.output],
    )
    return lowered, exits


def lower(graph: NetworkGraph) -> NetworkGraph:
    """Graph of primitive layers only; a no-op on already lowered graphs."""
    return lower_with_map(graph)[0]
