"""Static shape inference over layer and block graphs."""

from __future__ import annotations

from ..errors import GraphError, ShapeError
from . import layers as L
from .graph import INPUT, NetworkGraph, validate
from .layers import TensorShape

__all__ = ["same_padding", "conv_out", "transposed_out", "infer_shapes", "infer_node"]


def same_padding(k: int, dilation: int = 1) -> int:
    """Per-side zero padding: ``(k-1)*dilation // 2``.

    Keeps stride-1 layers size preserving and maps H -> ceil(H/2) for the
    3x3 stride-2 layers.
    """
    return (k - 1) * dilation // 2


def conv_out(size: int, k: int, stride: int, dilation: int, pad: int) -> int:
    eff = (k - 1) * dilation + 1
    return (size + 2 * pad - eff) // stride + 1


def transposed_out(size: int, k: int, stride: int, pad: int, output_padding: int) -> int:
    return (size - 1) * stride - 2 * pad + k + output_padding


def _expect_channels(name, shape: TensorShape, channels: int):
    if shape.channels != channels:
        raise ShapeError(name, f"expected {channels} input channels, got {shape.channels}")


def _spatial(name, shape, k_h, k_w, stride, dilation, pad_h, pad_w, channels):
    h = conv_out(shape.height, k_h, stride, dilation, pad_h)
    w = conv_out(shape.width, k_w, stride, dilation, pad_w)
    if h < 1 or w < 1:
        raise ShapeError(name, f"kernel {k_h}x{k_w} does not fit input {shape}")
    return TensorShape(h, w, channels)


def _halve(name, shape, channels):
    """Output of the twin conv(3x3,s2)/maxpool(2x2,s2) branches of a downsampler."""
    conv = _spatial(name, shape, 3, 3, 2, 1, 1, 1, 1)
    pool = _spatial(name, shape, 2, 2, 2, 1, 0, 0, 1)
    if (conv.height, conv.width) != (pool.height, pool.width):
        raise ShapeError(
            name,
            f"conv branch {conv.height}x{conv.width} and pool branch "
            f"{pool.height}x{pool.width} disagree (odd spatial size {shape})",
        )
    return TensorShape(conv.height, conv.width, channels)


def infer_node(name: str, spec: L.Spec, ins: list[TensorShape]) -> TensorShape:
    """Output shape of one node given its input shapes."""
    x = ins[0]
    if isinstance(spec, L.StandardConv):
        _expect_channels(name, x, spec.in_ch)
        return _spatial(name, x, spec.k_h, spec.k_w, spec.stride, spec.dilation,
                        same_padding(spec.k_h, spec.dilation),
                        same_padding(spec.k_w, spec.dilation), spec.out_ch)
    if isinstance(spec, L.DepthwiseConv):
        _expect_channels(name, x, spec.channels)
        return _spatial(name, x, spec.k_h, spec.k_w, spec.stride, spec.dilation,
                        same_padding(spec.k_h, spec.dilation),
                        same_padding(spec.k_w, spec.dilation), spec.out_ch)
    if isinstance(spec, L.PointwiseConv):
        _expect_channels(name, x, spec.in_ch)
        return TensorShape(x.height, x.width, spec.out_ch)
    if isinstance(spec, L.TransposedConv):
        _expect_channels(name, x, spec.in_ch)
        h = transposed_out(x.height, spec.k, spec.stride, spec.padding, spec.output_padding)
        w = transposed_out(x.width, spec.k, spec.stride, spec.padding, spec.output_padding)
        if h < 1 or w < 1:
            raise ShapeError(name, "transposed conv produces an empty map")
        return TensorShape(h, w, spec.out_ch)
    if isinstance(spec, L.MaxPool):
        return _spatial(name, x, spec.k, spec.k, spec.stride, 1, 0, 0, x.channels)
    if isinstance(spec, L.BatchNorm):
        _expect_channels(name, x, spec.channels)
        return x
    if isinstance(spec, L.ReLU):
        return x
    if isinstance(spec, L.BilinearUpsample):
        return TensorShape(x.height * spec.factor, x.width * spec.factor, x.channels)
    if isinstance(spec, L.ChannelShuffle):
        if x.channels % spec.groups:
            raise ShapeError(name, f"{x.channels} channels not divisible by {spec.groups} groups")
        return x
    if isinstance(spec, L.Concat):
        hw = {(s.height, s.width) for s in ins}
        if len(hw) != 1:
            raise ShapeError(name, f"concat inputs disagree spatially: {[str(s) for s in ins]}")
        return TensorShape(x.height, x.width, sum(s.channels for s in ins))
    if isinstance(spec, L.Add):
        if len(set(ins)) != 1:
            raise ShapeError(name, f"add inputs differ: {[str(s) for s in ins]}")
        return x
    if isinstance(spec, L.ArgmaxChannels):
        return TensorShape(x.height, x.width, 1)

    if isinstance(spec, L.InitialBlock):
        _expect_channels(name, x, spec.in_ch)
        return _halve(name, x, spec.out_ch)
    if isinstance(spec, L.DownsampleBlock):
        _expect_channels(name, x, spec.in_ch)
        if spec.branch == "multiplier" and (spec.out_ch - spec.in_ch) % spec.in_ch:
            raise ShapeError(name, "channel multiplier (out_ch - in_ch) / in_ch is not an integer")
        if spec.shuffle and spec.out_ch % 2:
            raise ShapeError(name, f"{spec.out_ch} channels not divisible by 2 shuffle groups")
        return _halve(name, x, spec.out_ch)
    if isinstance(spec, (L.SFRB, L.ResidualVariant)):
        _expect_channels(name, x, spec.channels)
        return x
    if isinstance(spec, L.DecoderUpsample):
        _expect_channels(name, x, spec.in_ch)
        return TensorShape(2 * x.height, 2 * x.width, spec.out_ch)
    raise TypeError(f"no shape rule for {spec.op}")


def infer_shapes(graph: NetworkGraph, input: TensorShape | None = None
                 ) -> dict[str, tuple[tuple[TensorShape, ...], TensorShape]]:
    """Map every node to ``(input shapes, output shape)``.

    Raises :class:`GraphError` for structurally invalid graphs and
    :class:`ShapeError` (naming the node) on the first inconsistency.
    """
    violations = validate(graph)
    if violations:
        raise GraphError(violations)
    shapes = {INPUT: input or graph.input_shape}
    result = {}
    for name in graph.order():
        node = graph.nodes[name]
        ins = tuple(shapes[src] for src in node.inputs)
        out = infer_node(name, node.spec, list(ins))
        shapes[name] = out
        result[name] = (ins, out)
    return result
