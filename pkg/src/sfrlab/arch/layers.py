"""Primitive layers, composite blocks and the tensor shape record.

Every spec is a frozen dataclass so graphs built from them are hashable,
comparable and safe to share between threads.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from typing import ClassVar

__all__ = [
    "TensorShape",
    "Spec",
    "StandardConv",
    "DepthwiseConv",
    "PointwiseConv",
    "TransposedConv",
    "MaxPool",
    "BatchNorm",
    "ReLU",
    "BilinearUpsample",
    "ChannelShuffle",
    "Concat",
    "Add",
    "ArgmaxChannels",
    "InitialBlock",
    "DownsampleBlock",
    "SFRB",
    "ResidualVariant",
    "DecoderUpsample",
    "RESIDUAL_KINDS",
    "SPEC_TYPES",
    "spec_from_dict",
]


@dataclass(frozen=True)
class TensorShape:
    """Spatial size and channel count of one activation map."""

    height: int
    width: int
    channels: int

    def __post_init__(self):
        for name in ("height", "width", "channels"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"TensorShape.{name} must be a positive integer, got {value!r}")

    @property
    def numel(self) -> int:
        return self.height * self.width * self.channels

    @classmethod
    def parse(cls, text: str) -> "TensorShape":
        """Parse ``"512x512x3"`` (H x W x C)."""
        m = re.fullmatch(r"\s*(\d+)\s*[xX×]\s*(\d+)\s*[xX×]\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"expected HxWxC, got {text!r}")
        return cls(*(int(g) for g in m.groups()))

    def as_list(self) -> list[int]:
        return [self.height, self.width, self.channels]

    def __str__(self):
        return f"{self.height}x{self.width}x{self.channels}"


class Spec:
    """Shared behaviour of layer and block records.

    ``arity`` is the number of inputs a node of this kind consumes
    (``None`` means two or more).
    """

    arity: ClassVar[int | None] = 1
    composite: ClassVar[bool] = False

    @property
    def op(self) -> str:
        return type(self).__name__

    def params(self) -> dict:
        return dataclasses.asdict(self)

    def check(self) -> list[str]:
        """Static parameter violations (no shape information needed)."""
        problems = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.metadata.get("positive") and (not isinstance(value, int) or value < 1):
                problems.append(f"{f.name} must be a positive integer (got {value!r})")
            if f.metadata.get("non_negative") and (not isinstance(value, int) or value < 0):
                problems.append(f"{f.name} must be a non-negative integer (got {value!r})")
        return problems


def _pos(default=dataclasses.MISSING):
    return dataclasses.field(default=default, metadata={"positive": True})


@dataclass(frozen=True)
class StandardConv(Spec):
    k_h: int = _pos()
    k_w: int = _pos()
    stride: int = _pos()
    dilation: int = _pos()
    in_ch: int = _pos()
    out_ch: int = _pos()


@dataclass(frozen=True)
class DepthwiseConv(Spec):
    """Grouped conv with one group per input channel.

    Each input channel emits ``multiplier`` output maps.
    """

    k_h: int = _pos()
    k_w: int = _pos()
    stride: int = _pos()
    dilation: int = _pos()
    channels: int = _pos()
    multiplier: int = _pos(1)

    @property
    def out_ch(self) -> int:
        return self.channels * self.multiplier


@dataclass(frozen=True)
class PointwiseConv(Spec):
    in_ch: int = _pos()
    out_ch: int = _pos()


@dataclass(frozen=True)
class TransposedConv(Spec):
    k: int = _pos()
    stride: int = _pos()
    in_ch: int = _pos()
    out_ch: int = _pos()
    output_padding: int = dataclasses.field(default=0, metadata={"non_negative": True})
    padding: int = dataclasses.field(default=0, metadata={"non_negative": True})

    def check(self):
        problems = super().check()
        if not problems and self.output_padding >= self.stride:
            problems.append("output_padding must be smaller than stride")
        return problems


@dataclass(frozen=True)
class MaxPool(Spec):
    k: int = _pos()
    stride: int = _pos()


@dataclass(frozen=True)
class BatchNorm(Spec):
    channels: int = _pos()


@dataclass(frozen=True)
class ReLU(Spec):
    pass


@dataclass(frozen=True)
class BilinearUpsample(Spec):
    factor: int = _pos()


@dataclass(frozen=True)
class ChannelShuffle(Spec):
    groups: int = _pos()


@dataclass(frozen=True)
class Concat(Spec):
    arity: ClassVar[int | None] = None


@dataclass(frozen=True)
class Add(Spec):
    arity: ClassVar[int | None] = 2


@dataclass(frozen=True)
class ArgmaxChannels(Spec):
    pass


# -- composite blocks -------------------------------------------------------


@dataclass(frozen=True)
class InitialBlock(Spec):
    """3x3/s2 conv with ``out_ch - in_ch`` filters beside a 2x2/s2 max-pool."""

    composite: ClassVar[bool] = True
    in_ch: int = _pos(3)
    out_ch: int = _pos(16)

    def check(self):
        problems = super().check()
        if not problems and self.out_ch <= self.in_ch:
            problems.append("out_ch must exceed in_ch (conv branch needs out_ch - in_ch filters)")
        return problems


@dataclass(frozen=True)
class DownsampleBlock(Spec):
    """Stride-2 depthwise conv branch beside a 2x2/s2 max-pool, concatenated.

    ``branch="separable"`` runs a depthwise 3x3/s2 conv then a 1x1 conv to
    ``out_ch - in_ch`` maps; ``branch="multiplier"`` uses a single depthwise
    3x3/s2 conv with channel multiplier ``(out_ch - in_ch) / in_ch``.
    """

    composite: ClassVar[bool] = True
    in_ch: int = _pos()
    out_ch: int = _pos()
    shuffle: bool = False
    branch: str = "separable"

    def check(self):
        problems = super().check()
        if self.branch not in ("separable", "multiplier"):
            problems.append(f"unknown branch {self.branch!r}")
        if not problems:
            grow = self.out_ch - self.in_ch
            if grow <= 0:
                problems.append(f"out_ch ({self.out_ch}) must exceed in_ch ({self.in_ch})")
            elif self.branch == "multiplier" and grow % self.in_ch:
                problems.append(
                    f"out_ch - in_ch ({grow}) must be a multiple of in_ch ({self.in_ch})"
                )
        return problems

    @property
    def multiplier(self) -> int:
        return (self.out_ch - self.in_ch) // self.in_ch


@dataclass(frozen=True)
class SFRB(Spec):
    """Bottleneck residual block with dilated depthwise 3x1 and 1x3 convs."""

    composite: ClassVar[bool] = True
    channels: int = _pos()
    dilation: int = _pos(1)
    compress_ratio: int = _pos(4)

    def check(self):
        problems = super().check()
        if not problems and self.channels % self.compress_ratio:
            problems.append(
                f"channels ({self.channels}) not divisible by compress_ratio ({self.compress_ratio})"
            )
        return problems


RESIDUAL_KINDS = (
    "Bt",
    "Bt-Fac",
    "Bt-Dw",
    "Bt-Fac-Dw",
    "NonBt",
    "NonBt-Fac",
    "NonBt-Dw",
    "NonBt-Fac-Dw",
)


@dataclass(frozen=True)
class ResidualVariant(Spec):
    composite: ClassVar[bool] = True
    kind: str
    channels: int = _pos()
    dilation: int = _pos(1)

    def check(self):
        problems = super().check()
        if self.kind not in RESIDUAL_KINDS:
            problems.append(f"unknown residual kind {self.kind!r}")
        elif self.kind.startswith("Bt") and not problems and self.channels % 4:
            problems.append(f"channels ({self.channels}) not divisible by compress_ratio (4)")
        return problems


@dataclass(frozen=True)
class DecoderUpsample(Spec):
    """Transposed 3x3/s2 conv (H -> 2H) followed by BatchNorm and ReLU."""

    composite: ClassVar[bool] = True
    in_ch: int = _pos()
    out_ch: int = _pos()


SPEC_TYPES: dict[str, type[Spec]] = {
    cls.__name__: cls
    for cls in (
        StandardConv,
        DepthwiseConv,
        PointwiseConv,
        TransposedConv,
        MaxPool,
        BatchNorm,
        ReLU,
        BilinearUpsample,
        ChannelShuffle,
        Concat,
        Add,
        ArgmaxChannels,
        InitialBlock,
        DownsampleBlock,
        SFRB,
        ResidualVariant,
        DecoderUpsample,
    )
}


def spec_from_dict(op: str, params: dict | None = None) -> Spec:
    try:
        cls = SPEC_TYPES[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}") from None
    params = dict(params or {})
    known = {f.name for f in dataclasses.fields(cls)}
    extra = set(params) - known
    if extra:
        raise ValueError(f"{op}: unexpected params {sorted(extra)}")
    return cls(**params)
