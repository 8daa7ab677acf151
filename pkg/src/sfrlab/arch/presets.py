"""ESFNet family presets and the single-block ablation graphs."""

from __future__ import annotations

from ..errors import UnknownPresetError
from . import layers as L
from .graph import NetworkGraph
from .layers import TensorShape

__all__ = ["PRESET_IDS", "NETWORK_PRESETS", "VARIANT_PRESETS", "BLOCK_PRESETS", "build_preset", "STAGE2_DILATIONS"]

STAGE2_DILATIONS = (1, 2, 1, 4, 1, 8, 1, 16)

NETWORK_INPUT = TensorShape(512, 512, 3)
BLOCK_INPUT = TensorShape(64, 64, 128)

NETWORK_PRESETS = (
    "esfnet-base",
    "esf-mini",
    "esf-mini-ex",
    "esfnet-nodilation",
    "esf-enet-down",
    "esf-shuffle-down",
    "esf-trans2x4x",
    "esf-trans8x",
    "esf-interp8x",
)
#: whole-network residual ablations: every SFRB swapped for another block kind
VARIANT_PRESETS = tuple(f"esf-{kind.lower()}" for kind in L.RESIDUAL_KINDS if kind != "Bt-Fac-Dw")
BLOCK_PRESETS = tuple(f"block:{kind}" for kind in L.RESIDUAL_KINDS)
PRESET_IDS = NETWORK_PRESETS + VARIANT_PRESETS + BLOCK_PRESETS


def _upsample(k, stride, cin, cout):
    # centred padding; output_padding makes the result exactly stride * H
    return L.TransposedConv(k, stride, cin, cout, output_padding=stride - 1, padding=(k - 1) // 2)


def _base_rows(*, dilations=STAGE2_DILATIONS, enet_down=False, shuffle=False, residual=None):
    """The 23 top-level rows, keyed by their two-digit row ID."""

    def sfrb(c, d=1):
        return L.SFRB(c, d) if residual is None else L.ResidualVariant(residual, c, d)

    def down(cin, cout):
        if enet_down:
            return L.InitialBlock(cin, cout)
        return L.DownsampleBlock(cin, cout, shuffle=shuffle)

    rows = [("01_initial", L.InitialBlock(3, 16)), ("02_down", down(16, 64))]
    rows += [(f"{i:02d}_sfrb", sfrb(64)) for i in range(3, 8)]
    rows.append(("08_down", down(64, 128)))
    rows += [(f"{9 + i:02d}_sfrb_d{d}", sfrb(128, d)) for i, d in enumerate(dilations)]
    rows += [
        ("17_up", L.DecoderUpsample(128, 64)),
        ("18_sfrb", sfrb(64)),
        ("19_sfrb", sfrb(64)),
        ("20_up", L.DecoderUpsample(64, 16)),
        ("21_sfrb", sfrb(16)),
        ("22_sfrb", sfrb(16)),
        # final layer emits class scores, so no BatchNorm/ReLU after it
        ("23_out", _upsample(3, 2, 16, 2)),
    ]
    return rows


ENCODER_END_ROW = "16_"


def _network(name, rows):
    end = next(n for n, _ in rows if n.startswith(ENCODER_END_ROW))
    return NetworkGraph.chain(name, rows, input_shape=NETWORK_INPUT, encoder_end=end)


def _encoder(rows):
    names = [n for n, _ in rows]
    return rows[: next(i for i, n in enumerate(names) if n.startswith(ENCODER_END_ROW)) + 1]


def build_preset(preset_id: str) -> NetworkGraph:
    """Composite-block graph for a known preset id.

    >>> len(build_preset("esfnet-base"))
    23
    """
    if preset_id == "esfnet-base":
        return _network(preset_id, _base_rows())
    if preset_id == "esfnet-nodilation":
        return _network(preset_id, _base_rows(dilations=(1,) * 8))
    if preset_id == "esf-mini":
        rows = [r for r in _base_rows() if r[0] not in {"09_sfrb_d1", "11_sfrb_d1", "13_sfrb_d1", "15_sfrb_d1"}]
        return _network(preset_id, rows)
    if preset_id == "esf-mini-ex":
        drop = {"09_sfrb_d1", "11_sfrb_d1", "13_sfrb_d1", "15_sfrb_d1", "06_sfrb", "07_sfrb"}
        return _network(preset_id, [r for r in _base_rows() if r[0] not in drop])
    if preset_id == "esf-enet-down":
        return _network(preset_id, _base_rows(enet_down=True))
    if preset_id == "esf-shuffle-down":
        return _network(preset_id, _base_rows(shuffle=True))
    if preset_id == "esf-trans2x4x":
        rows = _encoder(_base_rows()) + [
            ("17_up", L.DecoderUpsample(128, 64)),
            ("18_sfrb", L.SFRB(64, 1)),
            ("19_sfrb", L.SFRB(64, 1)),
            ("20_out", _upsample(3, 4, 64, 2)),
        ]
        return _network(preset_id, rows)
    if preset_id == "esf-trans8x":
        rows = _encoder(_base_rows()) + [("17_out", _upsample(3, 8, 128, 2))]
        return _network(preset_id, rows)
    if preset_id == "esf-interp8x":
        rows = _encoder(_base_rows()) + [
            ("17_score", L.PointwiseConv(128, 2)),
            ("18_out", L.BilinearUpsample(8)),
        ]
        return _network(preset_id, rows)
    if preset_id in VARIANT_PRESETS:
        kind = next(k for k in L.RESIDUAL_KINDS if f"esf-{k.lower()}" == preset_id)
        return _network(preset_id, _base_rows(residual=kind))
    if preset_id in BLOCK_PRESETS:
        kind = preset_id.split(":", 1)[1]
        spec = L.SFRB(128, 1) if kind == "Bt-Fac-Dw" else L.ResidualVariant(kind, 128, 1)
        return NetworkGraph.chain(preset_id, [("block", spec)], input_shape=BLOCK_INPUT)
    raise UnknownPresetError(preset_id)
