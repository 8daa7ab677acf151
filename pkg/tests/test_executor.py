import struct

import numpy as np
import pytest

from sfrlab.arch import INPUT, PRESET_IDS, NetworkGraph, TensorShape, build_preset, lower
from sfrlab.arch import layers as L
from sfrlab.cost import graph_cost
from sfrlab.errors import BadMagicError, ShapeError, MissingWeightError, TruncatedFileError, VersionMismatchError, WeightShapeError
from sfrlab.executor import activation_footprint, forward
from sfrlab.weights import (
    WeightStore,
    init_weights,
    load_weights,
    param_shapes,
    read_tensors,
    save_weights,
    write_tensors,
)


def lowered(pid):
    return lower(build_preset(pid))


@pytest.mark.parametrize("pid", PRESET_IDS)
def test_weight_count_matches_cost_model(pid):
    g = lowered(pid)
    store = init_weights(g, 0)
    costs = graph_cost(g).entries
    for name in g.nodes:
        assert store.param_count(name) == costs[name].params, name
    assert store.param_count() == graph_cost(g).total_params


def test_init_determinism():
    g = lowered("esf-mini-ex")
    assert init_weights(g, 7) == init_weights(g, 7)
    assert init_weights(g, 7) != init_weights(g, 8)


def test_init_requires_lowered():
    with pytest.raises(ValueError):
        init_weights(build_preset("esfnet-base"), 0)


def test_sfrw_round_trip(tmp_path):
    g = lowered("esf-shuffle-down")
    store = init_weights(g, 3)
    path = tmp_path / "w.sfrw"
    save_weights(store, path)
    assert load_weights(path, g) == store
    raw = path.read_bytes()
    assert raw[:4] == b"SFRW"
    assert struct.unpack("<II", raw[4:12]) == (1, len(store.flat()))


def test_sfrw_errors(tmp_path):
    path = tmp_path / "w.sfrw"
    write_tensors({"a.weight": np.ones((2, 3), np.float32)}, path)
    raw = path.read_bytes()
    (tmp_path / "magic").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BadMagicError):
        read_tensors(tmp_path / "magic")
    (tmp_path / "ver").write_bytes(raw[:4] + struct.pack("<I", 2) + raw[8:])
    with pytest.raises(VersionMismatchError):
        read_tensors(tmp_path / "ver")
    (tmp_path / "trunc").write_bytes(raw[:-3])
    with pytest.raises(TruncatedFileError):
        read_tensors(tmp_path / "trunc")


def test_mismatched_graph_rejected(tmp_path):
    path = tmp_path / "mini.sfrw"
    save_weights(init_weights(lowered("esf-mini"), 0), path)
    with pytest.raises(MissingWeightError):
        load_weights(path, lowered("esfnet-base"))
    store = init_weights(lowered("esf-mini"), 0)
    node = next(iter(store.tensors))
    store.tensors[node]["weight"] = store.tensors[node]["weight"][:1]
    with pytest.raises(WeightShapeError):
        store.check_against(lowered("esf-mini"))


def _single(spec, shape):
    return NetworkGraph.chain("one", [("n", spec)], input_shape=shape)


def test_footprint_single_relu():
    shape = TensorShape(5, 7, 3)
    assert activation_footprint(_single(L.ReLU(), shape)) == 2 * 4 * 5 * 7 * 3


def test_footprint_ordering_between_presets():
    base = activation_footprint(lowered("esfnet-base"))
    mini_ex = activation_footprint(lowered("esf-mini-ex"))
    assert base >= mini_ex > 0


def _run(g, seed=0, shape=None, **kw):
    shape = shape or g.input_shape
    x = np.random.default_rng(seed).random((shape.channels, shape.height, shape.width), dtype=np.float32)
    return forward(g, init_weights(g, seed), x, **kw)


@pytest.mark.parametrize("pid", ["esf-shuffle-down", "esf-enet-down", "esf-trans2x4x", "esf-interp8x",
                                 "esf-nonbt-fac-dw", "block:Bt", "block:NonBt-Dw"])
def test_trace_peak_matches_model(pid):
    g = lowered(pid)
    small_input = TensorShape(32, 32, 3) if g.input_shape.channels == 3 else TensorShape(8, 8, 128)
    out, trace, _ = _run(g, shape=small_input)
    assert trace.peak_bytes == activation_footprint(g, small_input)
    assert trace.order == list(g.order())


def test_forward_output_shape_and_determinism():
    g = lowered("esfnet-base")
    shape = TensorShape(64, 64, 3)
    out1, t1, _ = _run(g, shape=shape)
    out2, t2, _ = _run(g, shape=shape)
    assert out1.shape == (2, 64, 64)
    assert out1.tobytes() == out2.tobytes()
    assert [r.checksum for r in t1.records] == [r.checksum for r in t2.records]
    out3, t3, _ = _run(g, shape=shape, threads=4)
    assert out3.tobytes() == out1.tobytes()


def test_taps():
    g = lowered("esf-mini-ex")
    _, trace, tapped = _run(g, shape=TensorShape(32, 32, 3), taps=["02_down/06_relu"])
    assert list(tapped) == ["02_down/06_relu"]
    rec = next(r for r in trace.records if r.node == "02_down/06_relu")
    assert tapped["02_down/06_relu"].shape == (rec.shape.channels, rec.shape.height, rec.shape.width)
    with pytest.raises(KeyError):
        _run(g, shape=TensorShape(32, 32, 3), taps=["nope"])


def test_zero_input_stays_zero_until_beta():
    g = NetworkGraph.chain("lin", [
        ("c1", L.StandardConv(3, 3, 1, 1, 2, 4)),
        ("c2", L.PointwiseConv(4, 4)),
        ("bn", L.BatchNorm(4)),
    ], input_shape=TensorShape(6, 6, 2))
    store = init_weights(g, 1)
    store.tensors["bn"]["beta"] = np.full(4, 0.5, np.float32)
    _, _, tapped = forward(g, store, np.zeros((2, 6, 6), np.float32), taps=["c1", "c2", "bn"])
    assert not tapped["c1"].any() and not tapped["c2"].any()
    assert np.all(tapped["bn"] == np.float32(0.5))


def test_residual_identity():
    g = lower(_single(L.SFRB(8), TensorShape(6, 6, 8)))
    store = init_weights(g, 2)
    for name, tensors in store.tensors.items():
        if "weight" in tensors:
            tensors["weight"][...] = 0
    x = np.random.default_rng(2).standard_normal((8, 6, 6)).astype(np.float32)
    out, _, _ = forward(g, store, x)
    np.testing.assert_array_equal(out, np.maximum(x, 0))


def test_forward_rejects_composite_and_bad_input():
    with pytest.raises(ValueError):
        forward(build_preset("block:Bt"), WeightStore(), np.zeros((128, 64, 64), np.float32))
    g = lowered("block:Bt")
    with pytest.raises(ShapeError):
        forward(g, init_weights(g, 0), np.zeros((64, 8, 8), np.float32))


def test_param_shapes():
    assert param_shapes(L.DepthwiseConv(3, 3, 2, 1, 16, 3)) == {"weight": (48, 1, 3, 3)}
    assert param_shapes(L.ReLU()) == {}
    assert set(param_shapes(L.BatchNorm(4))) == {"gamma", "beta", "mean", "var"}


def test_input_is_virtual():
    assert INPUT not in lowered("block:Bt").nodes
