import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from sfrlab import imageio
from sfrlab.arch import PRESET_IDS
from sfrlab.cli import main
from sfrlab.weights import read_tensors


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def fixture_image(tmp_path_factory):
    path = tmp_path_factory.mktemp("img") / "tile.png"
    rng = np.random.default_rng(11)
    Image.fromarray(rng.integers(0, 256, (512, 512, 3), dtype=np.uint8)).save(path)
    return path


def test_presets(capsys):
    code, out, _ = run(capsys, "presets")
    assert code == 0 and out.split() == list(PRESET_IDS)
    code, out, _ = run(capsys, "presets", "--json")
    assert json.loads(out) == list(PRESET_IDS)


def test_analyze_json(capsys):
    code, out, _ = run(capsys, "analyze", "--preset", "esfnet-base", "--input", "512x512x3", "--json")
    assert code == 0
    d = json.loads(out)
    assert abs(d["total_flops"] / 2.514e9 - 1) <= 0.05
    assert d["receptive_field"] == 599
    assert d["input"] == [512, 512, 3]


def test_analyze_block_table_matches_json(capsys):
    code, out, _ = run(capsys, "analyze", "--preset", "block:Bt-Fac-Dw", "--input", "64x64x128")
    assert code == 0
    assert "35,258,368" in out and "8,832" in out
    _, js, _ = run(capsys, "analyze", "--preset", "block:Bt-Fac-Dw", "--input", "64x64x128", "--json")
    d = json.loads(js)
    for layer in d["layers"]:
        assert layer["id"] in out
    assert f"{d['activation_peak_bytes']:,}" in out


def test_analyze_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--preset", "esfnet-base", "--input", "0x0x3"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--preset", "esfnet-base", "--bogus"])
    assert exc.value.code == 2
    code, _, err = run(capsys, "analyze", "--preset", "esfnet-giant")
    assert code == 1 and "unknown preset" in err


def test_analyze_arch_file(capsys, tmp_path):
    path = tmp_path / "g.json"
    assert run(capsys, "lower", "--preset", "esf-mini", "--out", str(path))[0] == 0
    code, out, _ = run(capsys, "analyze", "--arch", str(path), "--json")
    _, ref, _ = run(capsys, "analyze", "--preset", "esf-mini", "--json")
    assert code == 0
    assert json.loads(out)["total_flops"] == json.loads(ref)["total_flops"]
    (tmp_path / "bad.json").write_text("{not json")
    assert run(capsys, "analyze", "--arch", str(tmp_path / "bad.json"))[0] == 1


@pytest.mark.parametrize("pid,rf,end", [("esf-mini", 535, "16_sfrb_d16"),
                                        ("esfnet-nodilation", 183, "16_sfrb_d1")])
def test_rf(capsys, pid, rf, end):
    code, out, _ = run(capsys, "rf", "--preset", pid)
    assert code == 0 and out.rstrip().endswith(f"receptive field {rf} at {end}/11_relu")
    _, js, _ = run(capsys, "rf", "--preset", pid, "--json")
    assert json.loads(js)[-1]["rf"] == rf


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--table", "table2")
    assert code == 0
    assert "14 pass, 2 flagged, 0 fail" in out
    assert "17,792" in out and "197,632" in out and "17.1792" in out
    code, out, _ = run(capsys, "verify", "--table", "table3", "--json")
    d = json.loads(out)
    assert code == 0 and d["ok"] and d["counts"]["fail"] == 0
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--table", "table9"])
    assert exc.value.code == 2


def test_verify_exit_3_on_failure(capsys, monkeypatch):
    from sfrlab import cli

    real = cli.compute_reports

    def broken(table):
        reports = real(table)
        reports["block:Bt-Dw"] = reports["block:NonBt"]
        return reports

    monkeypatch.setattr(cli, "compute_reports", broken)
    assert run(capsys, "verify", "--table", "table2")[0] == 3


def test_init_weights_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.sfrw", tmp_path / "b.sfrw"
    assert run(capsys, "init-weights", "--preset", "esfnet-base", "--seed", "7", "--out", str(a))[0] == 0
    assert run(capsys, "init-weights", "--preset", "esfnet-base", "--seed", "7", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_end_to_end(capsys, tmp_path, fixture_image, monkeypatch):
    weights = tmp_path / "w.sfrw"
    run(capsys, "init-weights", "--preset", "esfnet-base", "--seed", "7", "--out", str(weights))
    m1, m2 = tmp_path / "m1.png", tmp_path / "m2.pgm"
    code, _, _ = run(capsys, "infer", "--preset", "esfnet-base", "--weights", str(weights),
                     "--image", str(fixture_image), "--out", str(m1), "--tap", "16_sfrb_d16")
    assert code == 0
    monkeypatch.setenv("SFRLAB_THREADS", "1")
    code, _, _ = run(capsys, "infer", "--preset", "esfnet-base", "--weights", str(weights),
                     "--image", str(fixture_image), "--out", str(m2))
    assert code == 0
    a, b = imageio.read_mask(m1), imageio.read_mask(m2)
    assert a.shape == (512, 512)
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(np.asarray(Image.open(m1)))) <= {0, 255}
    taps = read_tensors(m1.with_suffix(".taps.sfrw"))
    assert taps["16_sfrb_d16/11_relu.output"].shape == (128, 64, 64)
    code, out, _ = run(capsys, "iou", "--pred", str(m1), "--gt", str(m2))
    assert code == 0 and out.strip().endswith("IoU 1.0000")


def test_infer_rejects_bad_sizes(capsys, tmp_path, monkeypatch):
    weights = tmp_path / "w.sfrw"
    run(capsys, "init-weights", "--preset", "esf-mini-ex", "--seed", "1", "--out", str(weights))
    img = tmp_path / "odd.png"
    Image.fromarray(np.zeros((500, 500, 3), np.uint8)).save(img)
    code, _, err = run(capsys, "infer", "--preset", "esf-mini-ex", "--weights", str(weights),
                       "--image", str(img), "--out", str(tmp_path / "o.png"))
    assert code == 1 and "divisible by 8" in err
    monkeypatch.setenv("SFRLAB_THREADS", "zero")
    code, _, _ = run(capsys, "infer", "--preset", "esf-mini-ex", "--weights", str(weights),
                     "--image", str(img), "--out", str(tmp_path / "o.png"))
    assert code == 2


def test_infer_wrong_weights(capsys, tmp_path, fixture_image):
    weights = tmp_path / "w.sfrw"
    run(capsys, "init-weights", "--preset", "esf-mini", "--seed", "1", "--out", str(weights))
    code, _, err = run(capsys, "infer", "--preset", "esfnet-base", "--weights", str(weights),
                       "--image", str(fixture_image), "--out", str(tmp_path / "o.png"))
    assert code == 1 and "missing weight" in err.lower()


def test_iou_fixture_and_mismatch(capsys, tmp_path):
    pred, gt, other = tmp_path / "p.png", tmp_path / "g.png", tmp_path / "o.png"
    imageio.write_mask(np.array([[1, 1], [0, 0]]), pred)
    imageio.write_mask(np.array([[1, 0], [1, 0]]), gt)
    imageio.write_mask(np.zeros((3, 3), int), other)
    code, out, _ = run(capsys, "iou", "--pred", str(pred), "--gt", str(gt))
    assert code == 0
    assert "tp=1 fp=1 fn=1 tn=1" in out and "IoU 0.3333" in out
    assert run(capsys, "iou", "--pred", str(pred), "--gt", str(other))[0] == 1


def test_mask_io_round_trip(tmp_path):
    mask = np.random.default_rng(0).integers(0, 2, (8, 16))
    for name in ("m.png", "m.pgm"):
        imageio.write_mask(mask, tmp_path / name)
        np.testing.assert_array_equal(imageio.read_mask(tmp_path / name), mask)
    with pytest.raises(ValueError):
        imageio.write_mask(mask, tmp_path / "m.jpg")
    rgb = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(rgb)
    with pytest.raises(ValueError):
        imageio.read_mask(rgb)
    with pytest.raises(ValueError):
        imageio.read_rgb(tmp_path / "m.png")


def test_network_input_scaling():
    rgb = np.array([[[0, 255, 51]]], np.uint8)
    x = imageio.to_network_input(rgb)
    assert x.shape == (3, 1, 1) and x.dtype == np.float32
    assert x.ravel().tolist() == [0.0, 1.0, np.float32(51) / np.float32(255)]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sfrlab", "rf", "--preset", "esf-mini-ex"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "receptive field 519" in proc.stdout
