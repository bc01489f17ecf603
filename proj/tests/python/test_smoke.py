import json

import numpy as np
import pytest

import diffdepth as dd


def test_version():
    assert dd.__version__ == "0.1.0"


def test_codec_roundtrip():
    rng = np.random.default_rng(3)
    depth = rng.uniform(0.6, 75.0, size=(16, 16)).astype(np.float32)
    valid = np.ones((16, 16), dtype=bool)
    for mode in ("log", "linear"):
        enc = dd.encode_depth(depth, valid, mode=mode)
        assert enc.shape == (16, 16)
        assert np.abs(enc).max() <= 1.0
        back = dd.decode_depth(enc, mode=mode)
        assert np.abs(back - depth).max() / depth.max() < 1e-4


def test_encode_marks_invalid_as_zero():
    depth = np.full((4, 4), 5.0, dtype=np.float32)
    valid = np.ones((4, 4), dtype=bool)
    valid[1, 2] = False
    enc = dd.encode_depth(depth, valid)
    assert enc[1, 2] == 0.0


def test_schedule_endpoints_and_variance():
    a0, s0 = dd.alpha_sigma(0.0)
    assert a0 == 1.0 and s0 == 0.0
    a, s = dd.alpha_sigma(0.3)
    assert abs(a * a + s * s - 1.0) < 1e-12


def test_camera_math():
    assert abs(dd.fov_to_cond(90.0) - 1.0) < 1e-12
    f = dd.focal_from_fov(70.0, 64)
    assert abs(dd.fov_from_focal(f, 64) - 70.0) < 1e-9
    assert dd.perturb_fov_cond(0.5, 2.0) == pytest.approx(1.0)


def test_render_sample_shapes_and_determinism():
    s = dd.render_sample("outdoor", seed=11, height=32, width=48, fov_deg=65.0)
    assert s["rgb"].shape == (32, 48, 3)
    assert s["depth"].shape == (32, 48)
    assert s["valid"].shape == (32, 48)
    assert s["fov_deg"] == 65.0
    assert s["regime"] == "outdoor"
    assert np.abs(s["rgb"]).max() <= 1.0
    assert s["valid"].any()
    assert (s["depth"][s["valid"]] > 0).all()

    again = dd.render_sample("outdoor", seed=11, height=32, width=48, fov_deg=65.0)
    assert (again["rgb"] == s["rgb"]).all()
    assert (again["depth"] == s["depth"]).all()

    other = dd.render_sample("outdoor", seed=12, height=32, width=48, fov_deg=65.0)
    assert not (other["rgb"] == s["rgb"]).all()


def test_infill_fills_from_neighbor():
    depth = np.full((3, 3), 2.0, dtype=np.float32)
    valid = np.ones((3, 3), dtype=bool)
    depth[0, 0] = 0.0
    valid[0, 0] = False
    filled = dd.infill_depth(depth, valid)
    assert filled[0, 0] == 2.0


def test_metrics_hand_example():
    pred = np.array([[2.0, 5.0]], dtype=np.float32)
    gt = np.array([[2.0, 4.0]], dtype=np.float32)
    valid = np.ones((1, 2), dtype=bool)
    r = dd.evaluate_depth(pred, gt, valid, min_depth=0.5, max_depth=80.0)
    assert r["rel"] == 0.125
    assert r["delta1"] == 0.5
    assert r["n_pixels"] == 2

    perfect = dd.evaluate_depth(gt, gt, valid)
    assert perfect["rel"] == 0.0 and perfect["delta1"] == 1.0


def test_error_mapping():
    ones = np.ones((2, 2), dtype=np.float32)
    valid = np.ones((2, 2), dtype=bool)
    with pytest.raises(ValueError):
        dd.decode_depth(ones, mode="cubic")
    with pytest.raises(RuntimeError):
        dd.evaluate_depth(ones, ones, np.zeros((2, 2), dtype=bool))
    with pytest.raises(ArithmeticError):
        bad = ones.copy()
        bad[0, 0] = np.nan
        dd.evaluate_depth(bad, ones * 2.0, valid)


def test_generate_dataset(tmp_path):
    out = tmp_path / "data"
    n = dd.generate_dataset(str(out), n=3, regime_mix="mixed", height=16,
                            width=16, seed=4)
    assert n == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["samples"]) == 3
    assert (out / "rgb_000000.ppm").exists()


def test_train_and_infer(tmp_path):
    data_dir = tmp_path / "data"
    dd.generate_dataset(str(data_dir), n=2, regime_mix="indoor", height=16,
                        width=16, fov_lo=60.0, fov_hi=80.0, seed=5)
    config = {
        "denoiser": {"base_channels": 4, "depth_levels": 2, "embed_dim": 8},
        "codec": {"mode": "log", "d_min": 0.5, "d_max": 12.0},
        "p_unroll": 0.0,
        "steps": 2,
        "batch_size": 1,
        "log_every": 1,
        "seed": 1,
    }
    run_dir = tmp_path / "run"
    out = dd.train(str(data_dir), str(run_dir), json.dumps(config))
    assert out["steps_run"] == 2
    assert np.isfinite(out["final_loss"])

    sample = dd.render_sample("indoor", seed=9, height=16, width=16,
                              fov_deg=70.0)
    depth = dd.infer(str(run_dir / "checkpoint"), sample["rgb"], fov_deg=70.0,
                     steps=2, n_samples=1, seed=0)
    assert depth.shape == (16, 16)
    assert np.isfinite(depth).all()
    assert (depth > 0).all()

    with pytest.raises(RuntimeError):
        dd.infer(str(tmp_path / "missing"), sample["rgb"], fov_deg=70.0)
