import json
import time
from pathlib import Path

import numpy as np
import pytest

from looserope import (
    AttentionConfig,
    AttentionInputs,
    ModulationCurve,
    PipelineConfig,
    PositionGrid,
    SaliencyMap,
    modulated_attention,
    render_attention_map,
    run_pipeline,
    schedule_params,
    x0_snapshot,
)
from looserope.errors import ConfigInvalid, IndexOutOfRange
from looserope.formats import read_jsonl, write_mask, write_pfm, write_tnsr
from looserope.pipeline import write_outputs

ROOT = Path(__file__).resolve().parents[1]
SMALL = dict(total_steps=6, modulation_window=3, layer_count=2, relaxation=[])


def test_default_config_file_matches_dataclass():
    cfg = PipelineConfig.from_json(ROOT / "configs" / "default.json")
    assert cfg == PipelineConfig()
    assert (cfg.total_steps, cfg.modulation_window, cfg.quant_levels) == (28, 22, 5)
    assert (cfg.blur_size, cfg.blur_sigma, cfg.lambda0, cfg.max_tries, cfg.eval_timestep) == (5, 1.1, 0.83, 4, 2)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigInvalid):
        PipelineConfig.from_dict({"nonsense": 1})
    with pytest.raises(ConfigInvalid):
        PipelineConfig(modulation_window=40)
    with pytest.raises(ConfigInvalid):
        PipelineConfig(head_dim=6)
    with pytest.raises(ConfigInvalid):
        PipelineConfig(relaxation=[{"from_timestep": 3}])
    p = tmp_path / "c.json"
    PipelineConfig(seed=9).to_json(p)
    assert PipelineConfig.from_json(p).seed == 9


def test_empty_window_is_all_baseline():
    res = run_pipeline(PipelineConfig(modulation_window=0, **{k: v for k, v in SMALL.items() if k != "modulation_window"}))
    assert not any(d["active"] for d in res.diagnostics)
    assert all(d["k_in_rotations"] == 0 for d in res.diagnostics)


def test_fixed_seed_is_deterministic():
    a = run_pipeline(PipelineConfig(seed=7, **SMALL))
    b = run_pipeline(PipelineConfig(seed=7, **SMALL))
    c = run_pipeline(PipelineConfig(seed=8, **SMALL))
    assert a.diagnostics == b.diagnostics
    assert a.state.tobytes() == b.state.tobytes()
    assert a.state.tobytes() != c.state.tobytes()


def test_default_run_shape_and_schedule():
    start = time.perf_counter()
    res = run_pipeline(PipelineConfig())
    assert time.perf_counter() - start < 10
    assert len(res.diagnostics) == 28 * 4
    sch = PipelineConfig().schedule()
    for d in res.diagnostics:
        r, k, active = schedule_params(sch, d["t"])
        assert d["active"] == active == (d["t"] < 22)
        assert (d["r_low"], d["k_low"], d["k_high"]) == (r.v_min, k.v_min, k.v_max)
        assert d["k_in_rotations"] <= 5


def test_x0_snapshot(rng):
    np.testing.assert_array_equal(x0_snapshot(np.zeros((6, 4)), 2, 3), np.full((2, 3), 0.5))
    s = np.zeros((6, 4))
    s[4] = [1, 2, 3, 4]
    snap = x0_snapshot(s, 2, 3)
    assert snap[1, 1] == 1.0 and snap.sum() == 1.0
    s = rng.standard_normal((6, 4))
    norms = np.array([np.sqrt(sum(v * v for v in row)) for row in s])
    ref = (norms - norms.min()) / (norms.max() - norms.min())
    np.testing.assert_allclose(x0_snapshot(s, 2, 3).ravel(), ref, atol=1e-6)


def test_render_uniform_and_one_hot(tmp_path):
    img = render_attention_map(np.full((2, 9), 1 / 9), 1, 3, 3, tmp_path / "u.pgm")
    assert np.all(img == img[0, 0]) and img[0, 0] == 128
    row = np.zeros((1, 9))
    row[0, 4] = 1
    img = render_attention_map(row, 0, 3, 3)
    assert img[1, 1] == 255 and (img == 255).sum() == 1 and (img == 0).sum() == 8
    with pytest.raises(IndexOutOfRange):
        render_attention_map(row, 3, 3, 3)


def _content_free_map(r, H=8, W=8, d=32):
    unit = np.tile(np.array([1.0, 0.0], np.float32), d // 2)
    blocks = [np.tile(unit, (H * W, 1)) for _ in range(5)]
    inp = AttentionInputs(*blocks, PositionGrid(H, W), PositionGrid(H, W), np.ones((H, W), bool),
                          SaliencyMap(np.ones((H, W))), theta_base=1e-2)
    cfg = AttentionConfig(ModulationCurve(r, r, 1), ModulationCurve(1, 1, 1))
    out = modulated_attention(inp, cfg)
    centre = (H // 2) * W + W // 2
    return render_attention_map(out.weights, centre, H, W)


def test_render_broadens_with_smaller_range():
    wide = _content_free_map(0.65)
    narrow = _content_free_map(1.0)
    assert (wide > 127).sum() > (narrow > 127).sum()


def test_inputs_from_files(tmp_path, rng):
    crop = np.zeros((8, 8), bool)
    crop[2:6, 3:7] = True
    holes = np.zeros((8, 8), bool)
    holes[0, 0:3] = True
    write_mask(tmp_path / "crop.pgm", crop)
    write_mask(tmp_path / "holes.pgm", holes)
    write_tnsr(tmp_path / "f.tnsr", rng.random((2, 3, 16, 16)).astype(np.float32))
    write_pfm(tmp_path / "comp.pfm", rng.random((8, 8)).astype(np.float32))
    cfg = PipelineConfig(features=[str(tmp_path / "f.tnsr")], crop_mask=str(tmp_path / "crop.pgm"),
                         hole_mask=str(tmp_path / "holes.pgm"), composite=str(tmp_path / "comp.pfm"),
                         weight_trace_steps=[0], **SMALL)
    res = run_pipeline(cfg)
    assert np.all(res.saliency.values[holes] == 0)
    digests = write_outputs(res, tmp_path / "out")
    assert "weights_t00_l01.tnsr" in digests
    rows = read_jsonl(tmp_path / "out" / "diagnostics.jsonl")
    assert rows == json.loads(json.dumps(res.diagnostics))
