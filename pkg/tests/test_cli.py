import json

import numpy as np

from diffharmony.cli import main
from diffharmony.codec import IdentityCodec
from diffharmony.estimators import single_point_estimator
from diffharmony.harmonize import blend_with_mask
from diffharmony.image import load_mask, load_png, save_png, to_colorspace, to_uint8
from diffharmony.sampler import SamplerConfig, sample
from diffharmony.schedule import linear_schedule, make_plan

SIZE = 32


def _fixture(tmp_path, name="scene"):
    yy, xx = np.mgrid[0:SIZE, 0:SIZE] / SIZE
    img = np.stack([0.2 + 0.6 * xx, 0.3 + 0.4 * yy, 0.6 - 0.3 * xx * yy], axis=-1)
    mask = np.zeros((SIZE, SIZE))
    mask[8:24, 10:26] = 1.0
    comp = img.copy()
    comp[mask == 1] *= 0.7
    save_png(comp, tmp_path / f"{name}.png")
    save_png(mask, tmp_path / f"{name}_mask.png")
    save_png(img, tmp_path / f"{name}_gt.png")
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"size": SIZE, "steps": 10}))
    return tmp_path / f"{name}.png", tmp_path / f"{name}_mask.png", tmp_path / f"{name}_gt.png", cfg


def _harmonize(comp, mask, cfg, out, *extra):
    return main(["harmonize", "--composite", str(comp), "--mask", str(mask), "--out", str(out),
                 "--config", str(cfg), *extra])


def test_harmonize_outputs(tmp_path):
    comp, mask, gt, cfg = _fixture(tmp_path)
    out = tmp_path / "out"
    assert _harmonize(comp, mask, cfg, out, "--k", "3", "--ground-truth", str(gt)) == 0
    pngs = sorted(p.name for p in out.glob("*.png"))
    assert pngs == ["scene_k0.png", "scene_k1.png", "scene_k2.png"]
    side = json.loads((out / "scene.json").read_text())
    assert len(side["candidates"]) == 3
    assert {"D", "mse", "psnr", "file"} <= set(side["candidates"][0])
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["k"] == 3 and echoed["size"] == SIZE
    m = load_mask(mask)
    c = load_png(comp)
    for p in pngs:
        assert np.array_equal(load_png(out / p)[m == 0], c[m == 0])


def test_harmonize_byte_identical_reruns(tmp_path):
    comp, mask, _, cfg = _fixture(tmp_path)
    for d in ("a", "b"):
        assert _harmonize(comp, mask, cfg, tmp_path / d, "--k", "2", "--seed", "4") == 0
    for name in ("scene_k0.png", "scene_k1.png", "scene.json", "config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_harmonize_degenerate_flags(tmp_path):
    comp, mask, _, cfg = _fixture(tmp_path)
    out = tmp_path / "out"
    args = ("--scale", "0", "--no-transfer", "--codec", "identity", "--seed", "2")
    assert _harmonize(comp, mask, cfg, out, *args) == 0
    c, m = load_png(comp), load_mask(mask)
    sched = linear_schedule()
    est = single_point_estimator(c, sched)
    gen = sample(est, IdentityCodec(), c, cfg=SamplerConfig(make_plan(sched, 10), seed=2), sched=sched)
    want = to_uint8(blend_with_mask(gen, c, m))
    assert np.array_equal(to_uint8(load_png(out / "scene_k0.png")), want)


def test_harmonize_errors(tmp_path):
    comp, mask, _, cfg = _fixture(tmp_path)
    out = tmp_path / "out"
    assert _harmonize(comp, tmp_path / "missing.png", cfg, out) == 3
    small = tmp_path / "small_mask.png"
    save_png(np.ones((8, 8)) * (np.arange(8) < 4), small)
    assert _harmonize(comp, small, cfg, out) == 4
    empty = tmp_path / "empty_mask.png"
    save_png(np.zeros((SIZE, SIZE)), empty)
    assert _harmonize(comp, empty, cfg, out) == 4
    assert _harmonize(comp, mask, cfg, out, "--k", "0") == 2
    assert _harmonize(comp, mask, cfg, out, "--k", "two") == 2


def test_harmonize_with_dataset(tmp_path, rng):
    comp, mask, _, cfg = _fixture(tmp_path)
    data = tmp_path / "refs"
    for name in ("r1", "r2"):
        save_png(rng.uniform(size=(SIZE, SIZE, 3)), data / f"{name}.png")
        save_png(rng.uniform(size=(SIZE, SIZE, 3)), data / f"{name}_cond.png")
    out = tmp_path / "out"
    assert _harmonize(comp, mask, cfg, out, "--dataset", str(data)) == 0
    assert json.loads((out / "config.json").read_text())["dataset"] == str(data)
    assert (out / "scene_k0.png").exists()
    (tmp_path / "empty").mkdir()
    assert _harmonize(comp, mask, cfg, out, "--dataset", str(tmp_path / "empty")) == 3


def test_transfer(tmp_path, capsys):
    comp, mask, gt, _ = _fixture(tmp_path)
    out = tmp_path / "t" / "res.png"
    assert main(["transfer", "--source", str(comp), "--target", str(comp), "--mask", str(mask),
                 "--out", str(out), "--lambda", "0"]) == 0
    assert np.abs(load_png(out) - load_png(comp)).max() <= 1 / 255 + 1e-9
    assert json.loads((tmp_path / "t" / "res.config.json").read_text())["match_strength"] == 0.0

    out2 = tmp_path / "t" / "res2.png"
    assert main(["transfer", "--source", str(gt), "--target", str(comp), "--mask", str(mask),
                 "--out", str(out2), "--lambda", "0"]) == 0
    light = to_colorspace(load_png(out2), "hsl")[..., 2]
    assert np.abs(light - to_colorspace(load_png(comp), "hsl")[..., 2]).max() <= 1 / 255 + 1e-9

    assert main(["transfer", "--source", str(gt), "--target", str(comp), "--mask", str(mask),
                 "--out", str(out2), "--colorspace", "lab"]) == 2
    err = capsys.readouterr().err
    assert "hsl" in err and "hsv" in err
    assert main(["transfer", "--source", str(gt), "--target", str(comp), "--mask", str(mask),
                 "--out", str(out2), "--lambda", "2"]) == 2


def _eval_dirs(tmp_path, rng):
    gt, pred = tmp_path / "gt", tmp_path / "pred"
    for name in ["a", "b", "c"]:
        img = rng.uniform(size=(12, 12, 3))
        save_png(img, gt / f"{name}.png")
        save_png(img, pred / f"{name}.png")
    return pred, gt


def test_eval(tmp_path, rng, capsys):
    pred, gt = _eval_dirs(tmp_path, rng)
    groups = tmp_path / "groups.json"
    groups.write_text(json.dumps({"a": "HCOCO", "b": "HCOCO", "c": "Hday2night"}))
    report = tmp_path / "r.json"
    assert main(["eval", "--pred", str(pred), "--gt", str(gt), "--groups", str(groups),
                 "--json", str(report)]) == 0
    table = capsys.readouterr().out
    assert "HCOCO" in table and "Hday2night" in table and "All" in table
    data = json.loads(report.read_text())
    assert data["all"]["mse"] == 0.0 and data["groups"]["HCOCO"]["count"] == 2
    assert main(["eval", "--pred", str(pred), "--gt", str(tmp_path / "none")]) == 3


def test_eval_disjoint_names(tmp_path, rng):
    pred, gt = _eval_dirs(tmp_path, rng)
    for p in pred.glob("*.png"):
        p.rename(p.with_name("x" + p.name))
    assert main(["eval", "--pred", str(pred), "--gt", str(gt)]) == 3


def _synth_inputs(tmp_path, rng):
    images, masks = tmp_path / "images", tmp_path / "masks"
    for name in ("p", "q"):
        save_png(rng.uniform(size=(16, 16, 3)), images / f"{name}.png")
        m = np.zeros((16, 16))
        m[4:12, 4:12] = 1
        save_png(m, masks / f"{name}.png")
    return images, masks


def test_synth(tmp_path, rng):
    images, masks = _synth_inputs(tmp_path, rng)
    runs = {}
    for tag, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / tag
        assert main(["synth", "--images", str(images), "--masks", str(masks), "--out", str(out),
                     "--seed", seed]) == 0
        runs[tag] = out
    for name in ("p", "q"):
        a = (runs["a"] / "composite" / f"{name}.png").read_bytes()
        assert a == (runs["b"] / "composite" / f"{name}.png").read_bytes()
        assert a != (runs["c"] / "composite" / f"{name}.png").read_bytes()
        comp = load_png(runs["a"] / "composite" / f"{name}.png")
        real = load_png(images / f"{name}.png")
        m = load_mask(masks / f"{name}.png")
        assert np.array_equal(comp[m == 0], real[m == 0])
        assert np.array_equal(load_png(runs["a"] / "gt" / f"{name}.png"), real)
    assert json.loads((runs["c"] / "config.json").read_text())["seed"] == 2


def test_synth_missing_dir(tmp_path):
    assert main(["synth", "--images", str(tmp_path / "x"), "--masks", str(tmp_path), "--out",
                 str(tmp_path / "o")]) == 3


def test_demo_pass_and_mutation(tmp_path, capsys):
    assert main(["demo", "--out", str(tmp_path / "ok"), "--mixture-samples", "400"]) == 0
    summary = json.loads((tmp_path / "ok" / "summary.json").read_text())
    assert summary["passed"]
    props = summary["properties"]
    assert set(props) == {"single_point_recovery", "mixture_fidelity", "guidance_reduces_D",
                          "zero_scale_matches_unguided"}
    assert "chi2_pvalue" in props["mixture_fidelity"] and "mean_D_guided" in props["guidance_reduces_D"]
    assert main(["demo", "--out", str(tmp_path / "bad"), "--mixture-samples", "400",
                 "--flip-guidance-sign"]) == 1
    bad = json.loads((tmp_path / "bad" / "summary.json").read_text())
    assert not bad["properties"]["guidance_reduces_D"]["passed"]
    assert bad["properties"]["mixture_fidelity"]["passed"]
    assert "FAIL  guidance_reduces_D" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["harmonize"]) == 2
    assert main(["--version"]) == 0
    assert "diffharmony" in capsys.readouterr().out
