import numpy as np
import pytest
from sklearn.base import clone

from diffharmony._validation import MaskError, ShapeError
from diffharmony.codec import make_codec
from diffharmony.guidance import GuidanceConfig
from diffharmony.harmonize import (
    ColorTransfer,
    CompositeInput,
    DiffusionHarmonizer,
    TransferConfig,
    blend_with_mask,
    candidate_report,
    color_transfer,
    harmonize,
    lightness_affine,
)
from diffharmony.image import to_colorspace
from diffharmony.sampler import SamplerConfig
from diffharmony.schedule import make_plan


def hue_gap(a, b):
    d = np.abs(a - b)
    return np.minimum(d, 1.0 - d)


def square_mask(h, w, lo, hi):
    m = np.zeros((h, w))
    m[lo:hi, lo:hi] = 1.0
    return m


def smooth_image(h, w):
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    return np.stack([0.2 + 0.6 * xx, 0.3 + 0.4 * yy, 0.5 + 0.3 * xx * yy], axis=-1)


def test_lightness_affine_examples():
    assert lightness_affine([0.1, 0.5, 0.9], [0.1, 0.5, 0.9]) == pytest.approx((1.0, 0.0))
    a, b = lightness_affine([0.2, 0.4], [0.4, 0.8])
    assert a == pytest.approx(2.0, rel=1e-12) and b == pytest.approx(0.0, abs=1e-12)
    a, b = lightness_affine([0.5, 0.5], [0.6, 0.8])
    assert a == 1.0 and b == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(ValueError):
        lightness_affine([], [0.3])


@pytest.mark.parametrize("cs", ["hsl", "hsv"])
def test_zero_strength_keeps_lightness(rng, cs):
    gen, comp = rng.uniform(size=(2, 12, 12, 3))
    mask = square_mask(12, 12, 3, 9)
    out = color_transfer(gen, comp, mask, TransferConfig(cs, 0.0))
    err = np.abs(to_colorspace(out, cs)[..., 2] - to_colorspace(comp, cs)[..., 2]).max()
    assert err <= 1e-5


@pytest.mark.parametrize("cs", ["hsl", "hsv"])
def test_zero_strength_keeps_chroma(rng, cs):
    gen, comp = rng.uniform(size=(2, 12, 12, 3))
    mask = square_mask(12, 12, 3, 9)
    out = to_colorspace(color_transfer(gen, comp, mask, TransferConfig(cs, 0.0)), cs)
    ref = to_colorspace(gen, cs)
    sel = (mask == 1) & (ref[..., 1] > 0.05)
    assert sel.any()
    assert hue_gap(out[..., 0], ref[..., 0])[sel].max() <= 1e-5
    assert np.abs(out[..., 1] - ref[..., 1])[sel].max() <= 1e-5


def test_identity_case(rng):
    comp = rng.uniform(size=(10, 10, 3))
    mask = square_mask(10, 10, 2, 7)
    out = color_transfer(comp, comp, mask, TransferConfig("hsl", 0.0))
    assert np.abs(out - comp).max() <= 1e-5
    # full strength is also a no-op when foreground and background moments agree
    flat = np.full((10, 10, 3), 0.4)
    assert np.abs(color_transfer(flat, flat, mask) - flat).max() <= 1e-5


def test_full_strength_matches_moments(rng):
    comp = rng.uniform(0.3, 0.7, size=(16, 16, 3))
    mask = square_mask(16, 16, 4, 12)
    comp[mask == 1] *= 0.5  # darker pasted region
    out = color_transfer(comp, comp, mask, TransferConfig("hsl", 1.0))
    light = to_colorspace(out, "hsl")[..., 2]
    fg, bg = light[mask == 1], light[mask == 0]
    assert fg.mean() == pytest.approx(bg.mean(), abs=1e-6)
    assert fg.std() == pytest.approx(bg.std(), rel=1e-5)


def test_transfer_outside_mask_is_zero_strength_result(rng):
    gen, comp = rng.uniform(size=(2, 12, 12, 3))
    mask = square_mask(12, 12, 3, 9)
    full = color_transfer(gen, comp, mask, TransferConfig("hsl", 1.0))
    zero = color_transfer(gen, comp, mask, TransferConfig("hsl", 0.0))
    assert np.array_equal(full[mask == 0], zero[mask == 0])


def test_transfer_errors(rng):
    with pytest.raises(ShapeError):
        color_transfer(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)), np.ones((4, 4)))
    with pytest.raises(ValueError):
        TransferConfig("lab")
    with pytest.raises(ValueError):
        TransferConfig("hsl", 1.5)


def test_color_transfer_estimator(rng):
    gen, comp = rng.uniform(size=(2, 8, 8, 3))
    mask = square_mask(8, 8, 2, 6)
    ct = ColorTransfer("hsv", 0.5)
    assert ct.get_params() == {"colorspace": "hsv", "match_strength": 0.5}
    out = ct.fit(comp, mask).transform(gen)
    assert np.array_equal(out, color_transfer(gen, comp, mask, TransferConfig("hsv", 0.5)))


def test_blend_matches_loop_oracle(rng):
    p, c = rng.uniform(size=(2, 6, 7, 3))
    mask = (np.add.outer(np.arange(6), np.arange(7)) % 2).astype(float)
    out = blend_with_mask(p, c, mask)
    for i in range(6):
        for j in range(7):
            want = p[i, j] if mask[i, j] == 1 else c[i, j]
            assert np.array_equal(out[i, j], want)
    assert np.array_equal(blend_with_mask(out, c, mask), out)


def test_blend_degenerate_masks(rng):
    p, c = rng.uniform(size=(2, 4, 4, 3))
    assert np.array_equal(blend_with_mask(p, c, np.ones((4, 4))), p)
    assert np.array_equal(blend_with_mask(p, c, np.zeros((4, 4))), c)


def test_composite_input_validation():
    img = np.zeros((4, 4, 3))
    with pytest.raises(MaskError):
        CompositeInput(img, np.zeros((4, 4)))
    with pytest.raises(MaskError):
        CompositeInput(img, np.ones((4, 4)))
    with pytest.raises(ShapeError):
        CompositeInput(img, square_mask(5, 5, 1, 3))


def _pipeline(sched, steps=10, scale=10.0, seed=0):
    cfg = SamplerConfig(make_plan(sched, steps), guidance=GuidanceConfig(scale), seed=seed)
    return dict(codec=make_codec("pool", 4), sched=sched, sampler_cfg=cfg)


def test_harmonize_background_and_lightness(sched):
    comp = smooth_image(40, 40)
    mask = square_mask(40, 40, 10, 30)
    # smooth content: the tolerance only has to absorb the two resizes
    inp = CompositeInput(comp, mask)
    cands = harmonize(inp, transfer_cfg=TransferConfig("hsl", 0.0), k=2, size=32, **_pipeline(sched))
    assert len(cands) == 2
    for c in cands:
        assert c.shape == comp.shape
        assert np.array_equal(c[mask == 0], comp[mask == 0])
        err = np.abs(to_colorspace(c, "hsl")[..., 2] - to_colorspace(comp, "hsl")[..., 2]).max()
        assert err <= 2e-2


def test_harmonize_deterministic(sched):
    comp = smooth_image(16, 16)
    inp = CompositeInput(comp, square_mask(16, 16, 4, 12))
    kw = dict(transfer_cfg=TransferConfig(), k=2, size=16, **_pipeline(sched, seed=5))
    a = harmonize(inp, **kw)
    b = harmonize(inp, **kw)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))


def test_candidate_report(sched):
    comp = smooth_image(16, 16)
    inp = CompositeInput(comp, square_mask(16, 16, 4, 12), ground_truth=comp)
    rows = candidate_report([comp], inp)
    assert rows[0]["D"] == 0.0 and rows[0]["mse"] == 0.0 and rows[0]["psnr"] == 100.0
    assert "mse" not in candidate_report([comp], CompositeInput(comp, inp.mask))[0]


def test_diffusion_harmonizer(rng):
    h = DiffusionHarmonizer(num_steps=5, size=16, n_candidates=2, codec_factor=2)
    assert h.get_params()["guidance_scale"] == 10.0
    assert clone(h).get_params() == h.get_params()
    comp = smooth_image(16, 16)
    mask = square_mask(16, 16, 4, 12)
    out = h.fit().predict(comp, mask)
    assert len(out) == 2 and np.array_equal(out[0][mask == 0], comp[mask == 0])
    assert h.score(comp, mask, comp) > 20
    # references turn on the mixture estimator
    refs = [comp, rng.uniform(size=(16, 16, 3))]
    h2 = DiffusionHarmonizer(num_steps=5, size=16, codec_factor=2).fit(refs)
    assert len(h2.estimator_.points_) == 2
    assert h2.predict(comp, mask)[0].shape == comp.shape
