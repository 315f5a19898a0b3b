import json
import math

import numpy as np
import pytest

import polyct


def test_moments_match_closed_form():
    assert polyct.exp_pos_moment(0.0) == pytest.approx(0.5, rel=1e-14)
    c = 1.3
    expected = 0.5 * math.exp(c * c / 2) * math.erfc(c / math.sqrt(2))
    assert polyct.exp_pos_moment(c) == pytest.approx(expected, rel=1e-12)


def test_polyak_recovers_clean_signal():
    p = polyct.Problem(dim=16, ratio=8, signal_norm=1.0, seed=3)
    out = p.polyak(np.zeros(p.dim), max_iters=5000, tolerance=1e-6)
    assert out["status"] == "tolerance-met"
    assert np.linalg.norm(out["x"] - p.truth) <= 1e-6
    assert out["dist"][0] == pytest.approx(1.0)


def test_loss_and_direction_shapes():
    p = polyct.Problem(dim=8, ratio=4, signal_norm=2.0, seed=1)
    x = np.zeros(8)
    assert p.loss(p.truth) == 0.0
    assert p.direction(x).shape == (8,)
    assert p.loss(x, kind="squared") > 0.0


def test_errors_are_raised():
    p = polyct.Problem(dim=8, ratio=4, signal_norm=1.0)
    with pytest.raises(polyct.PolyctError):
        p.loss(np.zeros(3))
    with pytest.raises(polyct.PolyctError):
        polyct.Problem(dim=12, ratio=2, signal_norm=1.0, ensemble="rwht")


def test_tv_projection_lands_on_ball():
    img = polyct.shepp_logan(16)
    radius = 0.5 * polyct.tv_norm(img)
    proj = polyct.tv_ball_project(img, radius)
    assert polyct.tv_norm(proj) <= radius * (1 + 1e-9)
    assert math.isfinite(polyct.psnr(proj, img))


def test_config_roundtrip_and_run(tmp_path):
    cfg = polyct.config("phase-transition", dim=8, ratios=[4], signal_norms=[1], trials=2,
                        max_iters=500, gd_exponents=[0], out_dir=str(tmp_path))
    assert len(polyct.config_hash(json.dumps(cfg))) == 16
    polyct.run(cfg)
    text = (tmp_path / "phase_transition.csv").read_text()
    assert text.startswith("# config_hash=")
    with pytest.raises(polyct.PolyctError):
        polyct.run(dict(cfg, bogus=1))
