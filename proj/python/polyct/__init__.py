"""Python access to the polyct recovery library."""

import json

from ._polyct import (
    PolyctError,
    Problem,
    config_hash,
    default_config,
    erfc,
    exp_plus_moment,
    exp_pos_moment,
    expected_loss_at_zero,
    kappa_bound,
    lipschitz_bound,
    mu_bound,
    psnr,
    run_experiment,
    shepp_logan,
    tv_ball_project,
    tv_norm,
)


def config(kind, full_scale=False, **overrides):
    """Default config for `kind` as a dict, with keyword overrides applied."""
    cfg = json.loads(default_config(kind, full_scale))
    cfg.update(overrides)
    return cfg


def run(cfg):
    """Run an experiment described by a config dict (out_dir required)."""
    run_experiment(json.dumps(cfg))


__all__ = [
    "PolyctError",
    "Problem",
    "config",
    "config_hash",
    "default_config",
    "erfc",
    "exp_plus_moment",
    "exp_pos_moment",
    "expected_loss_at_zero",
    "kappa_bound",
    "lipschitz_bound",
    "mu_bound",
    "psnr",
    "run",
    "run_experiment",
    "shepp_logan",
    "tv_ball_project",
    "tv_norm",
]
