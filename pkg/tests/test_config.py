from __future__ import annotations

import pytest
from pydantic import ValidationError

from src.config import LearnerConfig, RunConfig, apply_overrides, load_config


def test_defaults():
    cfg = RunConfig()
    assert (cfg.env, cfg.algo, cfg.trials, cfg.steps) == ("office", "crm", 30, 200_000)
    assert cfg.learner == LearnerConfig()
    assert (cfg.learner.alpha, cfg.learner.epsilon, cfg.learner.gamma) == (0.5, 0.1, 0.9)


def test_load_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("algo: hrm\nsteps: 5000\nwindow: 500\nlearner:\n  epsilon: 0.2\n  prune_bad: false\n")
    cfg = load_config(path)
    assert cfg.algo == "hrm"
    assert cfg.steps == 5000
    assert cfg.learner.epsilon == 0.2
    assert cfg.learner.prune_bad is False
    assert cfg.learner.alpha == 0.5


def test_empty_yaml_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(path) == RunConfig()


def test_missing_explicit_file(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "nope.yaml")


@pytest.mark.parametrize(
    "settings",
    [
        {"steps": 500, "window": 1000},
        {"steps": 1000, "window": 100, "eval_every": 300},
        {"algo": "sarsa"},
        {"trials": 0},
        {"learner": {"alpha": 0.0}},
        {"learner": {"epsilon": 1.5}},
        {"learner": {"gamma": 0.0}},
    ],
)
def test_rejects_bad_settings(settings):
    with pytest.raises(ValidationError):
        RunConfig(**settings)


def test_overrides_route_learner_fields():
    cfg = apply_overrides(RunConfig(), {"algo": "qrm", "gamma": 0.95, "q0": 0.0, "seed": None, "rs": True})
    assert cfg.algo == "qrm"
    assert cfg.rs is True
    assert cfg.learner.gamma == 0.95
    assert cfg.learner.q0 == 0.0
    assert cfg.seed == 0


def test_overrides_are_validated():
    with pytest.raises(ValidationError):
        apply_overrides(RunConfig(), {"steps": 10})


def test_header_items_are_flat():
    items = dict(RunConfig(map=None).header_items())
    assert items["algo"] == "crm"
    assert items["rs"] == "false"
    assert items["map"] == ""
    assert items["learner.gamma"] == "0.9"
    assert items["craft.width"] == "21"
    assert items["craft.counts"].startswith("w:5,")
