"""Learning reproductions on the shipped tasks. Minutes to tens of minutes each; run with -m slow."""

from __future__ import annotations

import numpy as np
import pytest

from src.config import RunConfig
from src.harness import ExperimentResult, run_experiment

pytestmark = pytest.mark.slow

WORKERS = 4


def _office(algo: str, tasks: str = "all", steps: int = 200_000, trials: int = 10) -> ExperimentResult:
    cfg = RunConfig(
        env="office", tasks=tasks, algo=algo, trials=trials, steps=steps, seed=2024,
        eval_every=1_000, window=1_000, metric="greedy", workers=WORKERS,
    )
    return run_experiment(cfg)


def _first_reaching(result: ExperimentResult, level: float) -> int | None:
    for p in result.points:
        if p.p50 >= level:
            return p.step
    return None


def _final(result: ExperimentResult) -> float:
    return result.points[-1].p50


def test_office_learning_order():
    ql, crm, hrm = _office("ql"), _office("crm"), _office("hrm")
    assert max(p.p50 for p in crm.points) >= 0.9

    crm_at, hrm_at, ql_at = (_first_reaching(r, 0.6) for r in (crm, hrm, ql))
    assert crm_at is not None and hrm_at is not None
    if ql_at is not None:
        assert crm_at < ql_at
        assert hrm_at < ql_at
    assert _final(hrm) <= _final(crm)


def test_hrm_settles_on_nearest_coffee():
    crm = _office("crm", tasks="1", steps=50_000)
    hrm = _office("hrm", tasks="1", steps=50_000)
    assert _final(crm) >= 0.99
    assert _final(hrm) < 0.99


def test_craft_gap():
    base = dict(env="craft", tasks="all", trials=9, maps=3, steps=400_000, seed=7,
                eval_every=1_000, window=1_000, workers=WORKERS)
    ql = run_experiment(RunConfig(algo="ql", **base))
    crm = run_experiment(RunConfig(algo="crm", **base))
    assert _final(ql) < 0.5 * _final(crm)


def test_qrm_matches_crm_curve():
    crm = _office("crm", steps=20_000, trials=3)
    qrm = _office("qrm", steps=20_000, trials=3)
    assert np.array_equal(crm.series, qrm.series)
