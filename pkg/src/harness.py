from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat

import numpy as np

from .algos.base import Learner
from .algos.crm import CrmLearner
from .algos.hrm import HrmLearner
from .algos.qlearning import QLearner
from .algos.qrm import QrmLearner
from .config import RunConfig
from .envs.craft import generate_craft_map
from .envs.grid import GridMap, grid_labelling
from .envs.tasks import load_office_map, select_tasks
from .mdprm import Mdprm, assemble, multitask_loop, run_episode
from .oracle import optimal_avg_reward
from .shaping import shaped

logger = logging.getLogger(__name__)

LEARNERS: dict[str, type[Learner]] = {
    "ql": QLearner,
    "crm": CrmLearner,
    "qrm": QrmLearner,
    "hrm": HrmLearner,
}

# spawn-key roots keep the map, training and evaluation streams apart
_MAP_KEY = 1 << 32
_TRAIN, _EVAL = 0, 1


@dataclass(frozen=True, slots=True)
class CurvePoint:
    step: int
    p25: float
    p50: float
    p75: float


@dataclass(frozen=True)
class TrialResult:
    index: int
    metric: np.ndarray
    optimum: float


@dataclass(frozen=True)
class ExperimentResult:
    steps: np.ndarray
    points: list[CurvePoint]
    series: np.ndarray  # [trial, checkpoint]
    optima: tuple[float, ...]


def map_seed(base_seed: int, m: int) -> int:
    return int(np.random.SeedSequence(base_seed, spawn_key=(_MAP_KEY, m)).generate_state(1)[0])


def build_env(cfg: RunConfig, trial: int) -> GridMap:
    if cfg.env == "office":
        return load_office_map(cfg.map)
    return generate_craft_map(map_seed(cfg.seed, trial % cfg.maps), cfg.craft)


def build_tasks(cfg: RunConfig, env: GridMap, shape: bool | None = None) -> list[Mdprm]:
    """Assemble the selected tasks on env; shaped tasks keep the original machine for scoring."""
    shape = cfg.rs if shape is None else shape
    labelling = grid_labelling(env, cfg.env)
    gamma = cfg.learner.gamma
    tasks = []
    for spec in select_tasks(cfg.env, cfg.tasks):
        if shape:
            t = assemble(env, shaped(spec.rm, gamma), labelling, gamma, base=spec.rm,
                         random_start=cfg.random_start, name=spec.name)
        else:
            t = assemble(env, spec.rm, labelling, gamma, random_start=cfg.random_start, name=spec.name)
        tasks.append(t)
    return tasks


def checkpoints(cfg: RunConfig) -> np.ndarray:
    return np.arange(cfg.eval_every, cfg.steps + 1, cfg.eval_every, dtype=np.int64)


def window_metric(rewards: np.ndarray, steps: np.ndarray, window: int) -> np.ndarray:
    """Reward collected in (k - window, k] divided by window, for each checkpoint k."""
    cs = np.concatenate([[0.0], np.cumsum(rewards)])
    return (cs[steps] - cs[np.maximum(steps - window, 0)]) / window


def greedy_score(learner: Learner, tasks: list[Mdprm], rng: np.random.Generator, cap: int) -> float:
    """Reward per step of the current greedy policies over one round-robin cycle."""
    reward, length = 0.0, 0
    for k, t in enumerate(tasks):
        trace = run_episode(t, learner.greedy_policy(k), rng, cap)
        reward += sum(e.raw_r for e in trace)
        length += len(trace)
    return reward / length


def run_trial(cfg: RunConfig, i: int) -> TrialResult:
    try:
        seq = np.random.SeedSequence(cfg.seed, spawn_key=(i,))
        train_seq, eval_seq = seq.spawn(2)
        rng = np.random.default_rng(train_seq)
        eval_rng = np.random.default_rng(eval_seq)

        env = build_env(cfg, i)
        tasks = build_tasks(cfg, env)
        optimum = optimal_avg_reward(build_tasks(cfg, env, shape=False), cfg.max_episode_steps).aggregate
        learner = LEARNERS[cfg.algo](tasks, cfg.learner)
        steps = checkpoints(cfg)

        rewards = np.zeros(cfg.steps, dtype=np.float64)
        greedy: list[float] = []
        for rec in multitask_loop(tasks, learner, cfg.steps, rng, cfg.max_episode_steps):
            rewards[rec.step - 1] = rec.experience.raw_r
            if cfg.metric == "greedy" and rec.step % cfg.eval_every == 0:
                greedy.append(greedy_score(learner, tasks, eval_rng, cfg.max_episode_steps))

        if cfg.metric == "greedy":
            metric = np.asarray(greedy, dtype=np.float64)
        else:
            metric = window_metric(rewards, steps, cfg.window)
        metric = metric / optimum
    except Exception:
        logger.exception("Trial %d failed", i)
        raise
    logger.info("Trial %d finished: final normalized reward %.4f", i, metric[-1] if len(metric) else 0.0)
    return TrialResult(i, metric, optimum)


def aggregate(series: np.ndarray, steps: np.ndarray) -> list[CurvePoint]:
    """Per-checkpoint 25th/50th/75th percentiles across trials (nearest rank, rounding up)."""
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    if series.shape[1] == 0:
        return []
    p25, p50, p75 = np.percentile(series, [25, 50, 75], axis=0, method="higher")
    return [
        CurvePoint(int(k), float(a), float(b), float(c))
        for k, a, b, c in zip(steps, p25, p50, p75)
    ]


def preflight(cfg: RunConfig) -> None:
    """Load the map and tasks once so configuration problems surface before any trial runs."""
    build_tasks(cfg, build_env(cfg, 0))


def run_experiment(cfg: RunConfig) -> ExperimentResult:
    preflight(cfg)
    logger.info(
        "Running %s on %s tasks=%s: %d trials x %d steps (workers=%d)",
        cfg.algo, cfg.env, cfg.tasks, cfg.trials, cfg.steps, cfg.workers,
    )
    if cfg.workers == 1:
        results = [run_trial(cfg, i) for i in range(cfg.trials)]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_trial, repeat(cfg), range(cfg.trials)))

    steps = checkpoints(cfg)
    series = np.stack([r.metric for r in results])
    optima = tuple(r.optimum for r in results)
    logger.info("Optimal reward per step: %s", ", ".join(f"{x:.6g}" for x in sorted(set(optima))))
    return ExperimentResult(steps, aggregate(series, steps), series, optima)
