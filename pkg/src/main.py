from __future__ import annotations

import argparse
import logging
import sys

from pydantic import ValidationError

from .config import apply_overrides, load_config
from .envs.grid import MapError
from .envs.tasks import env_tasks
from .harness import build_env, build_tasks, run_experiment
from .mdprm import AssemblyError
from .oracle import UnreachableGoal, optimal_avg_reward
from .results import ResultsWriteError, ResultWriter
from .rm import RmError
from .rm.dsl import format_reward, load_rm
from .rm.formula import OTHERWISE
from .rm.machine import InvalidMachine
from .shaping import rm_value_iteration, shaped

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

EXIT_INPUT = 2


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file with run settings")
    p.add_argument("--env", choices=["office", "craft"])
    p.add_argument("--map", help="ASCII map file (office)")
    p.add_argument("--tasks", help="'all' or comma-separated task numbers")
    p.add_argument("--algo", choices=["ql", "crm", "qrm", "hrm"])
    p.add_argument("--rs", action="store_const", const=True, help="automated reward shaping")
    p.add_argument("--trials", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--q-init", dest="q0", type=float)
    p.add_argument("--rplus", type=float)
    p.add_argument("--rminus", type=float)
    p.add_argument("--no-prune-self-loops", dest="prune_self_loops", action="store_const", const=False)
    p.add_argument("--no-prune-bad", dest="prune_bad", action="store_const", const=False)
    p.add_argument("--no-share", dest="share_across_tasks", action="store_const", const=False,
                   help="learn only from the task being run")
    p.add_argument("--window", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--max-episode-steps", type=int)
    p.add_argument("--metric", choices=["window", "greedy"])
    p.add_argument("--maps", type=int, help="number of generated craft maps")
    p.add_argument("--random-start", action="store_const", const=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--raw-out")
    p.add_argument("--gnuplot-stub", action="store_const", const=True)


_NOT_SETTINGS = {"command", "config", "verbose", "func"}


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_SETTINGS}
    cfg = apply_overrides(cfg, overrides)
    result = run_experiment(cfg)
    writer = ResultWriter(cfg.out)
    path = writer.write_curve(result.points, cfg.header_items())
    logger.info("Curve written to %s", path)
    if cfg.raw_out:
        logger.info("Per-trial series written to %s", writer.write_trials(cfg.raw_out, result.steps, result.series))
    if cfg.gnuplot_stub:
        logger.info("Plot script written to %s", writer.write_gnuplot(f"{cfg.env} {cfg.algo}"))
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        m = load_rm(args.file)
    except InvalidMachine as exc:
        print(f"{args.file}: invalid", file=sys.stderr)
        print(exc.report, file=sys.stderr)
        return 1
    n_f = len(m.states) - m.n_interior
    print(f"{args.file}: ok props={len(m.props)} interior={m.n_interior} terminal={n_f} edges={len(m.edges)}")
    return 0


def cmd_shape(args: argparse.Namespace) -> int:
    m = load_rm(args.file)
    pot = rm_value_iteration(m, args.gamma)
    print(f"{'state':<12}{'kind':<10}{'v*':>12}{'phi':>12}")
    for st in m.states:
        v = 0.0 if st.terminal else pot.v_star[st.index]
        print(f"{st.name:<12}{st.kind:<10}{v:>12.6f}{-v:>12.6f}")
    print()
    print(f"{'source':<12}{'target':<12}{'reward':>12}{'shaped':>12}  guard")
    for e, s in zip(m.edges, shaped(m, args.gamma).edges):
        guard = "otherwise" if e.guard is OTHERWISE else f'"{e.guard}"'
        print(
            f"{m.states[e.source].name:<12}{m.states[e.target].name:<12}"
            f"{e.reward:>12.6f}{s.reward:>12.6f}  {guard}"
        )
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = apply_overrides(
        load_config(args.config),
        {"env": args.env, "map": args.map, "tasks": args.task, "seed": args.seed, "gamma": args.gamma},
    )
    env = build_env(cfg, 0)
    tasks = build_tasks(cfg, env, shape=False)
    report = optimal_avg_reward(tasks, cfg.max_episode_steps)
    print(f"{'task':<28}{'length':>8}{'reward':>10}{'per step':>12}")
    for name, n, r, per in zip(report.names, report.lengths, report.rewards, report.per_task):
        print(f"{name:<28}{n:>8}{format_reward(r):>10}{per:>12.6f}")
    print(f"{'round-robin':<28}{sum(report.lengths):>8}{format_reward(sum(report.rewards)):>10}{report.aggregate:>12.6f}")
    return 0


def cmd_tasks(args: argparse.Namespace) -> int:
    envs = [args.env] if args.env else ["office", "craft"]
    for env_id in envs:
        for spec in env_tasks(env_id):
            m = spec.rm
            print(
                f"{env_id:<7}{spec.number:>3}  {spec.name:<26}"
                f"|U|={m.n_interior:<3}|F|={len(m.states) - m.n_interior:<3}edges={len(m.edges):<4}"
                f"{spec.description}"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmbench", description="Reward machine learners and benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a multi-trial experiment and write a curve CSV")
    _add_run_args(run)
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="parse and validate a .rm file")
    validate.add_argument("file")
    validate.set_defaults(func=cmd_validate)

    shape = sub.add_parser("shape", help="print values, potentials and shaped edges of a .rm file")
    shape.add_argument("file")
    shape.add_argument("--gamma", type=float, default=0.9)
    shape.set_defaults(func=cmd_shape)

    oracle = sub.add_parser("oracle", help="optimal tour length and reward per step")
    oracle.add_argument("--config")
    oracle.add_argument("--env", choices=["office", "craft"])
    oracle.add_argument("--task", default="all")
    oracle.add_argument("--map")
    oracle.add_argument("--seed", type=int)
    oracle.add_argument("--gamma", type=float)
    oracle.set_defaults(func=cmd_oracle)

    tasks = sub.add_parser("tasks", help="list shipped tasks")
    tasks.add_argument("--list", action="store_true", default=True)
    tasks.add_argument("--env", choices=["office", "craft"])
    tasks.set_defaults(func=cmd_tasks)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        return args.func(args)
    except (RmError, MapError, AssemblyError, ValidationError, UnreachableGoal, ValueError, OSError) as exc:
        print(f"rmbench: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResultsWriteError as exc:
        print(f"rmbench: cannot write results: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
