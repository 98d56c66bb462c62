from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..rm.dsl import load_rm
from ..rm.machine import SimpleRewardMachine
from .grid import CRAFT_PROPS, OFFICE_PROPS, GridMap, load_map

_ROOT = Path(__file__).parent.parent.parent
TASKS_DIR = _ROOT / "tasks"
MAPS_DIR = _ROOT / "maps"
OFFICE_MAP = MAPS_DIR / "office_default.map"

ENV_PROPS: dict[str, tuple[str, ...]] = {"office": OFFICE_PROPS, "craft": CRAFT_PROPS}

_OFFICE = [
    ("deliver-coffee", "deliver coffee to the office without breaking any decoration"),
    ("deliver-mail", "deliver mail to the office without breaking any decoration"),
    ("patrol", "patrol locations A, B, C, and D, without breaking any decoration"),
    ("deliver-coffee-and-mail", "deliver a coffee and the mail to the office without breaking any decoration"),
]

_CRAFT = [
    ("make-plank", "get wood, use toolshed"),
    ("make-stick", "get wood, use workbench"),
    ("make-cloth", "get grass, use factory"),
    ("make-rope", "get grass, use toolshed"),
    ("make-bridge", "get iron, get wood, use factory (iron and wood in any order)"),
    ("make-bed", "get wood, use toolshed, get grass, use workbench (grass any time before the workbench)"),
    ("make-axe", "get wood, use workbench, get iron, use toolshed (iron any time before the toolshed)"),
    ("make-shears", "get wood, use workbench, get iron, use workbench (iron any time before the second workbench)"),
    ("get-gold", "get iron, get wood, use factory, use bridge (iron and wood in any order)"),
    ("get-gem", "get wood, use workbench, get iron, use toolshed, use axe (iron any time before the toolshed)"),
]


@dataclass(frozen=True)
class TaskSpec:
    name: str
    rm: SimpleRewardMachine
    env_id: str
    description: str = ""
    number: int = 0


def _load(env_id: str, table: list[tuple[str, str]]) -> list[TaskSpec]:
    specs = []
    for n, (name, description) in enumerate(table, start=1):
        rm = load_rm(TASKS_DIR / f"{env_id}_{n}.rm")
        extra = set(rm.props) - set(ENV_PROPS[env_id])
        if extra:
            raise ValueError(f"{env_id} task {n} uses propositions outside the environment: {sorted(extra)}")
        specs.append(TaskSpec(name, rm, env_id, description, n))
    return specs


def office_tasks() -> list[TaskSpec]:
    return _load("office", _OFFICE)


def craft_tasks() -> list[TaskSpec]:
    return _load("craft", _CRAFT)


def env_tasks(env_id: str) -> list[TaskSpec]:
    if env_id == "office":
        return office_tasks()
    if env_id == "craft":
        return craft_tasks()
    raise ValueError(f"unknown environment {env_id!r}")


def select_tasks(env_id: str, selection: str) -> list[TaskSpec]:
    """Resolve a 'all' or 'N[,N...]' selection (1-based task numbers)."""
    tasks = env_tasks(env_id)
    if selection.strip() == "all":
        return tasks
    chosen = []
    for part in selection.split(","):
        n = int(part)
        if not 1 <= n <= len(tasks):
            raise ValueError(f"{env_id} has tasks 1..{len(tasks)}, got {n}")
        chosen.append(tasks[n - 1])
    return chosen


def load_office_map(path: str | Path | None = None) -> GridMap:
    path = Path(path) if path is not None else OFFICE_MAP
    return load_map(path.read_text(encoding="utf-8"), OFFICE_PROPS)
