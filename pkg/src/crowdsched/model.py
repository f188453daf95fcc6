"""Domain types, scenario I/O and the energy feasibility predicates."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple

# Slack for float comparisons on distance/power budgets.
EPS = 1e-9

WEIGHT_MODES = ("hierarchical", "uniform")


class GridPoint(NamedTuple):
    x: float
    y: float


@dataclass
class Uav:
    id: int
    loc: GridPoint
    speed: float = 1.0
    full_power: float = 30.0
    power: float = 30.0
    uptime: float = 0.0
    downtime: float = math.inf


@dataclass
class Worker:
    id: int
    loc: GridPoint
    speed: float = 0.5
    uptime: float = 0.0
    downtime: float = math.inf


@dataclass
class Vehicle:
    id: int
    loc: GridPoint
    speed: float = 1.0
    charge_power: float = 10.0
    uptime: float = 0.0
    downtime: float = math.inf


@dataclass
class Task:
    id: int
    loc: GridPoint
    cost_power: float = 3.0
    completed: bool = False


@dataclass
class ChargePoint:
    id: int
    loc: GridPoint


@dataclass(frozen=True)
class Action:
    """One scheduled step: ``stay``, solo ``move``, joint ``task`` or joint ``charge``.

    A solo move names exactly one agent and carries its destination; joint
    actions name their UAV plus worker (task) or vehicle (charge).
    """

    kind: str
    uav: Optional[int] = None
    worker: Optional[int] = None
    vehicle: Optional[int] = None
    task: Optional[int] = None
    charge: Optional[int] = None
    dest: Optional[GridPoint] = None

    def agents(self) -> list:
        out = []
        if self.uav is not None:
            out.append(("uav", self.uav))
        if self.worker is not None:
            out.append(("worker", self.worker))
        if self.vehicle is not None:
            out.append(("vehicle", self.vehicle))
        return out


Range = Tuple[float, float]


@dataclass(frozen=True)
class PerturbationConfig:
    """Stochastic disturbances applied by the simulator.

    Every field is either ``None`` (mode off) or a ``(low, high)`` range that
    values are drawn from uniformly. ``failure_prob`` is drawn once per agent
    and then applied as a per-epoch offline probability; ``match_loss_prob``
    is drawn once per committed joint action.
    """

    wind: Optional[Range] = None
    comms_cost: Optional[Range] = None
    failure_prob: Optional[Range] = None
    match_loss_prob: Optional[Range] = None

    @property
    def active(self) -> bool:
        return any(
            r is not None
            for r in (self.wind, self.comms_cost, self.failure_prob, self.match_loss_prob)
        )


@dataclass
class Scenario:
    area: Tuple[float, float]
    uavs: Sequence[Uav] = ()
    workers: Sequence[Worker] = ()
    vehicles: Sequence[Vehicle] = ()
    tasks: Sequence[Task] = ()
    charges: Sequence[ChargePoint] = ()
    interval: float = 10.0
    limit_time: float = 180.0
    weight_mode: str = "hierarchical"
    perturbations: PerturbationConfig = field(default_factory=PerturbationConfig)
    seed: int = 0


def distance(a: GridPoint, b: GridPoint) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def ceil_to_interval(t: float, interval: float) -> float:
    """Round a duration up to whole decision intervals, never below one."""
    if t < 0:
        raise ValueError(f"duration must be nonnegative, got {t}")
    if interval <= 0:
        raise ValueError(f"interval must be positive, got {interval}")
    n = math.ceil(t / interval - EPS)
    return max(1, n) * interval


def task_feasible(u: Uav, task: Task, charges: Sequence[ChargePoint]) -> bool:
    """Reach the task, pay its cost, and still reach some charging point."""
    if not charges:
        return False
    to_task = distance(u.loc, task.loc)
    back = min(distance(task.loc, c.loc) for c in charges)
    return to_task + task.cost_power + back <= u.power + EPS


def charge_feasible(u: Uav, c: ChargePoint) -> bool:
    return distance(u.loc, c.loc) <= u.power + EPS


def _within(p: GridPoint, area: Tuple[float, float]) -> bool:
    return 0 <= p[0] <= area[0] and 0 <= p[1] <= area[1]


def validate_scenario(s: Scenario) -> list[str]:
    """Return every invariant violation found; an empty list means valid."""
    problems: list[str] = []
    w, h = s.area
    if w <= 0 or h <= 0:
        problems.append(f"area must be positive, got {s.area}")
    if s.interval <= 0:
        problems.append("interval must be positive")
    elif s.limit_time <= 0:
        problems.append("limit_time must be positive")
    else:
        ratio = s.limit_time / s.interval
        if abs(ratio - round(ratio)) > 1e-9:
            problems.append("limit_time must be a multiple of interval")
    if s.weight_mode not in WEIGHT_MODES:
        problems.append(f"unknown weight_mode {s.weight_mode!r}")

    def check_ids(name, items):
        ids = [it.id for it in items]
        if len(set(ids)) != len(ids):
            problems.append(f"duplicate {name} ids")

    def check_loc(name, it):
        if not _within(it.loc, s.area):
            problems.append(f"{name} {it.id} location {tuple(it.loc)} outside area")

    def check_window(name, it):
        if not it.uptime < it.downtime:
            problems.append(f"{name} {it.id} uptime must precede downtime")

    for name, items in (("uav", s.uavs), ("worker", s.workers), ("vehicle", s.vehicles),
                        ("task", s.tasks), ("charge", s.charges)):
        check_ids(name, items)
        for it in items:
            check_loc(name, it)

    for u in s.uavs:
        check_window("uav", u)
        if u.speed <= 0:
            problems.append(f"uav {u.id} speed must be positive")
        if u.full_power <= 0:
            problems.append(f"uav {u.id} full_power must be positive")
        if not 0 <= u.power <= u.full_power:
            problems.append(f"uav {u.id} power must lie in [0, full_power]")
    for wk in s.workers:
        check_window("worker", wk)
        if wk.speed <= 0:
            problems.append(f"worker {wk.id} speed must be positive")
    for v in s.vehicles:
        check_window("vehicle", v)
        if v.speed <= 0:
            problems.append(f"vehicle {v.id} speed must be positive")
        if v.charge_power <= 0:
            problems.append(f"vehicle {v.id} charge_power must be positive")
    for t in s.tasks:
        if t.cost_power < 0:
            problems.append(f"task {t.id} cost_power must be nonnegative")

    pc = s.perturbations
    for name in ("wind", "comms_cost", "failure_prob", "match_loss_prob"):
        r = getattr(pc, name)
        if r is None:
            continue
        lo, hi = r
        if lo < 0 or hi < lo:
            problems.append(f"perturbation {name} range must be nonnegative and ordered")
        if name.endswith("prob") and hi > 1:
            problems.append(f"perturbation {name} must lie in [0, 1]")
    return problems


# ---------------------------------------------------------------------------
# scenario file format (JSON)


def _point(p) -> GridPoint:
    return GridPoint(float(p[0]), float(p[1]))


def _num(x):
    # JSON has no infinity literal
    return None if x == math.inf else x


def _unnum(x):
    return math.inf if x is None else float(x)


def scenario_to_dict(s: Scenario) -> dict:
    def agent(a):
        d = asdict(a)
        d["loc"] = [a.loc.x, a.loc.y]
        for key in ("uptime", "downtime"):
            if key in d:
                d[key] = _num(d[key])
        return d

    pc = s.perturbations
    return {
        "area": list(s.area),
        "interval": s.interval,
        "limit_time": s.limit_time,
        "weight_mode": s.weight_mode,
        "seed": s.seed,
        "perturbations": {
            k: (list(v) if v is not None else None) for k, v in asdict(pc).items()
        },
        "uavs": [agent(u) for u in s.uavs],
        "workers": [agent(w) for w in s.workers],
        "vehicles": [agent(v) for v in s.vehicles],
        "tasks": [agent(t) for t in s.tasks],
        "charges": [agent(c) for c in s.charges],
    }


def scenario_from_dict(d: dict) -> Scenario:
    def windows(item):
        out = dict(item)
        out["loc"] = _point(item["loc"])
        for key in ("uptime", "downtime"):
            if key in out:
                out[key] = _unnum(out[key]) if key == "downtime" else float(out[key])
        return out

    pert = d.get("perturbations") or {}
    pc = PerturbationConfig(**{
        k: (tuple(v) if v is not None else None) for k, v in pert.items()
    })
    uavs = []
    for item in d.get("uavs", []):
        item = windows(item)
        item.setdefault("power", item.get("full_power", 30.0))
        uavs.append(Uav(**item))
    return Scenario(
        area=tuple(d["area"]),
        uavs=tuple(uavs),
        workers=tuple(Worker(**windows(w)) for w in d.get("workers", [])),
        vehicles=tuple(Vehicle(**windows(v)) for v in d.get("vehicles", [])),
        tasks=tuple(Task(**windows(t)) for t in d.get("tasks", [])),
        charges=tuple(ChargePoint(**windows(c)) for c in d.get("charges", [])),
        interval=float(d.get("interval", 10.0)),
        limit_time=float(d.get("limit_time", 180.0)),
        weight_mode=d.get("weight_mode", "hierarchical"),
        perturbations=pc,
        seed=int(d.get("seed", 0)),
    )


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=1))


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
