"""Random scenario generation over a rectangular grid."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np

from ._rng import substream
from .model import (
    ChargePoint,
    GridPoint,
    PerturbationConfig,
    Scenario,
    Task,
    Uav,
    Vehicle,
    Worker,
    validate_scenario,
)

Value = Union[float, Tuple[float, float]]


@dataclass(frozen=True)
class GenParams:
    area: Tuple[int, int] = (30, 30)
    tasks_n: int = 120
    charges_n: int = 20
    agents: Tuple[int, int, int] = (50, 30, 20)  # workers, uavs, vehicles
    online_minutes: Optional[float] = 60.0  # None: online for the whole horizon
    task_cost: Value = 3.0
    charge_power: Value = 10.0
    interval: float = 10.0
    limit_time: float = 180.0
    seed: int = 0
    uav_speed: float = 1.0
    worker_speed: float = 0.5
    vehicle_speed: float = 1.0
    full_power: float = 30.0
    weight_mode: str = "hierarchical"
    perturbations: PerturbationConfig = field(default_factory=PerturbationConfig)

    def problems(self) -> list:
        out = []
        if min(self.tasks_n, self.charges_n, *self.agents) < 0:
            out.append("counts must be nonnegative")
        if self.area[0] <= 0 or self.area[1] <= 0:
            out.append("area must be positive")
        elif self.charges_n > self.area[0] * self.area[1]:
            out.append(f"area {self.area[0]}x{self.area[1]} cannot host {self.charges_n} distinct charge points")
        for name in ("task_cost", "charge_power"):
            v = getattr(self, name)
            if isinstance(v, tuple) and (len(v) != 2 or v[0] > v[1]):
                out.append(f"{name} range must be (low, high) with low <= high")
        if self.online_minutes is not None and not 0 < self.online_minutes <= self.limit_time:
            out.append("online_minutes must lie in (0, limit_time]")
        return out


RANDOM_1 = GenParams()


def _draw(rng: np.random.Generator, v: Value, n: int) -> np.ndarray:
    if isinstance(v, tuple):
        return rng.uniform(v[0], v[1], size=n)
    return np.full(n, float(v))


def _cells(rng: np.random.Generator, area, n: int, distinct: bool) -> list:
    """Cell centres; distinct while the grid has room, then with repeats."""
    w, h = int(area[0]), int(area[1])
    total = w * h
    if distinct and n <= total:
        idx = rng.choice(total, size=n, replace=False)
    else:
        idx = rng.integers(0, total, size=n)
    return [GridPoint(float(i // h) + 0.5, float(i % h) + 0.5) for i in idx]


def _windows(rng: np.random.Generator, p: GenParams, n: int):
    if p.online_minutes is None:
        return [(0.0, float(p.limit_time))] * n
    up = rng.uniform(0.0, p.limit_time - p.online_minutes, size=n)
    return [(float(u), float(u) + p.online_minutes) for u in up]


def generate(params: GenParams = RANDOM_1, seed: Optional[int] = None) -> Scenario:
    p = params if seed is None else replace(params, seed=seed)
    bad = p.problems()
    if bad:
        raise ValueError("; ".join(bad))
    rng = substream(p.seed, "generate")
    n_w, n_u, n_v = p.agents

    tasks = [Task(i, loc, float(c)) for i, (loc, c) in
             enumerate(zip(_cells(rng, p.area, p.tasks_n, True), _draw(rng, p.task_cost, p.tasks_n)))]
    charges = [ChargePoint(i, loc) for i, loc in enumerate(_cells(rng, p.area, p.charges_n, True))]

    uavs = [Uav(i, loc, speed=p.uav_speed, full_power=p.full_power, power=p.full_power, uptime=up, downtime=dn)
            for i, (loc, (up, dn)) in enumerate(zip(_cells(rng, p.area, n_u, False), _windows(rng, p, n_u)))]
    workers = [Worker(i, loc, speed=p.worker_speed, uptime=up, downtime=dn)
               for i, (loc, (up, dn)) in enumerate(zip(_cells(rng, p.area, n_w, False), _windows(rng, p, n_w)))]
    rates = _draw(rng, p.charge_power, n_v)
    vehicles = [Vehicle(i, loc, speed=p.vehicle_speed, charge_power=float(r), uptime=up, downtime=dn)
                for i, (loc, (up, dn), r) in
                enumerate(zip(_cells(rng, p.area, n_v, False), _windows(rng, p, n_v), rates))]

    s = Scenario(area=(float(p.area[0]), float(p.area[1])), uavs=tuple(uavs), workers=tuple(workers),
                 vehicles=tuple(vehicles), tasks=tuple(tasks), charges=tuple(charges),
                 interval=float(p.interval), limit_time=float(p.limit_time), weight_mode=p.weight_mode,
                 perturbations=p.perturbations, seed=p.seed)
    problems = validate_scenario(s)
    if problems:
        raise ValueError("; ".join(problems))
    return s
