"""Epoch-driven simulation with an event queue between decision instants.

At each decision epoch the idle, online agents and the open tasks form a
snapshot; a scheduler turns it into actions, which are committed and then
played out by time-ordered events until the next epoch. UAV energy moves
only through ledger entries, so conservation can be audited exactly.
"""

from __future__ import annotations

import copy
import csv
import heapq
import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ._rng import substream
from .graph import GraphNode, WeightedGraph, build_graph, has_conflict
from .ils import IlsParams, solve_ils
from .model import (
    EPS,
    Action,
    GridPoint,
    Scenario,
    charge_feasible,
    distance,
    task_feasible,
    validate_scenario,
)
from .mpq import MpqParams, solve_mpq
from .weights import Snapshot, cost_tables

SCHEDULERS = ("mpq", "ils", "greedy", "kwta")


class InvariantViolation(RuntimeError):
    pass


class Status(str, Enum):
    IDLE = "idle"
    TRAVELING = "traveling"
    EXECUTING = "executing"
    CHARGING = "charging"
    WAITING_FCFS = "waiting_fcfs"
    OFFLINE = "offline"


@dataclass
class AgentActivity:
    status: Status = Status.IDLE
    action: Optional[Action] = None
    busy_until: float = 0.0
    destination: Optional[GridPoint] = None


@dataclass
class EpochRecord:
    epoch_min: float
    decision_ms: float
    committed: int
    cumulative_completed: int
    build_ms: float = 0.0
    graph_nodes: int = 0


@dataclass
class EpisodeResult:
    scheduler: str
    seed: int
    records: list
    completed_task_ids: list
    n_tasks: int
    completion_rate: float
    vacuous: bool = False
    audit: dict = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.records)

    @property
    def decision_ms(self) -> np.ndarray:
        return np.array([r.decision_ms for r in self.records], dtype=float)

    def summary(self) -> dict:
        d = self.decision_ms
        return {
            "scheduler": self.scheduler,
            "seed": self.seed,
            "completion_rate": self.completion_rate,
            "completed": len(self.completed_task_ids),
            "tasks": self.n_tasks,
            "vacuous": self.vacuous,
            "epochs": self.epochs,
            "mean_decision_ms": float(d.mean()) if len(d) else 0.0,
            "max_decision_ms": float(d.max()) if len(d) else 0.0,
        }


def node_to_action(n: GraphNode, snap: Snapshot) -> Action:
    tasks = {t.id: t for t in snap.tasks}
    charges = {c.id: c for c in snap.charges}
    kind = n.kind
    if kind in ("Ui", "Wj", "Vk"):
        return Action("stay", uav=n.uav, worker=n.worker, vehicle=n.vehicle)
    if kind in ("UiTx", "WjTx"):
        return Action("move", uav=n.uav, worker=n.worker, dest=tasks[n.task].loc)
    if kind in ("UiCy", "VkCy"):
        return Action("move", uav=n.uav, vehicle=n.vehicle, dest=charges[n.charge].loc)
    if kind == "UiTxWj":
        return Action("task", uav=n.uav, worker=n.worker, task=n.task)
    if kind == "UiCyVk":
        return Action("charge", uav=n.uav, vehicle=n.vehicle, charge=n.charge)
    raise ValueError(f"unknown node kind {kind!r}")


class Simulation:
    """Mutable episode state. Entities are private copies of the scenario's."""

    def __init__(self, scenario: Scenario, seed: int = 0):
        problems = validate_scenario(scenario)
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(problems))
        self.scenario = scenario
        self.interval = float(scenario.interval)
        self.limit = float(scenario.limit_time)
        self.uavs = {u.id: copy.copy(u) for u in scenario.uavs}
        self.workers = {w.id: copy.copy(w) for w in scenario.workers}
        self.vehicles = {v.id: copy.copy(v) for v in scenario.vehicles}
        self.tasks = {t.id: copy.copy(t) for t in scenario.tasks}
        self.charges = {c.id: c for c in scenario.charges}
        self.pools = {"uav": self.uavs, "worker": self.workers, "vehicle": self.vehicles}
        self.activity = {(kind, i): AgentActivity() for kind, pool in self.pools.items() for i in pool}
        self.now = 0.0
        self._events: list = []
        self._seq = 0
        self.reserved: set = set()
        self.completed: list = []
        self.fcfs = {v: [] for v in self.vehicles}
        self.vehicle_serving = {v: None for v in self.vehicles}
        self.power_start = {i: u.power for i, u in self.uavs.items()}
        self.ledger = {i: [] for i in self.uavs}
        self.commit_log: list = []
        self.audit = {"conflicting_pairs": 0, "negative_power_events": 0, "double_completions": 0,
                      "failed_tasks": 0, "voided_actions": 0}

        pc = scenario.perturbations
        self.pc = pc
        self._wind_rng = substream(seed, "perturb.wind")
        self._comms_rng = substream(seed, "perturb.comms")
        self._fail_rng = substream(seed, "perturb.failure")
        self._match_rng = substream(seed, "perturb.match")
        self.fail_p = {}
        if pc.failure_prob is not None:
            lo, hi = pc.failure_prob
            for key in sorted(self.activity, key=lambda k: (k[0], k[1])):
                self.fail_p[key] = float(self._fail_rng.uniform(lo, hi))

    # -- helpers ------------------------------------------------------------

    def _push(self, t: float, kind: str, payload) -> None:
        heapq.heappush(self._events, (t, self._seq, kind, payload))
        self._seq += 1

    def _online(self, kind: str, i: int, t: float) -> bool:
        a = self.pools[kind][i]
        return a.uptime <= t < a.downtime and self.activity[(kind, i)].status != Status.OFFLINE

    def _drain(self, uid: int, amount: float, what: str) -> float:
        """Take ``amount`` from a UAV; floors at zero only under perturbations."""
        u = self.uavs[uid]
        if amount > u.power + EPS:
            self.audit["negative_power_events"] += 1
            if not self.pc.active:
                raise InvariantViolation(
                    f"uav {uid} power {u.power:.6g} cannot cover {what} {amount:.6g} at t={self.now:g}")
        taken = min(amount, u.power) if self.pc.active else amount
        u.power -= taken
        self.ledger[uid].append((what, -taken))
        return taken

    def _release(self, key, t: float) -> None:
        act = self.activity[key]
        act.status = Status.IDLE
        act.action = None
        act.busy_until = t
        act.destination = None

    def energy_residuals(self) -> dict:
        """power_start + sum(ledger) - power_now per UAV; all zero if conserved."""
        return {i: self.power_start[i] + math.fsum(a for _, a in self.ledger[i]) - u.power
                for i, u in self.uavs.items()}

    # -- epoch interface ----------------------------------------------------

    def snapshot(self, now: Optional[float] = None) -> Snapshot:
        now = self.now if now is None else now
        for key, act in self.activity.items():
            a = self.pools[key[0]][key[1]]
            if act.status == Status.IDLE and now >= a.downtime:
                act.status = Status.OFFLINE

        def ready(kind):
            return [a for i, a in sorted(self.pools[kind].items())
                    if self.activity[(kind, i)].status == Status.IDLE and a.uptime <= now < a.downtime]

        tasks = [t for i, t in sorted(self.tasks.items()) if not t.completed and i not in self.reserved]
        charges = [c for _, c in sorted(self.charges.items())]
        return Snapshot(now=now, uavs=ready("uav"), workers=ready("worker"), vehicles=ready("vehicle"),
                        tasks=tasks, charges=charges, interval=self.interval, limit_time=self.limit,
                        area=tuple(self.scenario.area))

    def commit(self, actions, now: Optional[float] = None) -> list:
        """Validate and start actions; returns the non-stay actions that took effect."""
        now = self.now if now is None else now
        seen = set()
        tasks_seen = set()
        for a in actions:
            for key in a.agents():
                if key in seen:
                    raise InvariantViolation(f"agent {key} assigned twice at t={now:g}")
                seen.add(key)
                if self.activity[key].status != Status.IDLE or not self._online(*key, now):
                    raise InvariantViolation(f"agent {key} is not idle and online at t={now:g}")
            if a.task is not None:
                if a.task in tasks_seen:
                    raise InvariantViolation(f"task {a.task} assigned twice at t={now:g}")
                tasks_seen.add(a.task)
        live = [a for a in actions if a.kind != "stay"]
        for i in range(len(live)):
            for j in range(i + 1, len(live)):
                if has_conflict(live[i], live[j]):
                    self.audit["conflicting_pairs"] += 1

        started = []
        for a in live:
            if a.kind in ("task", "charge") and self.pc.match_loss_prob is not None:
                q = self._match_rng.uniform(*self.pc.match_loss_prob)
                if self._match_rng.random() < q:
                    self.audit["voided_actions"] += 1
                    continue
            getattr(self, f"_start_{a.kind}")(a, now)
            started.append(a)
            self.commit_log.append((now, a))
        return started

    def _wind(self) -> float:
        if self.pc.wind is None:
            return 1.0
        return 1.0 + float(self._wind_rng.uniform(*self.pc.wind))

    def _start_move(self, a: Action, now: float) -> None:
        (kind, i), = a.agents()
        agent = self.pools[kind][i]
        d = distance(agent.loc, a.dest)
        if kind == "uav" and d > agent.power + EPS:
            raise InvariantViolation(f"uav {i} cannot afford move of {d:.6g}")
        arrive = now + d / agent.speed
        act = self.activity[(kind, i)]
        act.status, act.action, act.busy_until, act.destination = Status.TRAVELING, a, arrive, a.dest
        self._push(arrive, "arrive", (kind, i, a.dest, d, self._wind() if kind == "uav" else 1.0))
        self._push(arrive, "release", [(kind, i)])

    def _start_task(self, a: Action, now: float) -> None:
        u, w, t = self.uavs[a.uav], self.workers[a.worker], self.tasks[a.task]
        if t.completed or a.task in self.reserved:
            raise InvariantViolation(f"task {a.task} is not open")
        if not task_feasible(u, t, list(self.charges.values())):
            raise InvariantViolation(f"uav {u.id} infeasible for task {t.id} at commit")
        du, dw = distance(u.loc, t.loc), distance(w.loc, t.loc)
        tu, tw = du / u.speed, dw / w.speed
        start = now + max(tu, tw)
        done = start + t.cost_power / u.speed
        factor = self._wind()
        self.reserved.add(t.id)
        for key in (("uav", u.id), ("worker", w.id)):
            act = self.activity[key]
            act.status, act.action, act.busy_until, act.destination = Status.TRAVELING, a, done, t.loc
        self._push(now + tu, "arrive", ("uav", u.id, t.loc, du, factor))
        self._push(now + tw, "arrive", ("worker", w.id, t.loc, dw, 1.0))
        self._push(start, "task_start", (u.id, w.id))
        self._push(done, "task_done", (u.id, w.id, t.id, factor))

    def _start_charge(self, a: Action, now: float) -> None:
        u, v, c = self.uavs[a.uav], self.vehicles[a.vehicle], self.charges[a.charge]
        if not charge_feasible(u, c):
            raise InvariantViolation(f"uav {u.id} cannot reach charge point {c.id} at commit")
        du, dv = distance(u.loc, c.loc), distance(v.loc, c.loc)
        tu, tv = du / u.speed, dv / v.speed
        ready = now + max(tu, tv)
        planned = ready + (u.full_power - (u.power - du)) / v.charge_power
        for key in (("uav", u.id), ("vehicle", v.id)):
            act = self.activity[key]
            act.status, act.action, act.busy_until, act.destination = Status.TRAVELING, a, planned, c.loc
        self._push(now + tu, "arrive", ("uav", u.id, c.loc, du, self._wind()))
        self._push(now + tv, "arrive", ("vehicle", v.id, c.loc, dv, 1.0))
        self._push(ready, "charge_ready", (u.id, v.id))

    # -- FCFS charging --------------------------------------------------------

    def request_charge(self, uid: int, vid: int, t: float) -> None:
        """UAV ``uid`` joins vehicle ``vid``'s queue at time ``t``."""
        self.fcfs[vid].append((t, uid))
        self.activity[("uav", uid)].status = Status.WAITING_FCFS
        if self.vehicle_serving[vid] is None:
            self._serve_next(vid, t)

    def _serve_next(self, vid: int, t: float) -> None:
        q = self.fcfs[vid]
        if not q:
            self.vehicle_serving[vid] = None
            self._release(("vehicle", vid), t)
            return
        q.sort()
        _, uid = q.pop(0)
        u, v = self.uavs[uid], self.vehicles[vid]
        self.vehicle_serving[vid] = uid
        self.activity[("uav", uid)].status = Status.CHARGING
        self.activity[("vehicle", vid)].status = Status.CHARGING
        self._push(t + (u.full_power - u.power) / v.charge_power, "charge_done", (uid, vid))

    # -- event loop -----------------------------------------------------------

    def advance(self, to: float) -> list:
        processed = []
        while self._events and self._events[0][0] <= to + EPS:
            t, _, kind, payload = heapq.heappop(self._events)
            self.now = max(self.now, t)
            getattr(self, f"_on_{kind}")(t, payload)
            processed.append((t, kind, payload))
        self.now = max(self.now, to)
        return processed

    def _on_arrive(self, t, payload) -> None:
        kind, i, dest, d, factor = payload
        agent = self.pools[kind][i]
        if kind == "uav" and d > 0:
            self._drain(i, d * factor, "travel")
        agent.loc = GridPoint(*dest)

    def _on_release(self, t, keys) -> None:
        for key in keys:
            self._release(key, t)

    def _on_task_start(self, t, payload) -> None:
        uid, wid = payload
        self.activity[("uav", uid)].status = Status.EXECUTING
        self.activity[("worker", wid)].status = Status.EXECUTING

    def _on_task_done(self, t, payload) -> None:
        uid, wid, tid, factor = payload
        u, task = self.uavs[uid], self.tasks[tid]
        need = task.cost_power * factor
        ok = u.power + EPS >= need
        self._drain(uid, need, "task")
        self.reserved.discard(tid)
        if ok:
            if task.completed:
                self.audit["double_completions"] += 1
            else:
                task.completed = True
                self.completed.append(tid)
        else:
            self.audit["failed_tasks"] += 1
        self._release(("uav", uid), t)
        self._release(("worker", wid), t)

    def _on_charge_ready(self, t, payload) -> None:
        uid, vid = payload
        self.request_charge(uid, vid, t)

    def _on_charge_done(self, t, payload) -> None:
        uid, vid = payload
        u = self.uavs[uid]
        gained = u.full_power - u.power
        u.power = u.full_power
        self.ledger[uid].append(("charge", gained))
        self._release(("uav", uid), t)
        self._serve_next(vid, t)

    # -- perturbations applied at epoch boundaries ----------------------------

    def apply_epoch_perturbations(self, now: float, first: bool) -> None:
        if self.pc.failure_prob is not None and not first:
            for key in sorted(self.activity):
                act = self.activity[key]
                if act.status == Status.IDLE and self._online(*key, now):
                    if self._fail_rng.random() < self.fail_p[key]:
                        act.status = Status.OFFLINE
        if self.pc.comms_cost is not None:
            for uid in sorted(self.uavs):
                if self._online("uav", uid, now):
                    self._drain(uid, float(self._comms_rng.uniform(*self.pc.comms_cost)), "comms")


# ---------------------------------------------------------------------------
# schedulers


@dataclass
class SchedulerConfig:
    weight_mode: Optional[str] = None
    ils: IlsParams = field(default_factory=IlsParams)
    mpq: MpqParams = field(default_factory=MpqParams)
    kwta_k: int = 5
    trace_path: Optional[Path] = None


def _graph_scheduler(name: str):
    def step(snap: Snapshot, cfg: SchedulerConfig, mode: str, rng) -> tuple:
        t0 = time.perf_counter()
        g = build_graph(snap, cost_tables(snap), mode)
        t1 = time.perf_counter()
        if name == "mpq":
            res = solve_mpq(g, cfg.mpq, rng)
            sol = res.solution
            if cfg.trace_path is not None:
                res.write_trace(cfg.trace_path, epoch=snap.now)
        else:
            sol = solve_ils(g, cfg.ils, rng)
        t2 = time.perf_counter()
        actions = [node_to_action(g.node(i), snap) for i in sol.members]
        return actions, (t2 - t1) * 1e3, (t1 - t0) * 1e3, len(g)
    return step


def _baseline_scheduler(name: str):
    def step(snap: Snapshot, cfg: SchedulerConfig, mode: str, rng) -> tuple:
        from .baselines import KwtaParams, greedy_step, kwta_step
        t0 = time.perf_counter()
        actions = greedy_step(snap) if name == "greedy" else kwta_step(snap, KwtaParams(k=cfg.kwta_k))
        return actions, (time.perf_counter() - t0) * 1e3, 0.0, 0
    return step


STEPS: dict = {
    "mpq": _graph_scheduler("mpq"),
    "ils": _graph_scheduler("ils"),
    "greedy": _baseline_scheduler("greedy"),
    "kwta": _baseline_scheduler("kwta"),
}


def run_episode(scenario: Scenario, scheduler: str = "mpq", seed: int = 0,
                config: Optional[SchedulerConfig] = None,
                on_epoch: Optional[Callable] = None) -> EpisodeResult:
    if scheduler not in STEPS:
        raise ValueError(f"unknown scheduler {scheduler!r}; choose from {', '.join(SCHEDULERS)}")
    cfg = SchedulerConfig() if config is None else config
    mode = cfg.weight_mode or scenario.weight_mode
    sim = Simulation(scenario, seed)
    rng = substream(seed, "solver")
    step = STEPS[scheduler]
    records = []
    n_epochs = max(1, int(round(sim.limit / sim.interval)))
    for e in range(n_epochs):
        now = e * sim.interval
        sim.advance(now)
        sim.apply_epoch_perturbations(now, first=(e == 0))
        snap = sim.snapshot(now)
        actions, dec_ms, build_ms, n_nodes = step(snap, cfg, mode, rng)
        started = sim.commit(actions, now)
        records.append(EpochRecord(now, dec_ms, len(started), len(sim.completed), build_ms, n_nodes))
        if on_epoch is not None:
            on_epoch(sim, snap, actions)
    sim.advance(sim.limit)
    residual = max((abs(r) for r in sim.energy_residuals().values()), default=0.0)
    if residual > 1e-9:
        raise InvariantViolation(f"energy ledger off by {residual:.3g}")
    audit = dict(sim.audit, energy_residual=residual,
                 min_power=min((u.power for u in sim.uavs.values()), default=0.0))
    n = len(scenario.tasks)
    done = sorted(sim.completed)
    if len(set(done)) != len(done):
        raise InvariantViolation("a task completed twice")
    return EpisodeResult(scheduler, seed, records, done, n,
                         completion_rate=len(done) / n if n else 1.0, vacuous=(n == 0), audit=audit)


# ---------------------------------------------------------------------------
# outputs

CSV_HEADER = ("epoch_min", "decision_ms", "committed", "cumulative_completed", "build_ms")


def write_epoch_csv(result: EpisodeResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_HEADER)
        for r in result.records:
            wr.writerow([f"{r.epoch_min:g}", f"{r.decision_ms:.3f}", r.committed,
                         r.cumulative_completed, f"{r.build_ms:.3f}"])


def write_summary(results, path) -> dict:
    """Aggregate several episodes into one JSON record."""
    rates = np.array([r.completion_rate for r in results])
    dec = np.concatenate([r.decision_ms for r in results]) if results else np.zeros(0)
    out = {
        "scheduler": results[0].scheduler if results else None,
        "seeds": [r.seed for r in results],
        "completion_rate": float(rates.mean()) if len(rates) else 0.0,
        "completion_rate_std": float(rates.std()) if len(rates) else 0.0,
        "mean_decision_ms": float(dec.mean()) if len(dec) else 0.0,
        "max_decision_ms": float(dec.max()) if len(dec) else 0.0,
        "episodes": [r.summary() for r in results],
    }
    Path(path).write_text(json.dumps(out, indent=1))
    return out
