"""Node weight evaluation.

Two routes compute the same quantities. The scalar functions follow the
formulas term by term and are meant for inspection and testing; the
``*_matrix`` / ``uav_gain_rows`` functions evaluate whole agent-by-target
tables with numpy and are what the graph builder uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .model import (
    EPS,
    ChargePoint,
    GridPoint,
    Task,
    Uav,
    Vehicle,
    Worker,
    ceil_to_interval,
    charge_feasible,
    distance,
    task_feasible,
)

_E_NORM = 1.0 - math.exp(-1.0)

BASE_TASK = {"hierarchical": 100.0, "uniform": 1.0}


@dataclass
class Snapshot:
    """Online idle agents and open targets at one decision epoch."""

    now: float
    uavs: Sequence[Uav]
    workers: Sequence[Worker]
    vehicles: Sequence[Vehicle]
    tasks: Sequence[Task]
    charges: Sequence[ChargePoint]
    interval: float
    limit_time: float
    area: Optional[Tuple[float, float]] = None

    @property
    def sentinel(self) -> float:
        # stand-in cost when no agent can serve a target
        return float(self.limit_time)


@dataclass
class CostTables:
    du_tl: np.ndarray
    dw_tl: np.ndarray
    du_chl: np.ndarray
    dv_chl: np.ndarray


def softplus(x):
    out = np.logaddexp(0.0, x)
    return float(out) if np.ndim(out) == 0 else out


def _affinity(ratio):
    return (1.0 - np.exp(-ratio)) / _E_NORM


def task_affinity(u: Uav) -> float:
    if u.full_power == 0:
        raise ValueError("full_power must be nonzero")
    return float(_affinity(u.power / u.full_power))


def charge_affinity(u: Uav) -> float:
    if u.full_power == 0:
        raise ValueError("full_power must be nonzero")
    return float(_affinity(1.0 - u.power / u.full_power))


def _ceil(t, interval):
    # vectorised ceil_to_interval
    n = np.ceil(np.asarray(t, dtype=float) / interval - EPS)
    return np.maximum(n, 1.0) * interval


def _locs(items) -> np.ndarray:
    if len(items) == 0:
        return np.zeros((0, 2))
    return np.array([[it.loc[0], it.loc[1]] for it in items], dtype=float)


def _dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    d = a[:, None, :] - b[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


# ---------------------------------------------------------------------------
# expected matching costs, scalar route


def expected_task_uav_cost(task: Task, snap: Snapshot, interval: float) -> float:
    terms = []
    for u in snap.uavs:
        if not task_feasible(u, task, snap.charges):
            continue
        aff = task_affinity(u)
        if aff <= 0:
            terms.append(snap.sentinel)
            continue
        terms.append(ceil_to_interval(distance(u.loc, task.loc) / u.speed, interval) / aff)
    return sum(terms) / len(terms) if terms else snap.sentinel


def expected_task_worker_cost(task: Task, snap: Snapshot, interval: float) -> float:
    if not snap.workers:
        return snap.sentinel
    total = sum(ceil_to_interval(distance(w.loc, task.loc) / w.speed, interval) for w in snap.workers)
    return total / len(snap.workers)


def expected_charge_uav_cost(charge: ChargePoint, snap: Snapshot, interval: float) -> float:
    terms = []
    for u in snap.uavs:
        if not charge_feasible(u, charge):
            continue
        aff = charge_affinity(u)
        if aff <= EPS:
            # a full UAV never seeks charge
            terms.append(snap.sentinel)
            continue
        terms.append(ceil_to_interval(distance(u.loc, charge.loc) / u.speed, interval) / aff)
    return sum(terms) / len(terms) if terms else snap.sentinel


def expected_charge_vehicle_cost(charge: ChargePoint, snap: Snapshot, interval: float) -> float:
    if not snap.vehicles:
        return snap.sentinel
    total = sum(ceil_to_interval(distance(v.loc, charge.loc) / v.speed, interval) for v in snap.vehicles)
    return total / len(snap.vehicles)


# ---------------------------------------------------------------------------
# expected matching costs, vectorised route


def _task_need(tasks, charges) -> np.ndarray:
    """Energy a UAV must hold on arrival at each task: its cost plus the way out."""
    if len(tasks) == 0:
        return np.zeros(0)
    if len(charges) == 0:
        return np.full(len(tasks), np.inf)
    back = _dist(_locs(tasks), _locs(charges)).min(axis=1)
    return np.array([t.cost_power for t in tasks], dtype=float) + back


def cost_tables(snap: Snapshot) -> CostTables:
    I = snap.interval
    big = snap.sentinel
    tl, cl = _locs(snap.tasks), _locs(snap.charges)
    nx, ny = len(tl), len(cl)

    def mean_or_sentinel(vals, mask, n):
        cnt = mask.sum(axis=0)
        tot = np.where(mask, vals, 0.0).sum(axis=0)
        out = np.full(n, big)
        ok = cnt > 0
        out[ok] = tot[ok] / cnt[ok]
        return out

    if snap.uavs:
        ul = _locs(snap.uavs)
        sp = np.array([u.speed for u in snap.uavs])[:, None]
        pw = np.array([u.power for u in snap.uavs])[:, None]
        full = np.array([u.full_power for u in snap.uavs])[:, None]
        d_ut = _dist(ul, tl)
        feas6 = d_ut + _task_need(snap.tasks, snap.charges)[None, :] <= pw + EPS
        aff_t = _affinity(pw / full)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(aff_t > 0, _ceil(d_ut / sp, I) / aff_t, big)
        du_tl = mean_or_sentinel(term, feas6, nx)

        d_uc = _dist(ul, cl)
        feas5 = d_uc <= pw + EPS
        aff_c = _affinity(1.0 - pw / full)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(aff_c > EPS, _ceil(d_uc / sp, I) / aff_c, big)
        du_chl = mean_or_sentinel(term, feas5, ny)
    else:
        du_tl, du_chl = np.full(nx, big), np.full(ny, big)

    if snap.workers:
        sp = np.array([w.speed for w in snap.workers])[:, None]
        dw_tl = _ceil(_dist(_locs(snap.workers), tl) / sp, I).mean(axis=0) if nx else np.zeros(0)
    else:
        dw_tl = np.full(nx, big)
    if snap.vehicles:
        sp = np.array([v.speed for v in snap.vehicles])[:, None]
        dv_chl = _ceil(_dist(_locs(snap.vehicles), cl) / sp, I).mean(axis=0) if ny else np.zeros(0)
    else:
        dv_chl = np.full(ny, big)
    return CostTables(du_tl=du_tl, dw_tl=dw_tl, du_chl=du_chl, dv_chl=dv_chl)


# ---------------------------------------------------------------------------
# choice distributions and per-interval gains, scalar route


def choice_distribution(origin: GridPoint, speed: float, targets: Sequence[GridPoint],
                        interval: float) -> np.ndarray:
    """Softmax over negated interval-rounded travel times; empty in, empty out."""
    if len(targets) == 0:
        return np.zeros(0)
    z = -np.array([ceil_to_interval(distance(origin, t) / speed, interval) for t in targets])
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def _relative_gain(p_old, p_new, costs, move_ceil) -> float:
    if len(p_old) == 0 or len(p_new) == 0:
        return 0.0
    before = float(np.dot(p_old, costs))
    after = float(np.dot(p_new, costs))
    return softplus((before - after) / before) / move_ceil


def worker_move_gain(w: Worker, new_loc: GridPoint, tables: CostTables, snap: Snapshot) -> float:
    if not snap.tasks:
        return 0.0
    I = snap.interval
    locs = [t.loc for t in snap.tasks]
    p_old = choice_distribution(w.loc, w.speed, locs, I)
    p_new = choice_distribution(new_loc, w.speed, locs, I)
    move = ceil_to_interval(distance(w.loc, new_loc) / w.speed, I)
    return _relative_gain(p_old, p_new, tables.du_tl, move)


def vehicle_move_gain(v: Vehicle, new_loc: GridPoint, tables: CostTables, snap: Snapshot) -> float:
    if not snap.charges:
        return 0.0
    I = snap.interval
    locs = [c.loc for c in snap.charges]
    p_old = choice_distribution(v.loc, v.speed, locs, I)
    p_new = choice_distribution(new_loc, v.speed, locs, I)
    move = ceil_to_interval(distance(v.loc, new_loc) / v.speed, I)
    return _relative_gain(p_old, p_new, tables.du_chl, move)


def _moved(u: Uav, new_loc: GridPoint) -> Uav:
    power_after = u.power - distance(u.loc, new_loc)
    if power_after < -EPS:
        raise ValueError("move exceeds the UAV's remaining power")
    return Uav(id=u.id, loc=new_loc, speed=u.speed, full_power=u.full_power,
               power=max(power_after, 0.0), uptime=u.uptime, downtime=u.downtime)


def uav_task_gain(u: Uav, new_loc: GridPoint, tables: CostTables, snap: Snapshot) -> float:
    after = _moved(u, new_loc)
    old = [i for i, t in enumerate(snap.tasks) if task_feasible(u, t, snap.charges)]
    new = [i for i, t in enumerate(snap.tasks) if task_feasible(after, t, snap.charges)]
    if not old or not new:
        return 0.0
    I = snap.interval
    p_old = choice_distribution(u.loc, u.speed, [snap.tasks[i].loc for i in old], I)
    p_new = choice_distribution(new_loc, u.speed, [snap.tasks[i].loc for i in new], I)
    before = float(np.dot(p_old, tables.dw_tl[old]))
    after_cost = float(np.dot(p_new, tables.dw_tl[new]))
    move = ceil_to_interval(distance(u.loc, new_loc) / u.speed, I)
    return softplus((before - after_cost) / before) / move


def uav_charge_gain(u: Uav, new_loc: GridPoint, tables: CostTables, snap: Snapshot) -> float:
    after = _moved(u, new_loc)
    old = [i for i, c in enumerate(snap.charges) if charge_feasible(u, c)]
    new = [i for i, c in enumerate(snap.charges) if charge_feasible(after, c)]
    if not old or not new:
        return 0.0
    I = snap.interval
    p_old = choice_distribution(u.loc, u.speed, [snap.charges[i].loc for i in old], I)
    p_new = choice_distribution(new_loc, u.speed, [snap.charges[i].loc for i in new], I)
    before = float(np.dot(p_old, tables.dv_chl[old]))
    after_cost = float(np.dot(p_new, tables.dv_chl[new]))
    move = ceil_to_interval(distance(u.loc, new_loc) / u.speed, I)
    return softplus((before - after_cost) / before) / move


def uav_combined_gain(u: Uav, new_loc: GridPoint, tables: CostTables, snap: Snapshot) -> float:
    power_after = u.power - distance(u.loc, new_loc)
    if power_after < -EPS:
        raise ValueError("move exceeds the UAV's remaining power")
    power_after = max(power_after, 0.0)
    share = power_after / u.full_power
    t_gain = uav_task_gain(u, new_loc, tables, snap)
    c_gain = uav_charge_gain(u, new_loc, tables, snap)
    return share * t_gain + (1.0 - share) * c_gain


def charge_urgency_base(power: float, full_power: float, mode: str) -> float:
    bonus = math.exp(1.0 - power / full_power)
    if mode == "hierarchical":
        return 10.0 + bonus
    if mode == "uniform":
        return bonus / math.e
    raise ValueError(f"unknown weight mode {mode!r}")


def pair_task_weight(u: Uav, task: Task, w: Worker, tables: CostTables, snap: Snapshot,
                     mode: str = "hierarchical") -> float:
    if not task_feasible(u, task, snap.charges):
        raise ValueError(f"uav {u.id} cannot serve task {task.id}")
    I = snap.interval
    ceil_u = ceil_to_interval(distance(u.loc, task.loc) / u.speed, I)
    ceil_w = ceil_to_interval(distance(w.loc, task.loc) / w.speed, I)
    lead = softplus(BASE_TASK[mode]) / max(ceil_u, ceil_w)
    return lead + worker_move_gain(w, task.loc, tables, snap) + uav_combined_gain(u, task.loc, tables, snap)


def pair_charge_weight(u: Uav, charge: ChargePoint, v: Vehicle, tables: CostTables, snap: Snapshot,
                       mode: str = "hierarchical") -> float:
    if not charge_feasible(u, charge):
        raise ValueError(f"uav {u.id} cannot reach charge point {charge.id}")
    I = snap.interval
    ceil_u = ceil_to_interval(distance(u.loc, charge.loc) / u.speed, I)
    ceil_v = ceil_to_interval(distance(v.loc, charge.loc) / v.speed, I)
    lead = softplus(charge_urgency_base(u.power, u.full_power, mode)) / max(ceil_u, ceil_v)
    return (lead + vehicle_move_gain(v, charge.loc, tables, snap)
            + uav_combined_gain(u, charge.loc, tables, snap))


# ---------------------------------------------------------------------------
# vectorised gains used by the graph builder


def _masked_softmax(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, z, -np.inf)
    top = z.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(mask, np.exp(z - top), 0.0)
    s = e.sum(axis=-1, keepdims=True)
    return np.divide(e, s, out=np.zeros_like(e), where=s > 0)


def _gain_from_probs(p_old, old_any, p_new, new_any, costs, move_ceil):
    before = p_old @ costs
    after = p_new @ costs
    rel = np.divide(before - after, before, out=np.zeros_like(after), where=before > 0)
    out = softplus(rel) / move_ceil
    return np.where(old_any & new_any, out, 0.0)


def _free_mover_matrix(agent_locs, speeds, target_locs, target_costs, interval):
    """Gain of each agent moving onto each target when every target is a candidate."""
    na, nt = len(agent_locs), len(target_locs)
    if na == 0 or nt == 0:
        return np.zeros((na, nt))
    d_at = _dist(agent_locs, target_locs)
    d_tt = _dist(target_locs, target_locs)
    out = np.empty((na, nt))
    cache = {}
    for a in range(na):
        s = float(speeds[a])
        if s not in cache:
            cache[s] = _masked_softmax(-_ceil(d_tt / s, interval), np.ones_like(d_tt, bool)) @ target_costs
        after = cache[s]
        p_old = _masked_softmax(-_ceil(d_at[a] / s, interval), np.ones(nt, bool))
        before = p_old @ target_costs
        out[a] = softplus((before - after) / before) / _ceil(d_at[a] / s, interval)
    return out


def worker_gain_matrix(snap: Snapshot, tables: CostTables) -> np.ndarray:
    """icmWj for every (worker, task) pair."""
    speeds = [w.speed for w in snap.workers]
    return _free_mover_matrix(_locs(snap.workers), speeds, _locs(snap.tasks), tables.du_tl, snap.interval)


def vehicle_gain_matrix(snap: Snapshot, tables: CostTables) -> np.ndarray:
    """icmVk for every (vehicle, charge point) pair."""
    speeds = [v.speed for v in snap.vehicles]
    return _free_mover_matrix(_locs(snap.vehicles), speeds, _locs(snap.charges), tables.du_chl, snap.interval)


def uav_gain_rows(u: Uav, new_locs: np.ndarray, snap: Snapshot, tables: CostTables,
                  task_need: np.ndarray | None = None) -> np.ndarray:
    """icmUi for one UAV moving to each of ``new_locs``.

    Entries whose move exceeds the UAV's power are NaN.
    """
    I = snap.interval
    nl = len(new_locs)
    if nl == 0:
        return np.zeros(0)
    here = np.array([[u.loc[0], u.loc[1]]])
    move = _dist(here, new_locs)[0]
    power_after = u.power - move
    ok = power_after >= -EPS
    pa = np.clip(power_after, 0.0, None)[:, None]
    move_ceil = _ceil(move / u.speed, I)

    tl = _locs(snap.tasks)
    if len(tl):
        need = _task_need(snap.tasks, snap.charges) if task_need is None else task_need
        d0 = _dist(here, tl)[0]
        m0 = d0 + need <= u.power + EPS
        p0 = _masked_softmax(-_ceil(d0 / u.speed, I), m0)
        d1 = _dist(new_locs, tl)
        m1 = d1 + need[None, :] <= pa + EPS
        p1 = _masked_softmax(-_ceil(d1 / u.speed, I), m1)
        t_gain = _gain_from_probs(p0, m0.any(), p1, m1.any(axis=1), tables.dw_tl, move_ceil)
    else:
        t_gain = np.zeros(nl)

    cl = _locs(snap.charges)
    if len(cl):
        d0 = _dist(here, cl)[0]
        m0 = d0 <= u.power + EPS
        p0 = _masked_softmax(-_ceil(d0 / u.speed, I), m0)
        d1 = _dist(new_locs, cl)
        m1 = d1 <= pa + EPS
        p1 = _masked_softmax(-_ceil(d1 / u.speed, I), m1)
        c_gain = _gain_from_probs(p0, m0.any(), p1, m1.any(axis=1), tables.dv_chl, move_ceil)
    else:
        c_gain = np.zeros(nl)

    share = pa[:, 0] / u.full_power
    out = share * t_gain + (1.0 - share) * c_gain
    return np.where(ok, out, np.nan)
