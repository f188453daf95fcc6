"""Reference schedulers that work on the same snapshot as the graph solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import charge_window_ok, task_window_ok
from .model import EPS, Action, GridPoint, distance, task_feasible
from .weights import Snapshot, _dist, _locs


@dataclass(frozen=True)
class KwtaParams:
    k: int = 5
    # None: a UAV joins the task side iff it can serve its nearest open task
    power_split_threshold: Optional[float] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


# ---------------------------------------------------------------------------
# greedy


def _cell_centres(snap: Snapshot) -> np.ndarray:
    if snap.area is not None:
        w, h = snap.area
    else:
        pts = [a.loc for a in (*snap.uavs, *snap.workers, *snap.vehicles, *snap.tasks, *snap.charges)]
        w = math.ceil(max([p[0] for p in pts], default=0.0) + EPS)
        h = math.ceil(max([p[1] for p in pts], default=0.0) + EPS)
    xs = np.arange(int(w)) + 0.5
    ys = np.arange(int(h)) + 0.5
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _target(loc, reach: float, cells: np.ndarray, refs: np.ndarray) -> GridPoint:
    """Reachable cell with the least total distance to ``refs``.

    Staying put wins ties, then the earliest cell in (x, y) order.
    """
    here = np.array([[loc[0], loc[1]]])
    d = _dist(here, cells)[0]
    ok = d <= reach + EPS
    here_score = float(_dist(here, refs).sum())
    if not ok.any():
        return GridPoint(*loc)
    cand = np.flatnonzero(ok)
    score = _dist(cells[cand], refs).sum(axis=1)
    best = int(np.argmin(score))
    if here_score <= score[best] + EPS:
        return GridPoint(*loc)
    return GridPoint(float(cells[cand[best], 0]), float(cells[cand[best], 1]))


def _same(a, b) -> bool:
    return abs(a[0] - b[0]) <= EPS and abs(a[1] - b[1]) <= EPS


def greedy_step(snap: Snapshot) -> list:
    """Every agent heads for the reachable cell closest in total to the open tasks."""
    I = snap.interval
    tasks = list(snap.tasks)
    if not tasks:
        return [Action("stay", uav=u.id) for u in snap.uavs] + \
               [Action("stay", worker=w.id) for w in snap.workers] + \
               [Action("stay", vehicle=v.id) for v in snap.vehicles]
    cells = _cell_centres(snap)
    tl = _locs(tasks)
    u_tgt = {u.id: _target(u.loc, min(u.speed * I, u.power), cells, tl) for u in snap.uavs}
    w_tgt = {w.id: _target(w.loc, w.speed * I, cells, tl) for w in snap.workers}
    ul = np.array([list(p) for p in u_tgt.values()]) if u_tgt else None
    v_tgt = {v.id: (_target(v.loc, v.speed * I, cells, ul) if ul is not None else GridPoint(*v.loc))
             for v in snap.vehicles}

    actions = []
    used_u, used_w, used_v = set(), set(), set()
    charges = list(snap.charges)
    # co-location at a task becomes a joint task
    for t in tasks:
        us = [u for u in snap.uavs if u.id not in used_u and _same(u_tgt[u.id], t.loc)
              and task_feasible(u, t, charges)]
        ws = [w for w in snap.workers if w.id not in used_w and _same(w_tgt[w.id], t.loc)]
        pair = next(((u, w) for u in us for w in ws if task_window_ok(snap.now, u, w, t, snap.limit_time)), None)
        if pair:
            u, w = pair
            actions.append(Action("task", uav=u.id, worker=w.id, task=t.id))
            used_u.add(u.id)
            used_w.add(w.id)
    for c in charges:
        us = [u for u in snap.uavs if u.id not in used_u and _same(u_tgt[u.id], c.loc)
              and distance(u.loc, c.loc) <= u.power + EPS]
        vs = [v for v in snap.vehicles if v.id not in used_v and _same(v_tgt[v.id], c.loc)]
        pair = next(((u, v) for u in us for v in vs if charge_window_ok(snap.now, u, v, c, snap.limit_time)), None)
        if pair:
            u, v = pair
            actions.append(Action("charge", uav=u.id, vehicle=v.id, charge=c.id))
            used_u.add(u.id)
            used_v.add(v.id)

    def solo(agent, tgt, role):
        if _same(agent.loc, tgt):
            return Action("stay", **{role: agent.id})
        return Action("move", dest=tgt, **{role: agent.id})

    actions += [solo(u, u_tgt[u.id], "uav") for u in snap.uavs if u.id not in used_u]
    actions += [solo(w, w_tgt[w.id], "worker") for w in snap.workers if w.id not in used_w]
    actions += [solo(v, v_tgt[v.id], "vehicle") for v in snap.vehicles if v.id not in used_v]
    return actions


# ---------------------------------------------------------------------------
# k-winners-take-all


def _ranked(scores: np.ndarray, mask: np.ndarray) -> list:
    """Indices with ``mask`` set, best score first, ties by index."""
    idx = np.flatnonzero(mask)
    order = np.lexsort((idx, -scores[idx]))
    return idx[order].tolist()


def _match(leaders, leader_rank, followers, follower_topk, follower_score, window_ok):
    """Pair each leader (in id order) with a follower over a shared target.

    A leader tries its own top-k targets, then falls back to its lower-ranked
    ones; either way a follower must hold the target in its own top-k.
    The best-scoring free follower wins; ties go to the lower id.
    """
    out = []
    taken_t, taken_f = set(), set()
    for li, leader in enumerate(leaders):
        for x in leader_rank[li]:
            if x in taken_t:
                continue
            cands = [fi for fi in range(len(followers))
                     if fi not in taken_f and x in follower_topk[fi]]
            cands.sort(key=lambda fi: (-follower_score[fi, x], followers[fi].id))
            hit = next((fi for fi in cands if window_ok(leader, followers[fi], x)), None)
            if hit is not None:
                out.append((li, hit, x))
                taken_f.add(hit)
                taken_t.add(x)
                break
    return out


def kwta_step(snap: Snapshot, params: KwtaParams = KwtaParams()) -> list:
    k = params.k
    tasks, charges = list(snap.tasks), list(snap.charges)
    uavs, workers, vehicles = list(snap.uavs), list(snap.workers), list(snap.vehicles)
    tl, cl = _locs(tasks), _locs(charges)
    actions = []
    used_u, used_w, used_v = set(), set(), set()

    # split UAVs into task and charging sides
    task_side, charge_side = [], []
    for u in uavs:
        if params.power_split_threshold is not None:
            on_task = u.power >= params.power_split_threshold * u.full_power
        elif tasks:
            d = _dist(np.array([[u.loc[0], u.loc[1]]]), tl)[0]
            on_task = task_feasible(u, tasks[int(np.argmin(d))], charges)
        else:
            on_task = False
        (task_side if on_task else charge_side).append(u)

    if tasks and task_side and workers:
        u_score = -_dist(_locs(task_side), tl) / np.array([u.speed for u in task_side])[:, None]
        feas = np.array([[task_feasible(u, t, charges) for t in tasks] for u in task_side])
        w_score = -_dist(_locs(workers), tl) / np.array([w.speed for w in workers])[:, None]
        w_top = [set(_ranked(w_score[j], np.ones(len(tasks), bool))[:k]) for j in range(len(workers))]
        ranks = [_ranked(u_score[i], feas[i]) for i in range(len(task_side))]

        def ok(u, w, x):
            return task_window_ok(snap.now, u, w, tasks[x], snap.limit_time)

        for i, j, x in _match(task_side, ranks, workers, w_top, w_score, ok):
            actions.append(Action("task", uav=task_side[i].id, worker=workers[j].id, task=tasks[x].id))
            used_u.add(task_side[i].id)
            used_w.add(workers[j].id)

    if charges and charge_side and vehicles:
        d_uc = _dist(_locs(charge_side), cl)
        u_score = -d_uc / np.array([u.speed for u in charge_side])[:, None]
        reach = d_uc <= np.array([u.power for u in charge_side])[:, None] + EPS
        v_score = -_dist(_locs(vehicles), cl) / np.array([v.speed for v in vehicles])[:, None]
        v_top = [set(_ranked(v_score[j], np.ones(len(charges), bool))[:k]) for j in range(len(vehicles))]
        ranks = [_ranked(u_score[i], reach[i]) for i in range(len(charge_side))]

        def ok(u, v, y):
            return charge_window_ok(snap.now, u, v, charges[y], snap.limit_time)

        # charge points are shared, only the vehicle is exclusive
        taken_v = set()
        for i, u in enumerate(charge_side):
            for y in ranks[i]:
                cands = sorted((j for j in range(len(vehicles)) if j not in taken_v and y in v_top[j]),
                               key=lambda j: (-v_score[j, y], vehicles[j].id))
                hit = next((j for j in cands if ok(u, vehicles[j], y)), None)
                if hit is not None:
                    actions.append(Action("charge", uav=u.id, vehicle=vehicles[hit].id, charge=charges[y].id))
                    used_u.add(u.id)
                    used_v.add(vehicles[hit].id)
                    taken_v.add(hit)
                    break

    actions += [Action("stay", uav=u.id) for u in uavs if u.id not in used_u]
    actions += [Action("stay", worker=w.id) for w in workers if w.id not in used_w]
    actions += [Action("stay", vehicle=v.id) for v in vehicles if v.id not in used_v]
    return actions
