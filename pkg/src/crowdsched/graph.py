"""Per-epoch conflict graph construction.

Conflicts come from shared resources, so the edge set is stored as a clique
cover: every UAV, worker, vehicle and task owns one clique holding all nodes
that reference it, and two nodes are adjacent iff they share a clique. A node
touches at most three cliques, which keeps graphs with ~1e5 nodes (and ~1e8
implied edges) cheap to hold and query. Arbitrary graphs are expressed with
one two-member clique per edge (see :meth:`WeightedGraph.from_edges`).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .model import EPS, distance
from .weights import (
    BASE_TASK,
    CostTables,
    Snapshot,
    _ceil,
    _dist,
    _locs,
    _task_need,
    charge_urgency_base,
    softplus,
    uav_gain_rows,
    vehicle_gain_matrix,
    worker_gain_matrix,
)

KINDS = ("Ui", "Wj", "Vk", "UiTx", "WjTx", "UiCy", "VkCy", "UiTxWj", "UiCyVk")
KIND_CODE = {k: i for i, k in enumerate(KINDS)}
_LEVELS = np.array([2 if k == "UiTxWj" else 1 if k == "UiCyVk" else 0 for k in KINDS], dtype=np.int8)

# which references each kind carries: uav, worker, vehicle, task, charge
_REFS = {
    "Ui": "u", "Wj": "w", "Vk": "v",
    "UiTx": "ut", "WjTx": "wt", "UiCy": "uc", "VkCy": "vc",
    "UiTxWj": "uwt", "UiCyVk": "uvc",
}


@dataclass(frozen=True)
class GraphNode:
    id: int
    kind: str
    weight: float = 0.0
    uav: Optional[int] = None
    worker: Optional[int] = None
    vehicle: Optional[int] = None
    task: Optional[int] = None
    charge: Optional[int] = None

    @property
    def level(self) -> int:
        return node_level(self)


def node_level(n) -> int:
    return int(_LEVELS[KIND_CODE[n.kind]])


def has_conflict(a, b) -> bool:
    """Shared UAV, worker, vehicle or task. A shared charging point is fine."""
    for attr in ("uav", "worker", "vehicle", "task"):
        x, y = getattr(a, attr), getattr(b, attr)
        if x is not None and x == y:
            return True
    return False


def worst_case_counts(n_uav: int, n_worker: int, n_vehicle: int, n_task: int, n_charge: int) -> dict:
    return {
        "Ui": n_uav,
        "Wj": n_worker,
        "Vk": n_vehicle,
        "UiTx": n_uav * n_task,
        "WjTx": n_worker * n_task,
        "UiCy": n_uav * n_charge,
        "VkCy": n_vehicle * n_charge,
        "UiTxWj": n_uav * n_task * n_worker,
        "UiCyVk": n_uav * n_charge * n_vehicle,
    }


def scenario_worst_case_counts(scenario) -> dict:
    return worst_case_counts(len(scenario.uavs), len(scenario.workers), len(scenario.vehicles),
                             len(scenario.tasks), len(scenario.charges))


class WeightedGraph:
    """Node weights and levels plus a clique cover of the conflict edges.

    ``memberships[i]`` lists the cliques of node ``i`` (``-1`` padded).
    ``queue_key[i]`` is the agent clique a node is queued under by the
    multi-queue solver; ``agent_cliques`` are the cliques that stand for
    agents (as opposed to tasks or plain edges).
    """

    def __init__(self, weights, levels, memberships, n_cliques, queue_key, agent_cliques,
                 columns: Optional[dict] = None, parent_ids=None):
        self.weights = np.asarray(weights, dtype=float)
        self.levels = np.asarray(levels, dtype=np.int8)
        memberships = np.asarray(memberships, dtype=np.int64)
        self.memberships = memberships.reshape(len(self.weights), memberships.shape[-1] if memberships.ndim == 2 else 1)
        self.n_cliques = int(n_cliques)
        self.queue_key = np.asarray(queue_key, dtype=np.int64)
        self.agent_cliques = np.asarray(agent_cliques, dtype=np.int64)
        self.columns = columns
        self.parent_ids = None if parent_ids is None else np.asarray(parent_ids, dtype=np.int64)
        self._csr = None
        self._memb_lists = None
        self._weight_list = None
        self._level_list = None
        self._clique_lists = None

    def __len__(self) -> int:
        return len(self.weights)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_edges(cls, weights, edges, levels=None) -> "WeightedGraph":
        """Arbitrary graph: one clique per edge plus a private clique per node."""
        n = len(weights)
        edges = [(int(a), int(b)) for a, b in edges if a != b]
        edges = sorted({(min(a, b), max(a, b)) for a, b in edges})
        rows = [[i] for i in range(n)]  # private identity clique first
        for e, (a, b) in enumerate(edges):
            rows[a].append(n + e)
            rows[b].append(n + e)
        width = max((len(r) for r in rows), default=1)
        memb = np.full((n, width), -1, dtype=np.int64)
        for i, r in enumerate(rows):
            memb[i, :len(r)] = r
        levels = np.zeros(n, dtype=np.int8) if levels is None else levels
        return cls(weights, levels, memb, n + len(edges), queue_key=np.arange(n),
                   agent_cliques=np.arange(n))

    @classmethod
    def from_nodes(cls, kinds, uav, worker, vehicle, task, charge, weights) -> "WeightedGraph":
        """Conflict graph over typed nodes; ``-1`` marks an absent reference."""
        kinds = np.asarray([KIND_CODE[k] if isinstance(k, str) else k for k in kinds], dtype=np.int8)
        cols = {name: np.asarray(arr, dtype=np.int64)
                for name, arr in (("uav", uav), ("worker", worker), ("vehicle", vehicle),
                                  ("task", task), ("charge", charge))}
        cols["kind"] = kinds
        n = len(kinds)
        memb = np.full((n, 3), -1, dtype=np.int64)
        offset = 0
        agent_cliques = []
        qkey = np.full(n, -1, dtype=np.int64)
        slot = np.zeros(n, dtype=np.int64)
        for name in ("uav", "worker", "vehicle", "task"):
            col = cols[name]
            present = col >= 0
            ids = np.unique(col[present])
            clique = offset + np.searchsorted(ids, col[present])
            rows = np.flatnonzero(present)
            memb[rows, slot[rows]] = clique
            slot[rows] += 1
            if name != "task":
                agent_cliques.append(offset + np.arange(len(ids)))
                unset = rows[qkey[rows] < 0]
                qkey[unset] = memb[unset, 0]
            offset += len(ids)
        agent_cliques = np.concatenate(agent_cliques) if agent_cliques else np.zeros(0, np.int64)
        return cls(weights, _LEVELS[kinds], memb, offset, qkey, agent_cliques, columns=cols)

    def subgraph(self, ids) -> "WeightedGraph":
        """Induced subgraph; local node ``i`` is ``ids[i]`` in this graph."""
        ids = np.asarray(ids, dtype=np.int64)
        cols = None if self.columns is None else {k: v[ids] for k, v in self.columns.items()}
        parent = ids if self.parent_ids is None else self.parent_ids[ids]
        return WeightedGraph(self.weights[ids], self.levels[ids], self.memberships[ids], self.n_cliques,
                             self.queue_key[ids], self.agent_cliques, columns=cols, parent_ids=parent)

    # -- adjacency queries ------------------------------------------------

    @property
    def csr(self):
        """(indptr, members) listing every clique's nodes in ascending order."""
        if self._csr is None:
            node = np.repeat(np.arange(len(self)), self.memberships.shape[1])
            clq = self.memberships.ravel()
            keep = clq >= 0
            node, clq = node[keep], clq[keep]
            order = np.lexsort((node, clq))
            members = node[order]
            counts = np.bincount(clq, minlength=self.n_cliques)
            indptr = np.zeros(self.n_cliques + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            self._csr = (indptr, members)
        return self._csr

    @property
    def memb_lists(self) -> list:
        if self._memb_lists is None:
            self._memb_lists = [tuple(c for c in row if c >= 0) for row in self.memberships.tolist()]
        return self._memb_lists

    @property
    def weight_list(self) -> list:
        if self._weight_list is None:
            self._weight_list = self.weights.tolist()
        return self._weight_list

    @property
    def level_list(self) -> list:
        if self._level_list is None:
            self._level_list = self.levels.tolist()
        return self._level_list

    @property
    def clique_lists(self) -> list:
        """Members of every clique as plain lists (ascending ids)."""
        if self._clique_lists is None:
            indptr, members = self.csr
            flat = members.tolist()
            bounds = indptr.tolist()
            self._clique_lists = [flat[bounds[c]:bounds[c + 1]] for c in range(self.n_cliques)]
        return self._clique_lists

    def clique_members(self, cliques) -> np.ndarray:
        indptr, members = self.csr
        cliques = np.asarray(cliques, dtype=np.int64)
        if len(cliques) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([members[indptr[c]:indptr[c + 1]] for c in cliques])

    def neighbors(self, n: int) -> np.ndarray:
        cl = self.memberships[n]
        nb = np.unique(self.clique_members(cl[cl >= 0]))
        return nb[nb != n]

    def adjacent(self, a: int, b: int) -> bool:
        if a == b:
            return False
        return bool(set(self.memb_lists[a]) & set(self.memb_lists[b]))

    def edges(self) -> Iterator[tuple]:
        for a in range(len(self)):
            for b in self.neighbors(a):
                if b > a:
                    yield a, int(b)

    def is_independent(self, members) -> bool:
        seen = set()
        for n in members:
            for c in self.memb_lists[n]:
                if c in seen:
                    return False
                seen.add(c)
        return True

    # -- typed view -------------------------------------------------------

    def node(self, i: int) -> GraphNode:
        if self.columns is None:
            return GraphNode(id=i, kind="Ui" if self.levels[i] == 0 else
                             ("UiCyVk" if self.levels[i] == 1 else "UiTxWj"),
                             weight=float(self.weights[i]))
        c = self.columns

        def ref(name):
            v = int(c[name][i])
            return None if v < 0 else v

        return GraphNode(id=i, kind=KINDS[int(c["kind"][i])], weight=float(self.weights[i]),
                         uav=ref("uav"), worker=ref("worker"), vehicle=ref("vehicle"),
                         task=ref("task"), charge=ref("charge"))

    @property
    def nodes(self) -> list:
        return [self.node(i) for i in range(len(self))]

    def kind_counts(self) -> dict:
        out = {k: 0 for k in KINDS}
        if self.columns is None:
            return out
        for code, cnt in zip(*np.unique(self.columns["kind"], return_counts=True)):
            out[KINDS[int(code)]] = int(cnt)
        return out


# ---------------------------------------------------------------------------
# building the epoch graph


def build_graph(snap: Snapshot, tables: CostTables, mode: str = "hierarchical") -> WeightedGraph:
    if mode not in BASE_TASK:
        raise ValueError(f"unknown weight mode {mode!r}")
    I = snap.interval
    now = snap.now
    U, W, V, T, C = snap.uavs, snap.workers, snap.vehicles, snap.tasks, snap.charges
    nu, nw, nv, nx, ny = len(U), len(W), len(V), len(T), len(C)

    uid = np.array([u.id for u in U], dtype=np.int64)
    wid = np.array([w.id for w in W], dtype=np.int64)
    vid = np.array([v.id for v in V], dtype=np.int64)
    tid = np.array([t.id for t in T], dtype=np.int64)
    cid = np.array([c.id for c in C], dtype=np.int64)

    ul, wl, vl, tl, cl = _locs(U), _locs(W), _locs(V), _locs(T), _locs(C)
    u_speed = np.array([u.speed for u in U], dtype=float)
    u_power = np.array([u.power for u in U], dtype=float)
    u_full = np.array([u.full_power for u in U], dtype=float)
    u_down = np.array([u.downtime for u in U], dtype=float)
    w_speed = np.array([w.speed for w in W], dtype=float)
    w_down = np.array([w.downtime for w in W], dtype=float)
    v_speed = np.array([v.speed for v in V], dtype=float)
    v_down = np.array([v.downtime for v in V], dtype=float)
    v_rate = np.array([v.charge_power for v in V], dtype=float)
    cost = np.array([t.cost_power for t in T], dtype=float)
    horizon = float(snap.limit_time)

    need = _task_need(T, C)
    d_ut, d_uc = _dist(ul, tl), _dist(ul, cl)
    d_wt, d_vc = _dist(wl, tl), _dist(vl, cl)
    feas6 = d_ut + need[None, :] <= u_power[:, None] + EPS
    feas5 = d_uc <= u_power[:, None] + EPS

    g_w = worker_gain_matrix(snap, tables)
    g_v = vehicle_gain_matrix(snap, tables)
    g_ut = np.zeros((nu, nx))
    g_uc = np.zeros((nu, ny))
    for i, u in enumerate(U):
        if nx and feas6[i].any():
            g_ut[i] = uav_gain_rows(u, tl, snap, tables, task_need=need)
        if ny and feas5[i].any():
            g_uc[i] = uav_gain_rows(u, cl, snap, tables, task_need=need)

    blocks = []  # (kind, uav, worker, vehicle, task, charge, weight)
    none = lambda n: np.full(n, -1, dtype=np.int64)  # noqa: E731
    stay = softplus(0.0)

    blocks.append(("Ui", uid, none(nu), none(nu), none(nu), none(nu), np.full(nu, stay)))
    blocks.append(("Wj", none(nw), wid, none(nw), none(nw), none(nw), np.full(nw, stay)))
    blocks.append(("Vk", none(nv), none(nv), vid, none(nv), none(nv), np.full(nv, stay)))

    i, x = np.nonzero(feas6 & (d_ut > EPS))
    blocks.append(("UiTx", uid[i], none(len(i)), none(len(i)), tid[x], none(len(i)), g_ut[i, x]))
    j, x = np.nonzero(d_wt > EPS)
    blocks.append(("WjTx", none(len(j)), wid[j], none(len(j)), tid[x], none(len(j)), g_w[j, x]))
    i, y = np.nonzero(feas5 & (d_uc > EPS))
    blocks.append(("UiCy", uid[i], none(len(i)), none(len(i)), none(len(i)), cid[y], g_uc[i, y]))
    k, y = np.nonzero(d_vc > EPS)
    blocks.append(("VkCy", none(len(k)), none(len(k)), vid[k], none(len(k)), cid[y], g_v[k, y]))

    # joint task nodes (uav, task, worker); both must finish before leaving
    if nu and nx and nw:
        t_u = d_ut / u_speed[:, None]
        t_w = d_wt / w_speed[:, None]
        done = now + np.maximum(t_u[:, :, None], t_w.T[None, :, :]) + (cost[None, :] / u_speed[:, None])[:, :, None]
        deadline = np.minimum(np.minimum(u_down[:, None, None], w_down[None, None, :]), horizon)
        ok = feas6[:, :, None] & (done <= deadline + EPS)
        i, x, j = np.nonzero(ok)
        ceil_u = _ceil(t_u, I)
        ceil_w = _ceil(t_w, I)
        lead = softplus(BASE_TASK[mode]) / np.maximum(ceil_u[i, x], ceil_w[j, x])
        wt = lead + g_w[j, x] + g_ut[i, x]
        blocks.append(("UiTxWj", uid[i], wid[j], none(len(i)), tid[x], none(len(i)), wt))
    else:
        blocks.append(("UiTxWj",) + tuple(none(0) for _ in range(5)) + (np.zeros(0),))

    # joint charge nodes (uav, charge, vehicle)
    if nu and ny and nv:
        t_u = d_uc / u_speed[:, None]
        t_v = d_vc / v_speed[:, None]
        missing = u_full[:, None] - (u_power[:, None] - d_uc)
        done = (now + np.maximum(t_u[:, :, None], t_v.T[None, :, :])
                + missing[:, :, None] / v_rate[None, None, :])
        deadline = np.minimum(np.minimum(u_down[:, None, None], v_down[None, None, :]), horizon)
        ok = feas5[:, :, None] & (done <= deadline + EPS)
        i, y, k = np.nonzero(ok)
        base = np.array([charge_urgency_base(p, f, mode) for p, f in zip(u_power, u_full)])
        ceil_u = _ceil(t_u, I)
        ceil_v = _ceil(t_v, I)
        lead = softplus(base[i]) / np.maximum(ceil_u[i, y], ceil_v[k, y])
        wt = lead + g_v[k, y] + g_uc[i, y]
        blocks.append(("UiCyVk", uid[i], none(len(i)), vid[k], none(len(i)), cid[y], wt))
    else:
        blocks.append(("UiCyVk",) + tuple(none(0) for _ in range(5)) + (np.zeros(0),))

    kinds = np.concatenate([np.full(len(b[6]), KIND_CODE[b[0]], dtype=np.int8) for b in blocks])
    cols = [np.concatenate([b[c] for b in blocks]) for c in range(1, 7)]
    return WeightedGraph.from_nodes(kinds, *cols)


# ---------------------------------------------------------------------------
# edge-list debug format


def write_edge_list(g: WeightedGraph, out=None) -> str:
    """Text dump: one ``node`` line per node, then one ``edge`` line per edge."""
    buf = io.StringIO()
    buf.write(f"# nodes {len(g)}\n")
    for i in range(len(g)):
        n = g.node(i)
        refs = " ".join(f"{a}={'-' if getattr(n, b) is None else getattr(n, b)}"
                        for a, b in (("u", "uav"), ("w", "worker"), ("v", "vehicle"),
                                     ("t", "task"), ("c", "charge")))
        buf.write(f"node {i} {n.kind} {float(g.weights[i])!r} {int(g.levels[i])} {refs}\n")
    edges = list(g.edges())
    buf.write(f"# edges {len(edges)}\n")
    for a, b in edges:
        buf.write(f"edge {a} {b}\n")
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text


def read_edge_list(text: str) -> tuple:
    """Parse :func:`write_edge_list` output into (weights, levels, kinds, edges)."""
    weights, levels, kinds, edges = [], [], [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "node":
            kinds.append(parts[2])
            weights.append(float(parts[3]))
            levels.append(int(parts[4]))
        elif parts[0] == "edge":
            edges.append((int(parts[1]), int(parts[2])))
    return np.array(weights), np.array(levels, dtype=np.int8), kinds, edges


def graph_from_edge_list(text: str) -> WeightedGraph:
    weights, levels, _, edges = read_edge_list(text)
    return WeightedGraph.from_edges(weights, edges, levels=levels)


def typed_graph(nodes: Sequence[GraphNode]) -> WeightedGraph:
    """Conflict graph over hand-made nodes (ids are reassigned by position)."""
    def col(attr):
        return [(-1 if getattr(n, attr) is None else getattr(n, attr)) for n in nodes]

    return WeightedGraph.from_nodes([n.kind for n in nodes], col("uav"), col("worker"), col("vehicle"),
                                    col("task"), col("charge"), [n.weight for n in nodes])


def task_window_ok(now: float, u, w, task, limit_time: float) -> bool:
    """Joint task finishes before either participant leaves and before the horizon."""
    arrive = max(distance(u.loc, task.loc) / u.speed, distance(w.loc, task.loc) / w.speed)
    done = now + arrive + task.cost_power / u.speed
    return done <= min(u.downtime, w.downtime, limit_time) + EPS


def charge_window_ok(now: float, u, v, charge, limit_time: float) -> bool:
    du = distance(u.loc, charge.loc)
    arrive = max(du / u.speed, distance(v.loc, charge.loc) / v.speed)
    done = now + arrive + (u.full_power - (u.power - du)) / v.charge_power
    return done <= min(u.downtime, v.downtime, limit_time) + EPS
