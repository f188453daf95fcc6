"""Shared oracles and instance generators."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from crowdsched.graph import GraphNode, has_conflict, typed_graph
from crowdsched.model import ChargePoint, GridPoint, Task, Uav, Vehicle, Worker
from crowdsched.weights import Snapshot


def brute_force_mwis(weights, adjacency) -> tuple:
    """Exact MWIS by enumerating all 2^n subsets (n <= 20).

    ``adjacency`` is a list of neighbour sets. Returns (weight, members).
    """
    n = len(weights)
    if n == 0:
        return 0.0, ()
    assert n <= 20
    masks = np.arange(1 << n, dtype=np.int64)
    nbr = np.array([sum(1 << j for j in adjacency[i]) for i in range(n)], dtype=np.int64)
    ok = np.ones(len(masks), dtype=bool)
    total = np.zeros(len(masks))
    for i in range(n):
        has = (masks >> i) & 1
        ok &= ~((has == 1) & ((masks & nbr[i]) != 0))
        total += has * weights[i]
    total = np.where(ok, total, -np.inf)
    best = int(np.argmax(total))
    return float(total[best]), tuple(i for i in range(n) if (best >> i) & 1)


def adjacency_from_nodes(nodes) -> list:
    """Neighbour sets straight from the pairwise conflict predicate."""
    adj = [set() for _ in nodes]
    for a, b in itertools.combinations(range(len(nodes)), 2):
        if has_conflict(nodes[a], nodes[b]):
            adj[a].add(b)
            adj[b].add(a)
    return adj


_LEVEL_RANGES = {2: (5.0, 15.0), 1: (1.0, 3.0), 0: (0.05, 1.0)}


def random_typed_nodes(rng: np.random.Generator, max_nodes: int = 18) -> list:
    """Small agent/resource instance with nodes of every kind and level."""
    nu, nw, nv = (int(x) for x in rng.integers(1, 4, size=3))
    nx, ny = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    pool = []
    pool += [("Ui", dict(uav=i)) for i in range(nu)]
    pool += [("Wj", dict(worker=j)) for j in range(nw)]
    pool += [("Vk", dict(vehicle=k)) for k in range(nv)]
    pool += [("UiTx", dict(uav=i, task=x)) for i in range(nu) for x in range(nx)]
    pool += [("WjTx", dict(worker=j, task=x)) for j in range(nw) for x in range(nx)]
    pool += [("UiCy", dict(uav=i, charge=y)) for i in range(nu) for y in range(ny)]
    pool += [("VkCy", dict(vehicle=k, charge=y)) for k in range(nv) for y in range(ny)]
    pool += [("UiTxWj", dict(uav=i, task=x, worker=j)) for i in range(nu) for x in range(nx) for j in range(nw)]
    pool += [("UiCyVk", dict(uav=i, charge=y, vehicle=k)) for i in range(nu) for y in range(ny) for k in range(nv)]
    n = int(rng.integers(1, min(max_nodes, len(pool)) + 1))
    pick = sorted(rng.choice(len(pool), size=n, replace=False).tolist())
    nodes = []
    for idx, p in enumerate(pick):
        kind, refs = pool[p]
        tmp = GraphNode(id=idx, kind=kind, **refs)
        lo, hi = _LEVEL_RANGES[tmp.level]
        nodes.append(GraphNode(id=idx, kind=kind, weight=float(rng.uniform(lo, hi)), **refs))
    return nodes


def oracle_suite(n_instances: int = 200, seed: int = 20240601) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_instances):
        nodes = random_typed_nodes(rng)
        g = typed_graph(nodes)
        adj = adjacency_from_nodes(nodes)
        opt, _ = brute_force_mwis(g.weights, adj)
        out.append((nodes, g, adj, opt))
    return out


@pytest.fixture(scope="session")
def suite():
    return oracle_suite()


def is_independent(members, adj) -> bool:
    ms = set(members)
    return all(not (adj[m] & ms) for m in ms)


def fig4_snapshot(now: float = 0.0) -> Snapshot:
    """Two UAVs, two workers, one vehicle, three tasks, two charges; everything feasible."""
    uavs = [Uav(0, GridPoint(1.5, 1.5)), Uav(1, GridPoint(4.5, 3.5))]
    workers = [Worker(0, GridPoint(2.5, 1.5)), Worker(1, GridPoint(3.5, 4.5))]
    vehicles = [Vehicle(0, GridPoint(0.5, 4.5))]
    tasks = [Task(0, GridPoint(2.5, 2.5)), Task(1, GridPoint(3.5, 2.5)), Task(2, GridPoint(1.5, 3.5))]
    charges = [ChargePoint(0, GridPoint(0.5, 0.5)), ChargePoint(1, GridPoint(5.5, 5.5))]
    return Snapshot(now=now, uavs=uavs, workers=workers, vehicles=vehicles, tasks=tasks, charges=charges,
                    interval=10.0, limit_time=180.0, area=(6.0, 6.0))


@pytest.fixture
def fig4():
    return fig4_snapshot()


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
