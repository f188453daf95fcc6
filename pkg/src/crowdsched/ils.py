"""Iterated local search for maximum-weight independent sets.

The working solution is kept as an owner table over the clique cover: a
clique is owned by the solution node inside it, or -1. Adding node ``n`` is
legal exactly when all of its cliques are unowned, and its swap gain is

    sigma(n) = w(n) - sum of weights of the distinct owners of n's cliques.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .graph import WeightedGraph
from .model import EPS


@dataclass(frozen=True)
class Solution:
    members: tuple
    weight: float

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class IlsParams:
    max_iter: int = 1000
    theta0: float = 0.95
    theta_decay: float = 0.99
    stall_step: int = 10  # iterations without improvement per strength step


def adapt_strength(no_improve: int, solution_size: int, step: int = 10) -> int:
    cap = max(2, math.ceil(solution_size / 4))
    return min(1 + no_improve // step, cap)


def accept(new_weight: float, cur_weight: float, theta: float) -> bool:
    return new_weight > cur_weight + EPS or new_weight >= theta * cur_weight - EPS


class _State:
    """Working solution: member set, per-clique owner list, running weight."""

    __slots__ = ("g", "owner", "members", "weight")

    def __init__(self, g: WeightedGraph):
        self.g = g
        self.owner = [-1] * g.n_cliques
        self.members: set = set()
        self.weight = 0.0

    def copy(self) -> "_State":
        s = _State.__new__(_State)
        s.g, s.owner, s.members, s.weight = self.g, self.owner[:], set(self.members), self.weight
        return s

    def free(self, n: int) -> bool:
        owner = self.owner
        for c in self.g.memb_lists[n]:
            if owner[c] >= 0:
                return False
        return True

    def add(self, n: int) -> None:
        for c in self.g.memb_lists[n]:
            self.owner[c] = n
        self.members.add(n)
        self.weight += self.g.weight_list[n]

    def remove(self, n: int) -> None:
        for c in self.g.memb_lists[n]:
            self.owner[c] = -1
        self.members.discard(n)
        self.weight -= self.g.weight_list[n]

    def owners_of(self, n: int) -> set:
        owner = self.owner
        return {owner[c] for c in self.g.memb_lists[n] if owner[c] >= 0 and owner[c] != n}

    def gain(self, n: int) -> float:
        """sigma for one node."""
        w = self.g.weight_list
        owner = self.owner
        seen = None
        lost = 0.0
        for c in self.g.memb_lists[n]:
            o = owner[c]
            if o >= 0 and o != n:
                if seen is None:
                    seen = {o}
                elif o in seen:
                    continue
                else:
                    seen.add(o)
                lost += w[o]
        return w[n] - lost

    def sorted_members(self) -> tuple:
        return tuple(sorted(self.members))


def sigma(g: WeightedGraph, owner: np.ndarray, nodes) -> np.ndarray:
    """Swap gain of each node in ``nodes`` against the owner table."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        return np.zeros(0)
    m = g.memberships[nodes]
    ow = np.where(m >= 0, owner[np.where(m >= 0, m, 0)], -1)
    ow = np.where(ow == nodes[:, None], -1, ow)
    if ow.shape[1] > 1:
        ow = np.sort(ow, axis=1)
        dup = np.zeros_like(ow, dtype=bool)
        dup[:, 1:] = ow[:, 1:] == ow[:, :-1]
        ow = np.where(dup, -1, ow)
    lost = np.where(ow >= 0, g.weights[np.where(ow >= 0, ow, 0)], 0.0).sum(axis=1)
    return g.weights[nodes] - lost


def initial_solution(g: WeightedGraph, state: Optional[_State] = None) -> _State:
    """Greedy by weight, then level, then id; extends ``state`` if given."""
    st = _State(g) if state is None else state
    ids = np.arange(len(g))
    order = np.lexsort((ids, -g.levels.astype(np.int64), -g.weights))
    w = g.weight_list
    for n in order.tolist():
        if w[n] > 0 and n not in st.members and st.free(n):
            st.add(n)
    return st


def _near(g: WeightedGraph, cliques) -> set:
    lists = g.clique_lists
    out: set = set()
    for c in cliques:
        out.update(lists[c])
    return out


def _sigma_phase(st: _State, candidates, tabu=frozenset()) -> set:
    """Apply positive-gain swaps until none remain; returns the nodes added.

    Only nodes whose gain may have grown need to be offered; after a swap
    the members of the displaced nodes' cliques are re-offered.
    """
    g = st.g
    members = st.members
    added = set()
    heap = []
    for n in candidates:
        if n not in members and n not in tabu:
            s = st.gain(n)
            if s > EPS:
                heap.append((-s, n))
    heapq.heapify(heap)
    while heap:
        neg, n = heapq.heappop(heap)
        if n in members:
            continue
        cur = st.gain(n)
        if cur <= EPS:
            continue
        if cur < -neg - EPS:
            heapq.heappush(heap, (-cur, n))
            continue
        displaced = st.owners_of(n)
        for o in displaced:
            st.remove(o)
            added.discard(o)
        st.add(n)
        added.add(n)
        if displaced:
            freed = {c for o in displaced for c in g.memb_lists[o]}
            for v in _near(g, freed):
                if v not in members and v not in tabu:
                    s = st.gain(v)
                    if s > EPS:
                        heapq.heappush(heap, (-s, v))
    return added


def _one_out_swap(st: _State, m: int, tabu=frozenset()) -> bool:
    """Replace member ``m`` by a heavier independent set of its 1-tight neighbours.

    A neighbour is 1-tight when ``m`` is its only solution neighbour. This
    catches moves such as b -> {a, c} on the path a-b-c that no single
    positive-gain insertion reaches.
    """
    g = st.g
    owner = st.owner
    memb = g.memb_lists
    w = g.weight_list
    cand = set()
    for c in memb[m]:
        for v in g.clique_lists[c]:
            if v != m and v not in st.members and v not in tabu:
                if all(owner[d] < 0 or owner[d] == m for d in memb[v]):
                    cand.add(v)
    if len(cand) < 2:
        return False
    used: set = set()
    pick = []
    total = 0.0
    for v in sorted(cand, key=lambda v: (-w[v], v)):
        cs = memb[v]
        if any(c in used for c in cs):
            continue
        used.update(cs)
        pick.append(v)
        total += w[v]
    if len(pick) < 2 or total <= w[m] + EPS:
        return False
    st.remove(m)
    for v in pick:
        st.add(v)
    return True


def local_search(st: _State, candidates=None, tabu=frozenset()) -> _State:
    """Positive-gain insertions, then one-out/many-in exchanges, to a fixpoint.

    Nodes in ``tabu`` are never inserted. Without tabu the result is
    sigma-maximal: no outside node has positive gain.
    """
    g = st.g
    pending = range(len(g)) if candidates is None else candidates
    check = None if candidates is None else set()
    if check is not None:
        owner = st.owner
        for n in candidates:
            for c in g.memb_lists[n]:
                if owner[c] >= 0:
                    check.add(owner[c])
    while True:
        added = _sigma_phase(st, pending, tabu)
        todo = st.members if check is None else (check | added) & st.members
        touched = set()
        for m in sorted(todo):
            if m in st.members and _one_out_swap(st, m, tabu):
                touched |= _near(g, g.memb_lists[m])
        if not touched:
            return st
        pending = touched
        check = {st.owner[c] for v in touched for c in g.memb_lists[v] if st.owner[c] >= 0}


def perturb(st: _State, tier: int, k: int, rng: np.random.Generator) -> tuple:
    """Drop up to ``k`` solution nodes of level ``tier``, refill from other levels.

    Returns (nodes whose gain may have increased, removed nodes).
    """
    g = st.g
    levels = g.level_list
    pool = sorted(m for m in st.members if levels[m] == tier)
    if not pool:
        return set(), []
    count = min(max(1, k // 2), len(pool)) if tier == 2 else min(k, len(pool))
    removed = [pool[i] for i in rng.choice(len(pool), size=count, replace=False).tolist()]
    freed = set()
    for r in removed:
        freed.update(g.memb_lists[r])
        st.remove(r)
    touched = _near(g, freed)
    members = st.members
    cand = sorted(v for v in touched if levels[v] != tier and v not in members and st.free(v))
    for i in rng.permutation(len(cand)).tolist():
        n = cand[i]
        if st.free(n):
            st.add(n)
    return touched, removed


def solve_ils(g: WeightedGraph, params: IlsParams = IlsParams(), rng: Optional[np.random.Generator] = None,
              init: Optional[Iterable[int]] = None) -> Solution:
    """Iterated local search; ``init`` warm-starts from an independent set."""
    rng = np.random.default_rng(0) if rng is None else rng
    if len(g) == 0:
        return Solution((), 0.0)
    st = _State(g)
    if init is not None:
        for n in sorted(set(int(i) for i in init)):
            if not st.free(n):
                raise ValueError("warm start is not an independent set")
            st.add(n)
    st = local_search(initial_solution(g, st))
    best = st.copy()
    theta = params.theta0
    no_improve = 0
    for it in range(params.max_iter):
        k = adapt_strength(no_improve, len(st.members), params.stall_step)
        trial = st.copy()
        touched, removed = perturb(trial, it % 3, k, rng)
        if touched:
            # keep the removed nodes out for one pass, else the search just undoes the kick
            local_search(trial, touched, tabu=frozenset(removed))
            local_search(trial, removed)
        if trial.weight > st.weight + EPS:
            st = trial
            no_improve = 0
        elif accept(trial.weight, st.weight, theta):
            st = trial
        else:
            no_improve += 1
        if st.weight > best.weight + EPS:
            best = st.copy()
        if no_improve > params.max_iter / 4:
            theta *= params.theta_decay
    members = best.sorted_members()
    return Solution(members, math.fsum(g.weight_list[n] for n in members))
