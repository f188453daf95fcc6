"""Multi-priority-queue scheduling.

Every agent gets a queue of the nodes it leads (UAV first, then worker, then
vehicle), best weight first. Rounds pull the next K nodes from every queue
into a growing subgraph and re-solve it with a short warm-started ILS. K
doubles whenever a round fails to improve the objective.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .graph import WeightedGraph
from .ils import IlsParams, Solution, solve_ils
from .model import EPS


@dataclass(frozen=True)
class MpqParams:
    k0: int = 1
    ils: IlsParams = field(default_factory=lambda: IlsParams(max_iter=100))
    max_rounds: int = 10_000


@dataclass
class RoundTrace:
    round: int
    k: int
    subgraph_size: int
    best_weight: float
    improved: bool


@dataclass
class MpqResult:
    solution: Solution
    trace: list

    def write_trace(self, path, epoch: Optional[float] = None) -> None:
        """Append one JSON object per round; ``epoch`` tags the solve."""
        with Path(path).open("a") as fh:
            for r in self.trace:
                rec = asdict(r) if epoch is None else {"epoch": epoch, **asdict(r)}
                fh.write(json.dumps(rec) + "\n")


def read_trace(path) -> list:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def build_queues(g: WeightedGraph) -> dict:
    """Map agent clique -> node ids sorted by (weight desc, id asc)."""
    order = np.lexsort((np.arange(len(g)), -g.weights))
    keys = g.queue_key[order]
    queues: dict = {}
    # stable grouping keeps the per-queue order
    grp = np.argsort(keys, kind="stable")
    ks, starts = np.unique(keys[grp], return_index=True)
    bounds = list(starts) + [len(grp)]
    for i, k in enumerate(ks.tolist()):
        queues[k] = order[grp[bounds[i]:bounds[i + 1]]]
    return queues


def extract_top_k(queues: dict, heads: dict, k: int) -> list:
    """Advance every queue by up to ``k`` entries and return what came out."""
    out = []
    for key, q in queues.items():
        h = heads[key]
        if h < len(q):
            out.append(q[h:h + k])
            heads[key] = min(len(q), h + k)
    return np.concatenate(out).tolist() if out else []


def _all_represented(g: WeightedGraph, owner: np.ndarray, queues: dict, heads: dict) -> bool:
    for c in g.agent_cliques.tolist():
        if owner[c] >= 0:
            continue
        q = queues.get(c)
        if q is not None and heads[c] < len(q):
            return False
    return True


def solve_mpq(g: WeightedGraph, params: MpqParams = MpqParams(),
              rng: Optional[np.random.Generator] = None) -> MpqResult:
    rng = np.random.default_rng(0) if rng is None else rng
    queues = build_queues(g)
    heads = {k: 0 for k in queues}
    owner = np.full(g.n_cliques, -1, dtype=np.int64)
    chosen: list = []
    weight = 0.0
    pool: list = []
    k = params.k0
    trace = []
    for rnd in range(1, params.max_rounds + 1):
        if all(heads[q] >= len(queues[q]) for q in queues):
            break
        if _all_represented(g, owner, queues, heads):
            break
        k_used = k
        pool.extend(extract_top_k(queues, heads, k))
        ids = np.array(sorted(set(pool)), dtype=np.int64)
        sub = g.subgraph(ids)
        local = {int(n): i for i, n in enumerate(ids.tolist())}
        sol = solve_ils(sub, params.ils, rng, init=[local[n] for n in chosen])
        improved = sol.weight > weight + EPS
        if improved:
            chosen = sorted(int(ids[i]) for i in sol.members)
            weight = float(g.weights[chosen].sum())
            owner[:] = -1
            for n in chosen:
                row = g.memberships[n]
                owner[row[row >= 0]] = n
        else:
            k *= 2
        trace.append(RoundTrace(rnd, k_used, len(ids), weight, improved))
    return MpqResult(Solution(tuple(chosen), weight), trace)
