"""Completion rate and decision latency of every scheduler on the default scenario.

    python scripts/run_default_comparison.py --seeds 0-4 --schedulers mpq,greedy,kwta
"""
import argparse
import json
import time

import numpy as np

from crowdsched import generate, run_episode


def seeds(s):
    if "-" in s:
        a, b = s.split("-")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in s.split(",")]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=seeds, default=list(range(5)))
    ap.add_argument("--schedulers", default="mpq,ils,greedy,kwta")
    ap.add_argument("--json", default=None, help="optional path for the raw numbers")
    args = ap.parse_args()
    table = {}
    for name in args.schedulers.split(","):
        rates, lat = [], []
        t0 = time.perf_counter()
        for s in args.seeds:
            res = run_episode(generate(seed=s), name, s)
            rates.append(res.completion_rate)
            lat.extend(res.decision_ms)
        table[name] = dict(rate=float(np.mean(rates)), std=float(np.std(rates)),
                           mean_ms=float(np.mean(lat)), max_ms=float(np.max(lat)),
                           wall_s=time.perf_counter() - t0, per_seed=rates)
        r = table[name]
        print(f"{name:7s} rate {r['rate']:.3f} ± {r['std']:.3f}  mean {r['mean_ms']:8.1f} ms"
              f"  max {r['max_ms']:8.1f} ms  wall {r['wall_s']:.1f} s", flush=True)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(table, fh, indent=1)


if __name__ == "__main__":
    main()
