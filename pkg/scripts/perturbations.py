"""MPQ completion rate under each perturbation, one at a time, then all together."""
import dataclasses

import numpy as np

from crowdsched import generate, run_episode
from crowdsched.cli import DEFAULT_RANGES
from crowdsched.model import PerturbationConfig

SEEDS = range(5)
cases = {"none": {}, **{k: {k: v} for k, v in DEFAULT_RANGES.items()}, "all": dict(DEFAULT_RANGES)}
for label, kw in cases.items():
    rates = []
    for s in SEEDS:
        sc = dataclasses.replace(generate(seed=s), perturbations=PerturbationConfig(**kw))
        res = run_episode(sc, "mpq", s)
        assert res.audit["conflicting_pairs"] == 0 and res.audit["min_power"] >= 0
        rates.append(res.completion_rate)
    print(f"{label:16s} {np.mean(rates):.3f} ± {np.std(rates):.3f}")
