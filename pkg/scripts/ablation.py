"""Hierarchical vs uniform node weights, MPQ scheduler."""
import sys

import numpy as np

from crowdsched import generate, run_episode
from crowdsched.sim import SchedulerConfig

seeds = range(int(sys.argv[1]) if len(sys.argv) > 1 else 5)
for mode in ("hierarchical", "uniform"):
    rates = [run_episode(generate(seed=s), "mpq", s, SchedulerConfig(weight_mode=mode)).completion_rate
             for s in seeds]
    print(f"{mode:12s} {np.mean(rates):.3f}  {np.round(rates, 3).tolist()}")
