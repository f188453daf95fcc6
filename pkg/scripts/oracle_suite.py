"""ILS and MPQ against exhaustive search on small typed conflict graphs.

Uses the same generator as the test suite, so it must be run from the repo root.
"""
import sys
import time

import numpy as np

sys.path.insert(0, "tests")
from conftest import oracle_suite  # noqa: E402

from crowdsched import IlsParams, solve_ils, solve_mpq  # noqa: E402

suite = oracle_suite(200, seed=20240601)
ratios_s, ratios_m, exact = [], [], 0
t0 = time.perf_counter()
for i, (_, g, _, opt) in enumerate(suite):
    s = solve_ils(g, IlsParams(), np.random.default_rng(i)).weight
    m = solve_mpq(g, rng=np.random.default_rng(i)).solution.weight
    exact += s >= opt - 1e-9
    ratios_s.append(s / opt if opt else 1.0)
    ratios_m.append(m / s if s else 1.0)
print(f"instances {len(suite)}  ils exact {exact}  worst ils/opt {min(ratios_s):.4f}")
print(f"mpq/ils worst {min(ratios_m):.4f} at #{int(np.argmin(ratios_m))}  mean {np.mean(ratios_m):.4f}")
print(f"below 0.95: {sum(r < 0.95 for r in ratios_m)}  elapsed {time.perf_counter() - t0:.1f} s")
