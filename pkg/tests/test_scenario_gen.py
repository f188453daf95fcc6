import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdsched.model import scenario_to_dict, validate_scenario
from crowdsched.scenario_gen import RANDOM_1, GenParams, generate


def test_random_1_shape():
    s = generate(RANDOM_1, seed=0)
    assert validate_scenario(s) == []
    assert s.area == (30.0, 30.0)
    assert (len(s.tasks), len(s.charges)) == (120, 20)
    assert (len(s.workers), len(s.uavs), len(s.vehicles)) == (50, 30, 20)
    assert {t.cost_power for t in s.tasks} == {3.0}
    assert {v.charge_power for v in s.vehicles} == {10.0}
    assert all(a.downtime - a.uptime == pytest.approx(60.0) for a in (*s.uavs, *s.workers, *s.vehicles))
    assert all(0 <= a.uptime and a.downtime <= 180 for a in s.uavs)


def test_targets_on_distinct_cells():
    s = generate(RANDOM_1, seed=1)
    cells = [t.loc for t in s.tasks]
    assert len(set(cells)) == len(cells)
    charges = [c.loc for c in s.charges]
    assert len(set(charges)) == len(charges)
    assert all(x % 1 == 0.5 and y % 1 == 0.5 for x, y in cells + charges)


def test_zero_tasks_valid():
    s = generate(GenParams(tasks_n=0), seed=0)
    assert s.tasks == () and validate_scenario(s) == []


def test_cost_range():
    s = generate(GenParams(task_cost=(2.0, 3.0)), seed=4)
    assert all(2.0 <= t.cost_power <= 3.0 for t in s.tasks)
    assert len({t.cost_power for t in s.tasks}) > 1


def test_area_too_small_for_charges():
    with pytest.raises(ValueError, match="distinct charge points"):
        generate(GenParams(area=(3, 3), charges_n=10))


def test_seed_reproducible_and_distinct():
    a, b = generate(RANDOM_1, seed=9), generate(RANDOM_1, seed=9)
    assert scenario_to_dict(a) == scenario_to_dict(b)
    assert scenario_to_dict(a) != scenario_to_dict(generate(RANDOM_1, seed=10))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 15), st.integers(1, 15), st.integers(0, 40), st.integers(0, 10),
       st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)), st.integers(0, 2**31))
def test_generated_scenarios_validate(w, h, nt, nc, agents, seed):
    p = GenParams(area=(w, h), tasks_n=nt, charges_n=nc, agents=agents, seed=seed)
    if nc > w * h:
        with pytest.raises(ValueError):
            generate(p)
        return
    s = generate(p)
    assert validate_scenario(s) == []
    assert len(s.tasks) == nt and len(s.charges) == nc
