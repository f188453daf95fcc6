import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdsched.model import ChargePoint, GridPoint, Task, Uav, Vehicle, Worker, ceil_to_interval, distance
from crowdsched.weights import (
    Snapshot,
    _masked_softmax,
    charge_affinity,
    charge_urgency_base,
    choice_distribution,
    cost_tables,
    expected_charge_uav_cost,
    expected_charge_vehicle_cost,
    expected_task_uav_cost,
    expected_task_worker_cost,
    pair_charge_weight,
    pair_task_weight,
    softplus,
    task_affinity,
    uav_combined_gain,
    uav_gain_rows,
    vehicle_gain_matrix,
    vehicle_move_gain,
    worker_gain_matrix,
    worker_move_gain,
)

from conftest import fig4_snapshot

mpmath.mp.dps = 50


def _hp_softplus(x):
    return mpmath.log(1 + mpmath.exp(mpmath.mpf(x)))


def test_softplus_examples():
    assert softplus(0.0) == pytest.approx(math.log(2), abs=1e-12)
    assert softplus(100.0) == pytest.approx(100.0, abs=1e-12)
    assert softplus(-50.0) == pytest.approx(math.exp(-50), rel=1e-9)


@given(st.floats(-700, 700))
def test_softplus_matches_high_precision(x):
    assert abs(softplus(x) - float(_hp_softplus(x))) <= 1e-9 * max(1.0, abs(x))


def test_affinity_endpoints():
    full = Uav(0, GridPoint(0, 0), power=30, full_power=30)
    empty = Uav(0, GridPoint(0, 0), power=0, full_power=30)
    assert task_affinity(full) == pytest.approx(1.0, abs=1e-12)
    assert task_affinity(empty) == 0.0
    assert charge_affinity(empty) == pytest.approx(1.0, abs=1e-12)
    assert charge_affinity(full) == 0.0
    with pytest.raises(ValueError):
        task_affinity(Uav(0, GridPoint(0, 0), power=0, full_power=0))


@given(st.floats(0, 30))
def test_affinities_monotone_and_bounded(p):
    u = Uav(0, GridPoint(0, 0), power=p, full_power=30)
    a, b = task_affinity(u), charge_affinity(u)
    assert 0 <= a <= 1 + 1e-12 and 0 <= b <= 1 + 1e-12
    hi = Uav(0, GridPoint(0, 0), power=min(30, p + 1), full_power=30)
    assert task_affinity(hi) >= a - 1e-12
    assert charge_affinity(hi) <= b + 1e-12


@given(st.lists(st.tuples(st.floats(0, 30), st.floats(0, 30)), min_size=1, max_size=12),
       st.tuples(st.floats(0, 30), st.floats(0, 30)), st.floats(0.2, 3), st.sampled_from([1.0, 5.0, 10.0]))
def test_choice_distribution_sums_to_one(targets, origin, speed, interval):
    p = choice_distribution(GridPoint(*origin), speed, [GridPoint(*t) for t in targets], interval)
    assert abs(p.sum() - 1.0) <= 1e-9
    assert (p >= 0).all()
    # nearer (in rounded time) never less likely
    t = [ceil_to_interval(distance(GridPoint(*origin), GridPoint(*x)) / speed, interval) for x in targets]
    for i in range(len(t)):
        for j in range(len(t)):
            if t[i] < t[j]:
                assert p[i] >= p[j]


def test_choice_distribution_empty():
    assert len(choice_distribution(GridPoint(0, 0), 1.0, [], 10)) == 0


def test_masked_softmax_all_masked_is_zero():
    out = _masked_softmax(np.array([1.0, 2.0]), np.array([False, False]))
    assert (out == 0).all()


def test_urgency_base():
    assert charge_urgency_base(30, 30, "hierarchical") == pytest.approx(11.0)
    assert charge_urgency_base(0, 30, "hierarchical") == pytest.approx(10 + math.e)
    assert charge_urgency_base(0, 30, "uniform") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        charge_urgency_base(1, 30, "flat")


def test_cost_tables_match_scalar_route():
    snap = fig4_snapshot()
    tab = cost_tables(snap)
    I = snap.interval
    for x, t in enumerate(snap.tasks):
        assert tab.du_tl[x] == pytest.approx(expected_task_uav_cost(t, snap, I), abs=1e-9)
        assert tab.dw_tl[x] == pytest.approx(expected_task_worker_cost(t, snap, I), abs=1e-9)
    for y, c in enumerate(snap.charges):
        assert tab.du_chl[y] == pytest.approx(expected_charge_uav_cost(c, snap, I), abs=1e-9)
        assert tab.dv_chl[y] == pytest.approx(expected_charge_vehicle_cost(c, snap, I), abs=1e-9)


def test_worker_cost_by_hand():
    # worker 0 at (2.5,1.5), speed 0.5: 1 unit to task 0 -> 2 min -> ceil 10
    snap = fig4_snapshot()
    assert expected_task_worker_cost(snap.tasks[0], snap, 10.0) == 10.0


def test_sentinel_when_nobody_can_serve():
    snap = fig4_snapshot()
    snap.workers = []
    snap.vehicles = []
    assert expected_task_worker_cost(snap.tasks[0], snap, 10.0) == snap.sentinel
    assert expected_charge_vehicle_cost(snap.charges[0], snap, 10.0) == snap.sentinel
    tab = cost_tables(snap)
    assert (tab.dw_tl == snap.sentinel).all() and (tab.dv_chl == snap.sentinel).all()


def _random_snapshot(seed):
    rng = np.random.default_rng(seed)

    def pt():
        return GridPoint(float(rng.integers(0, 12)) + 0.5, float(rng.integers(0, 12)) + 0.5)

    uavs = [Uav(i, pt(), power=float(rng.uniform(2, 30)), full_power=30) for i in range(3)]
    workers = [Worker(i, pt(), speed=float(rng.choice([0.5, 1.0]))) for i in range(3)]
    vehicles = [Vehicle(i, pt()) for i in range(2)]
    tasks = [Task(i, pt(), cost_power=float(rng.uniform(1, 5))) for i in range(6)]
    charges = [ChargePoint(i, pt()) for i in range(3)]
    return Snapshot(0.0, uavs, workers, vehicles, tasks, charges, 10.0, 180.0, (12.0, 12.0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_vectorised_gains_match_scalar(seed):
    snap = _random_snapshot(seed)
    tab = cost_tables(snap)
    wm = worker_gain_matrix(snap, tab)
    for j, w in enumerate(snap.workers):
        for x, t in enumerate(snap.tasks):
            if t.loc != w.loc:
                assert wm[j, x] == pytest.approx(worker_move_gain(w, t.loc, tab, snap), abs=1e-9)
    vm = vehicle_gain_matrix(snap, tab)
    for k, v in enumerate(snap.vehicles):
        for y, c in enumerate(snap.charges):
            if c.loc != v.loc:
                assert vm[k, y] == pytest.approx(vehicle_move_gain(v, c.loc, tab, snap), abs=1e-9)
    locs = np.array([[t.loc[0], t.loc[1]] for t in snap.tasks] + [[c.loc[0], c.loc[1]] for c in snap.charges])
    for u in snap.uavs:
        row = uav_gain_rows(u, locs, snap, tab)
        for i, (a, b) in enumerate(locs):
            dest = GridPoint(float(a), float(b))
            if dest == u.loc:
                continue
            if distance(u.loc, dest) > u.power + 1e-9:
                assert math.isnan(row[i])
            else:
                assert row[i] == pytest.approx(uav_combined_gain(u, dest, tab, snap), abs=1e-9)


def test_pair_weight_levels_on_example():
    snap = fig4_snapshot()
    tab = cost_tables(snap)
    u, w, v = snap.uavs[0], snap.workers[0], snap.vehicles[0]
    task_w = pair_task_weight(u, snap.tasks[0], w, tab, snap)
    charge_w = pair_charge_weight(u, snap.charges[0], v, tab, snap)
    # task lead softplus(100)/10 = 10; charge lead softplus(11)/10 ~ 1.1
    assert task_w > 10.0
    assert 1.1 <= charge_w < 3.0
    assert pair_task_weight(u, snap.tasks[0], w, tab, snap, "uniform") < 1.0


def test_pair_weight_rejects_infeasible():
    snap = fig4_snapshot()
    tab = cost_tables(snap)
    weak = Uav(9, GridPoint(1.5, 1.5), power=0.1, full_power=30)
    with pytest.raises(ValueError):
        pair_task_weight(weak, snap.tasks[0], snap.workers[0], tab, snap)
    with pytest.raises(ValueError):
        pair_charge_weight(weak, snap.charges[1], snap.vehicles[0], tab, snap)


def _snap(uavs=(), workers=(), vehicles=(), tasks=(), charges=()):
    return Snapshot(0.0, list(uavs), list(workers), list(vehicles), list(tasks), list(charges), 10.0, 180.0,
                    (40.0, 40.0))


def test_affinity_at_half():
    u = Uav(0, GridPoint(0, 0), power=15, full_power=30)
    ref = (1 - math.exp(-0.5)) / (1 - math.exp(-1))
    assert task_affinity(u) == pytest.approx(ref, abs=1e-12)
    assert charge_affinity(u) == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(0.62245, abs=1e-5)


def test_expected_cost_examples():
    task = Task(0, GridPoint(10.5, 0.5))
    charge = ChargePoint(0, GridPoint(10.5, 0.5))
    far = Uav(0, GridPoint(0.5, 0.5), power=30, full_power=30)
    s = _snap(uavs=[far], tasks=[task], charges=[charge])
    assert expected_task_uav_cost(task, s, 10) == pytest.approx(10.0)
    s2 = _snap(uavs=[far, Uav(1, GridPoint(0.5, 0.5), power=30, full_power=30)], tasks=[task], charges=[charge])
    assert expected_task_uav_cost(task, s2, 10) == pytest.approx(10.0)
    assert expected_task_uav_cost(task, _snap(tasks=[task], charges=[charge]), 10) == 180.0

    w = Worker(0, GridPoint(5.5, 0.5), speed=0.5)
    assert expected_task_worker_cost(task, _snap(workers=[w], tasks=[task]), 10) == 10.0
    assert expected_task_worker_cost(task, _snap(workers=[Worker(0, task.loc)], tasks=[task]), 10) == 10.0

    empty = Uav(0, charge.loc, power=0, full_power=30)
    assert expected_charge_uav_cost(charge, _snap(uavs=[empty], charges=[charge]), 10) == 10.0
    assert expected_charge_uav_cost(charge, _snap(uavs=[far], charges=[charge]), 10) == 180.0
    assert expected_charge_uav_cost(charge, _snap(charges=[charge]), 10) == 180.0

    v = Vehicle(0, GridPoint(0.5, 0.5))
    assert expected_charge_vehicle_cost(charge, _snap(vehicles=[v], charges=[charge]), 10) == 10.0
    assert expected_charge_vehicle_cost(charge, _snap(vehicles=[Vehicle(0, charge.loc)], charges=[charge]), 10) == 10.0


def test_choice_distribution_examples():
    o = GridPoint(0, 0)
    assert choice_distribution(o, 1, [GridPoint(3, 4), GridPoint(4, 3)], 10).tolist() == [0.5, 0.5]
    assert choice_distribution(o, 1, [GridPoint(3, 4)], 10).tolist() == [1.0]
    p = choice_distribution(o, 1, [GridPoint(10, 0), GridPoint(20, 0)], 10)
    e = mpmath.e ** 10
    assert p[0] == pytest.approx(float(e / (e + 1)), abs=1e-12)


def test_worker_gain_sole_task():
    task = Task(0, GridPoint(5.5, 0.5))
    w = Worker(0, GridPoint(0.5, 0.5), speed=0.5)
    u = Uav(0, GridPoint(20.5, 0.5), power=30, full_power=30)
    s = _snap(uavs=[u], workers=[w], tasks=[task], charges=[ChargePoint(0, GridPoint(20.5, 1.5))])
    tab = cost_tables(s)
    # one task: both distributions are (1.0), so the relative change is 0
    assert worker_move_gain(w, task.loc, tab, s) == pytest.approx(math.log(2) / 10, abs=1e-12)
    assert worker_move_gain(w, task.loc, tab, _snap(workers=[w])) == 0.0


def test_combined_gain_endpoints():
    snap = fig4_snapshot()
    tab = cost_tables(snap)
    from crowdsched.weights import uav_charge_gain, uav_task_gain
    dest = snap.tasks[0].loc
    u = snap.uavs[0]
    moved = distance(u.loc, dest)
    full = Uav(0, u.loc, power=30, full_power=30 - moved)
    # after the move power equals full_power exactly
    assert uav_combined_gain(full, dest, tab, snap) == pytest.approx(uav_task_gain(full, dest, tab, snap), abs=1e-12)
    drained = Uav(0, u.loc, power=moved, full_power=30)
    assert uav_combined_gain(drained, dest, tab, snap) == pytest.approx(
        uav_charge_gain(drained, dest, tab, snap), abs=1e-12)


def test_pair_weight_colocated_examples():
    loc = GridPoint(2.5, 2.5)
    u = Uav(0, loc, power=30, full_power=30)
    w = Worker(0, loc)
    task = Task(0, loc)
    charge = ChargePoint(0, loc)
    s = _snap(uavs=[u], workers=[w], tasks=[task], charges=[charge])
    tab = cost_tables(s)
    gains = worker_move_gain(w, loc, tab, s) + uav_combined_gain(u, loc, tab, s)
    assert pair_task_weight(u, task, w, tab, s) == pytest.approx(softplus(100) / 10 + gains, abs=1e-12)
    assert pair_task_weight(u, task, w, tab, s, "uniform") == pytest.approx(softplus(1) / 10 + gains, abs=1e-12)

    v = Vehicle(0, loc)
    for power, base_h, base_u in ((0.0, 10 + math.e, 1.0), (30.0, 11.0, 1 / math.e)):
        uu = Uav(0, loc, power=power, full_power=30)
        s = _snap(uavs=[uu], vehicles=[v], tasks=[task], charges=[charge])
        tab = cost_tables(s)
        gains = vehicle_move_gain(v, loc, tab, s) + uav_combined_gain(uu, loc, tab, s)
        assert pair_charge_weight(uu, charge, v, tab, s) == pytest.approx(softplus(base_h) / 10 + gains, abs=1e-12)
        assert pair_charge_weight(uu, charge, v, tab, s, "uniform") == pytest.approx(
            softplus(base_u) / 10 + gains, abs=1e-12)
