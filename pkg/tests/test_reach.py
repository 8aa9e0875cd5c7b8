import math

import numpy as np
import pytest

from solvlin.classify import Cone, classify
from solvlin.core import GroupPoint, SystemParams
from solvlin.flows import flow_endpoint, rk4_flow
from solvlin.reach import (
    barrier_check,
    decay_to_cone_check,
    escape_check,
    reach_sample,
    steer,
    thread_count,
    verify_control_set,
)


def assert_lands(sp, p, q, res, eps):
    assert res.found
    end = flow_endpoint(sp, p, res.control)
    assert math.hypot(end.x - q.x, end.y - q.y) <= eps
    if len(res.control):
        num = rk4_flow(sp, p, res.control, 1e-3).final
        assert math.hypot(num.x - q.x, num.y - q.y) <= 2 * eps


def test_trivial_steer():
    sp = SystemParams(1, -1, 1, 1)
    p = GroupPoint(1.0, 0.2)
    res = steer(sp, p, p)
    assert res.found and len(res.control) == 0 and res.terminal_error == 0.0


def test_shear_steering_example():
    sp = SystemParams(1, 0, 1, 0)
    p, q = GroupPoint(0.5, -1.0), GroupPoint(2.0, 3.0)
    res = steer(sp, p, q, eps=1e-2)
    assert res.method == "analytic"
    assert_lands(sp, p, q, res, 1e-2)


def test_barrier_blocks_crossing_the_cone():
    sp = SystemParams(0, -1, 1, 1)
    res = steer(sp, GroupPoint(1.0, 0.4), GroupPoint(1.0, 1.0), budget=50)
    assert not res.found and res.method == "barrier-certified"
    assert res.certificate


@pytest.mark.parametrize(
    "params, p, q",
    [
        ((0, -1, 1, 1), (1.0, 0.4), (2.0, -1.0)),
        ((0, -1, 1, 1), (2.0, -1.0), (1.0, 0.4)),
        ((1, 1, 1, 1), (1.0, 0.5), (2.0, -0.5)),
        ((1, 1, 1, 1), (2.0, -0.5), (0.5, 0.9)),
        ((1, 0, 0, 1), (2.0, -1.0), (2.0, 3.0)),
        ((0, -1, 0, 1, -1, 2), (1.0, 0.5), (1.0, -0.5)),
        ((1, -1, 1, 1), (0.5, -0.5), (3.0, 2.0)),
    ],
)
def test_steering_inside_control_sets(params, p, q):
    sp = SystemParams(*params)
    p, q = GroupPoint(*p), GroupPoint(*q)
    desc = classify(sp)
    assert desc.contains(p) and desc.contains(q)
    assert_lands(sp, p, q, steer(sp, p, q, eps=1e-2), 1e-2)


def test_steer_rejects_bad_arguments():
    sp = SystemParams(1, 0, 1, 1)
    with pytest.raises(ValueError):
        steer(sp, GroupPoint(1, 0), GroupPoint(2, 0), eps=0.0)
    with pytest.raises(ValueError):
        steer(sp, GroupPoint(1, 0), GroupPoint(2, 0), budget=0)


def test_reach_sample_saddle_stays_on_axis():
    cloud = reach_sample(SystemParams(0, -1, 1, 0), GroupPoint(1.5, 0.0), 5.0, 200, seed=3)
    assert len(cloud) == 200
    assert np.all(cloud.y == 0.0) and np.all(cloud.end_y == 0.0)


def test_reach_sample_cone_stays_below_boundary():
    cloud = reach_sample(SystemParams(0, -1, 1, 1), GroupPoint(1.0, 0.0), 5.0, 500, seed=1)
    assert np.all(cloud.y <= cloud.x / 2 + 1e-9)


def test_reach_sample_empty_and_deterministic():
    sp = SystemParams(1, 0, 1, 1)
    assert len(reach_sample(sp, GroupPoint(1, 0), 2.0, 0)) == 0
    a = reach_sample(sp, GroupPoint(1, 0), 2.0, 50, seed=9)
    b = reach_sample(sp, GroupPoint(1, 0), 2.0, 50, seed=9)
    assert np.array_equal(a.end_x, b.end_x) and np.array_equal(a.y, b.y)


def test_verify_line_case():
    sp = SystemParams(1, -1, 1, 1)
    rep = verify_control_set(sp, classify(sp), pairs=4, invariance_samples=200, seed=2)
    assert rep.clean and rep.pairs_steered == rep.pairs_tested == 4


def test_verify_negative_invariance_cone():
    sp = SystemParams(1, 1, 1, 1)
    rep = verify_control_set(sp, classify(sp), pairs=4, invariance_samples=300, seed=5)
    assert rep.clean, rep.to_dict()


def test_verify_counts_violations_for_a_wrong_description():
    # the true cone is {y <= x/2}; claiming {y <= x/4} must produce invariance violations
    sp = SystemParams(0, -1, 1, 1)
    desc = classify(sp)
    wrong = Cone(0.0, None, type(desc.upper)(0.25))
    rep = verify_control_set(sp, wrong, pairs=0, invariance_samples=300, seed=0)
    assert rep.invariance_violations > 0 and not rep.clean
    assert rep.escape_witnesses


def test_verify_is_independent_of_thread_count(monkeypatch):
    sp = SystemParams(0, -1, 1, 1)
    desc = classify(sp)
    a = verify_control_set(sp, desc, pairs=3, invariance_samples=100, seed=4, workers=1)
    b = verify_control_set(sp, desc, pairs=3, invariance_samples=100, seed=4, workers=4)
    assert a.to_dict() == b.to_dict()
    monkeypatch.setenv("SOLVLIN_THREADS", "3")
    assert thread_count() == 3


def test_escape_outside_interval():
    sp = SystemParams(1, 0, 0, 1)
    rep = escape_check(sp, 0.3, n=100, seed=0)
    assert rep.direction == -1 and rep.monotone and not rep.witnesses
    inside = escape_check(sp, 2.0, n=10)
    assert inside.direction == 0 and not inside.monotone
    with pytest.raises(ValueError):
        escape_check(SystemParams(1, 0, 1, 1), 0.3)


def test_decay_toward_cone():
    sp = SystemParams(0, -5, 1, 1)
    rep = decay_to_cone_check(sp, GroupPoint(1.0, -2.0), n=1000)
    assert rep.initial_offset > 0
    assert rep.max_residual <= 1e-9
    assert rep.decay_rate == pytest.approx(-5.0, rel=1e-6)
    on_edge = decay_to_cone_check(sp, GroupPoint(1.0, -0.25), n=200)
    assert on_edge.initial_offset == pytest.approx(0.0, abs=1e-15)
    assert on_edge.max_residual <= 1e-9


def test_barrier_inequality_holds():
    res = barrier_check(SystemParams(0, -1, 1, 1), n=2000, seed=1)
    assert res["max_residual"] <= 1e-9
    assert res["upper"] is not None
