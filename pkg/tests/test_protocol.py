import numpy as np
import pytest

from zerochain.oracles import BasicOracle, QuadOracle, closed_form_moments
from zerochain.protocol import (
    Algorithm,
    dumps_trace,
    loads_trace,
    progress_curve,
    run,
    run_active,
    stationarity_time,
    zero_respecting_audit,
)
from zerochain.solvers import greedy_chain_walker
from zerochain.transforms import InstanceSpec, build_instance


class Constant(Algorithm):
    def __init__(self, x, K=1):
        self.x, self.K = np.asarray(x, dtype=float), K

    def propose(self, t):
        return np.stack([self.x] * self.K)


class Script(Algorithm):
    def __init__(self, points):
        self.points = [np.asarray(p, dtype=float) for p in points]

    def propose(self, t):
        return self.points[t - 1] if t <= len(self.points) else None


class PairProbe(Algorithm):
    K = 2

    def start(self, instance, generator):
        self.d = instance.dim

    def propose(self, t):
        return np.stack([np.zeros(self.d), np.zeros(self.d)])


def zr_bv():
    return build_instance(InstanceSpec("ZR_BV", eps=0.5, delta=18240, L=1, sigma2=52900))


def test_constant_zero_algorithm_is_unbiased():
    inst = zr_bv()
    tr = run(Constant(np.zeros(inst.dim)), inst, 50, run_seed=3)
    assert zero_respecting_audit(tr) == []
    mean, _ = closed_form_moments(inst, np.zeros(inst.dim))
    np.testing.assert_allclose(mean, inst.grad(np.zeros(inst.dim)), atol=1e-12)
    seen = {tuple(r.grads[0]) for r in tr.rounds}
    assert seen <= {tuple(inst.estimate(np.zeros(inst.dim), z)) for z in (0, 1)}
    assert progress_curve(tr) == [0] * 50


def test_replay_is_bit_exact():
    inst = zr_bv()
    a = dumps_trace(greedy_chain_walker(inst, 11, max_rounds=500))
    b = dumps_trace(greedy_chain_walker(inst, 11, max_rounds=500))
    assert a == b
    assert a != dumps_trace(greedy_chain_walker(inst, 12, max_rounds=500))


def test_trace_text_roundtrip():
    inst = zr_bv()
    tr = greedy_chain_walker(inst, 5, max_rounds=300)
    tr.manifest = inst.spec.dumps()
    back = loads_trace(dumps_trace(tr))
    assert back.manifest == tr.manifest
    assert dumps_trace(back) == dumps_trace(tr)
    for r, s in zip(tr.rounds, back.rounds):
        assert r.points.tobytes() == s.points.tobytes()
        assert r.grads.tobytes() == s.grads.tobytes()
    with pytest.raises(ValueError):
        loads_trace("garbage\n")


def test_batch_shares_seed():
    inst = build_instance(InstanceSpec("ZR_MSS", eps=0.1, delta=100, lbar=10, sigma2=100, K=2))
    tr = run(PairProbe(), inst, 40, run_seed=1)
    for r in tr.rounds:
        np.testing.assert_array_equal(r.grads[0], r.grads[1])
        np.testing.assert_array_equal(r.grads[0], inst.estimate(r.points[0], r.seed))


def test_batch_size_must_match_instance():
    inst = zr_bv()
    with pytest.raises(ValueError):
        run(PairProbe(), inst, 5, run_seed=1)


def test_audit_flags_premature_probe():
    T = 6
    o = BasicOracle(T, 0.5)
    e = np.zeros(T)
    e[-1] = 1.0
    tr = run(Script([e]), o, 5, run_seed=0)
    assert (1, 1, T) in zero_respecting_audit(tr)


def test_walker_traces_are_zero_respecting_with_unit_steps():
    o = BasicOracle(8, 0.3)
    for s in range(100):
        tr = greedy_chain_walker(o, s)
        assert zero_respecting_audit(tr) == []
        curve = progress_curve(tr)
        assert all(0 <= b - a <= 1 for a, b in zip(curve, curve[1:]))
        assert curve[-1] == 8


def test_walker_with_p_one_hits_in_T_rounds():
    tr = greedy_chain_walker(BasicOracle(9, 1.0), 0)
    assert tr.n_rounds - 1 == 9


def test_stationarity_time_examples():
    q = QuadOracle(2, 1.0, 1.0, 0.0, 1)
    tr = run(Script([q.theta, q.theta]), q, 5, run_seed=0)
    assert stationarity_time(tr, q, 1e-9) == 1
    o = BasicOracle(4, 0.5)
    tr = run(Script([np.zeros(4)] * 3), o, 5, run_seed=0)
    assert stationarity_time(tr, o, np.linalg.norm(o.grad(np.zeros(4)))) == 1
    assert stationarity_time(tr, o, 1e-3) is None
    with pytest.raises(ValueError):
        stationarity_time(tr, o, 0.0)


def test_zero_respecting_runs_are_slow_with_probability_half():
    inst = zr_bv()
    bound = inst.params.rounds
    slow = 0
    for s in range(40):
        tr = greedy_chain_walker(inst, s, max_rounds=int(bound))
        slow += stationarity_time(tr, inst, 0.5) is None
    assert slow / 40 >= 0.5


@pytest.mark.filterwarnings("ignore:.*rotation argument")
def test_progress_curve_rotation_dimension_checked():
    inst = build_instance(InstanceSpec("RAND_BV", eps=0.25, delta=7440, L=1, sigma2=21160, d=64))
    tr = run(Constant(np.zeros(inst.dim)), inst, 3, run_seed=0)
    assert progress_curve(tr, inst.base.rotation) == [0, 0, 0]
    with pytest.raises(ValueError):
        progress_curve(tr, build_instance(InstanceSpec("RAND_BV", eps=0.25, delta=7440, L=1, sigma2=21160, d=32)).base.rotation)


def test_active_protocol_uses_chosen_indices():
    inst = build_instance(InstanceSpec("ACTIVE", eps=0.5, delta=5472, L=1, sigma2=1587, seed=2))
    tr = greedy_chain_walker(inst, 0, active=True, max_rounds=27)
    assert [r.seed for r in tr.rounds] == [(t,) for t in range(1, len(tr.rounds) + 1)]
    assert zero_respecting_audit(tr) == []

    class TwoIndices(Algorithm):
        def propose(self, t):
            return np.zeros(3), [1, 2]

    with pytest.raises(ValueError, match="one index per query"):
        run_active(TwoIndices(), inst, 1, 0)
