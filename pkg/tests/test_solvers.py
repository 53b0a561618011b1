import numpy as np
import pytest

from zerochain.oracles import QuadOracle
from zerochain.protocol import run, zero_respecting_audit
from zerochain.solvers import SGD, SolverConfig, Spider, default_sgd_step, sgd, spider
from zerochain.transforms import InstanceSpec, build_instance


def zr_bv():
    return build_instance(InstanceSpec("ZR_BV", eps=0.5, delta=18240, L=1, sigma2=52900))


def zr_mss():
    return build_instance(InstanceSpec("ZR_MSS", eps=0.1, delta=100, lbar=10, sigma2=100, K=2))


def quad():
    o = QuadOracle(3, 2.0, 4.0, 0.0, -1)
    o.chain_T = None
    return o


def test_config_validation_and_roundtrip():
    c = SolverConfig("spider", max_rounds=10, eps=0.1, restart_scale=0.5)
    assert SolverConfig.from_dict(c.to_dict("solver."), "solver.") == c
    for bad in (
        dict(name="adam"),
        dict(max_rounds=0),
        dict(step=-1.0),
        dict(eps=0.0),
        dict(epoch=0),
        dict(output="best"),
        dict(step_scale=0.0),
    ):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_default_step():
    cert = zr_bv().certificate
    step = default_sgd_step(cert, 1000)
    assert step == pytest.approx(min(1 / cert.L, np.sqrt(2 * cert.delta / (cert.L * cert.sigma2 * 1000))))


def test_sgd_converges_on_noiseless_quadratic():
    o = quad()
    tr = sgd(SolverConfig("sgd", max_rounds=200, step=1 / o.lbar), o, 0)
    assert np.linalg.norm(o.grad(tr.last_point)) <= 1e-6
    np.testing.assert_allclose(tr.last_point, o.theta, atol=1e-6)


def test_sgd_zero_step_stays_at_origin():
    inst = zr_bv()
    tr = sgd(SolverConfig("sgd", max_rounds=30, step=0.0), inst, 1)
    assert all(not r.points.any() for r in tr.rounds)


def test_sgd_traces_are_zero_respecting():
    inst = zr_bv()
    cfg = SolverConfig("sgd", max_rounds=60, step=1.0)
    for s in range(100):
        assert zero_respecting_audit(sgd(cfg, inst, s)) == []


def test_sgd_uniform_output_reports_chosen_iterate():
    inst = zr_bv()
    tr = sgd(SolverConfig("sgd", max_rounds=20, step=1.0, output="uniform"), inst, 4)
    assert len(tr.rounds) == 21
    assert any(np.array_equal(tr.rounds[-1].points, r.points) for r in tr.rounds[:-1])


def test_sgd_stops_at_stationarity():
    o = quad()
    tr = sgd(SolverConfig("sgd", max_rounds=500, step=0.5 / o.lbar), o, 0, stop_eps=1e-3)
    assert tr.hit_round is not None and tr.hit_round < 500
    assert np.linalg.norm(o.grad(tr.last_point)) <= 1e-3


class RecordingSpider(Spider):
    def observe(self, t, values, grads):
        super().observe(t, values, grads)
        if self.v is not None:
            self.history.append((self.x_prev.copy(), self.v.copy()))

    def start(self, instance, generator):
        super().start(instance, generator)
        self.history = []


def test_spider_tracks_exact_gradient_without_noise():
    o = quad()
    algo = RecordingSpider(SolverConfig("spider", max_rounds=100, eps=1e-3, epoch=7, restart_batch=2))
    run(algo, o, 100, 0)
    assert len(algo.history) > 30
    for x, v in algo.history:
        np.testing.assert_allclose(v, o.grad(x), atol=1e-10)


def test_spider_traces_are_zero_respecting_and_share_seed():
    inst = zr_mss()
    cfg = SolverConfig("spider", max_rounds=40, eps=0.1, epoch=5, restart_batch=2)
    for s in range(100):
        tr = spider(cfg, inst, s)
        assert zero_respecting_audit(tr) == []
    r = tr.rounds[-1]
    np.testing.assert_array_equal(r.grads[1], inst.estimate(r.points[1], r.seed))


def test_spider_epoch_one_restarts_every_round():
    inst = zr_mss()
    cfg = SolverConfig("spider", max_rounds=12, eps=0.1, epoch=1, restart_batch=1)
    tr = spider(cfg, inst, 2)
    for r in tr.rounds:
        np.testing.assert_array_equal(r.points[0], r.points[1])


def test_spider_needs_eps():
    with pytest.raises(ValueError):
        Spider(SolverConfig("spider"))


def test_sgd_with_k_one_only():
    with pytest.raises(ValueError):
        sgd(SolverConfig("sgd", max_rounds=3, step=0.1), zr_mss(), 0)
    assert SGD.K == 1 and Spider.K == 2
