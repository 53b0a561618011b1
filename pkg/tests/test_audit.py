import dataclasses
import math

import numpy as np
import pytest

from zerochain import audit, kernels
from zerochain.audit import (
    active_pattern_counts,
    active_walker_sim,
    fd_gradient_check,
    hitting_time_sim,
    lemma_suite,
    mss_witness,
)
from zerochain.chain import CONSTANTS, ChainFunction
from zerochain.oracles import ExplicitPermutation, random_permutation


def test_fd_check_on_quadratic(gen):
    X = gen.standard_normal((100, 4))
    assert fd_gradient_check(lambda Y: 0.5 * np.sum(Y * Y, axis=1), lambda Y: Y, X) <= 1e-10


def test_fd_check_on_chain(gen):
    f = ChainFunction(6)
    X = gen.uniform(-2, 2, (1000, 6))
    assert fd_gradient_check(f.value, f.gradient, X) <= 1e-5


def test_fd_check_detects_negated_gradient(gen):
    f = ChainFunction(4)
    X = gen.uniform(-2, 2, (200, 4))
    err = fd_gradient_check(f.value, lambda Y: -f.gradient(Y), X)
    G = np.abs(f.gradient(X))
    assert err == pytest.approx(np.max(2 * G / (1 + G)), rel=1e-4)
    assert err > 1e-2
    with pytest.raises(ValueError):
        fd_gradient_check(f.value, f.gradient, X, h=0.0)


def test_unknown_suite():
    with pytest.raises(KeyError):
        lemma_suite("LEMMA_99")


@pytest.mark.parametrize("key", ["LEMMA_3", "LEMMA_4", "LEMMA_8", "LEMMA_7", "LEMMA_B1", "LEMMA_A1"])
def test_small_budget_suites_pass(key):
    reports = lemma_suite(key, budget=5000, rng_seed=1)
    assert reports and all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_lemma2_small_budget_has_five_clauses():
    reports = lemma_suite("LEMMA_2", budget=20000, rng_seed=2, T=10)
    assert [r.check for r in reports] == [
        "gap_probe",
        "grad_sup_norm",
        "gradient_lipschitz",
        "zero_chain",
        "large_gradient",
    ]
    assert all(r.passed for r in reports)


def test_reports_reproducible():
    a = lemma_suite("LEMMA_4", budget=2000, rng_seed=9)
    b = lemma_suite("LEMMA_4", budget=2000, rng_seed=9)
    assert [(r.check, r.worst) for r in a] == [(r.check, r.worst) for r in b]


def test_corrupted_variance_constant_is_caught():
    # the largest noisy gradient coordinate reaches about e^1.5 ~ 4.48, so 4 is too small
    bad = dataclasses.replace(CONSTANTS, varsigma=4.0)
    reports = {r.check: r for r in lemma_suite("LEMMA_3", budget=20000, rng_seed=0, constants=bad)}
    assert not reports["variance"].passed
    assert reports["unbiased"].passed


def test_corrupted_lipschitz_constant_is_caught():
    bad = dataclasses.replace(CONSTANTS, lip1=100.0)
    reports = {r.check: r for r in lemma_suite("LEMMA_2", budget=20000, rng_seed=0, T=8, constants=bad)}
    assert not reports["gradient_lipschitz"].passed


def test_hitting_time_deterministic_case():
    r = hitting_time_sim(6, 1.0, 0.1, 100, 0)
    assert r.failure_rate == 0.0
    assert r.mean_hitting_time == 6.0


def test_hitting_time_loose_delta():
    r = hitting_time_sim(10, 0.2, 0.99, 200, 1)
    assert r.failure_rate <= 0.99 + 3 * math.sqrt(0.99 / 200)
    with pytest.raises(ValueError):
        hitting_time_sim(10, 0.2, 0.1, 50, 1)


def test_active_pattern_counts_examples():
    counts = active_pattern_counts(2, 3, random_permutation(8, 3))
    assert sorted(counts.values()) == [1] * 8
    counts = active_pattern_counts(3, 2, ExplicitPermutation.identity(9))
    assert counts == {(1, 1): 1, (1, 0): 2, (0, 1): 2, (0, 0): 4}
    assert audit.active_equivalence(3, 3, seed=4)
    with pytest.raises(ValueError):
        active_pattern_counts(10, 7, None)


def test_active_walker_small():
    res = active_walker_sim(5, 4, 30, 0)
    assert res.rounds > 0
    assert res.rate <= 2 / 5


def test_mss_witness_does_not_vanish():
    p = 0.5
    rows = mss_witness(p)
    floor = (1 - p) * float(kernels.phi(0.25, 1)) ** 2
    d, e, ratio, fl = rows[-1]
    assert d == 1e-6 and fl == pytest.approx(floor)
    assert e >= floor
    assert ratio > 1e6


def test_mss_witness_first_row_closed_form():
    p, d = 0.5, 0.1
    # x is noisy on coordinate 2, y is not: the difference on coordinate 2 is
    # (z/p) dF_2(x) - dF_2(y); coordinate 1 is exact at both points
    f = ChainFunction(3)
    x = np.array([1.0, 0.25 - d, 0.0])
    y = np.array([1.0, 0.25 + d, 0.0])
    gx, gy = f.gradient(x), f.gradient(y)
    expect = (gx[0] - gy[0]) ** 2 + p * (gx[1] / p - gy[1]) ** 2 + (1 - p) * gy[1] ** 2
    expect += p * (gx[2] / p - gy[2]) ** 2 + (1 - p) * gy[2] ** 2
    assert mss_witness(p, deltas=(d,))[0][1] == pytest.approx(expect, rel=1e-12)


def test_mss_witness_smooth_and_deterministic():
    for d, e, ratio, _ in mss_witness(0.5, smooth=True):
        assert ratio <= 328**2 / 0.5
    assert mss_witness(1.0)[-1][1] < 1e-9
