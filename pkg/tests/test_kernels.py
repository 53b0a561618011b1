import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import ndtr

from zerochain import kernels
from zerochain.kernels import BOUNDS, KernelId, eval_kernel

finite = st.floats(-6, 6, allow_nan=False)


def test_psi_examples():
    assert eval_kernel(KernelId.PSI, 0, 0.5) == 0.0
    assert eval_kernel(KernelId.PSI, 0, 1.0) == 1.0


def test_phi_at_zero_matches_closed_form():
    assert eval_kernel(KernelId.PHI, 0, 0.0) == pytest.approx(math.sqrt(math.pi * math.e / 2), rel=1e-14)


def test_gamma_examples():
    assert eval_kernel(KernelId.GAMMA, 0, 0.25) == 0.0
    assert eval_kernel(KernelId.GAMMA, 0, 0.5) == 1.0
    assert eval_kernel(KernelId.GAMMA, 0, 0.375) == pytest.approx(0.5, abs=1e-12)


def test_bad_order_and_nonfinite_rejected():
    with pytest.raises(ValueError):
        eval_kernel(KernelId.PSI, 3, 0.0)
    with pytest.raises(ValueError):
        eval_kernel(KernelId.PHI, 0, float("nan"))


@given(finite)
def test_phi_is_scaled_normal_cdf(t):
    ref = math.sqrt(2 * math.pi * math.e) * ndtr(t)
    assert float(kernels.phi(t)) == pytest.approx(ref, rel=1e-13, abs=1e-300)


@given(st.floats(0.51, 5.0))
def test_psi_formula(t):
    assert float(kernels.psi(t)) == pytest.approx(math.exp(1 - 1 / (2 * t - 1) ** 2), rel=1e-13)


@pytest.mark.parametrize("fn", [kernels.psi, kernels.phi, kernels.lam])
@pytest.mark.parametrize("order", [1, 2])
def test_derivatives_match_finite_differences(fn, order):
    t = np.linspace(-2.0, 2.0, 801)
    t = t[np.abs(t - 0.5) > 1e-2]
    h = 1e-6
    fd = (fn(t + h, order - 1) - fn(t - h, order - 1)) / (2 * h)
    assert np.max(np.abs(fd - fn(t, order)) / (1 + np.abs(fn(t, order)))) < 1e-5


def test_gamma_table_matches_direct_quadrature():
    for t in np.linspace(0.26, 0.49, 24):
        assert float(kernels.gamma(t)) == pytest.approx(kernels.gamma_direct(t), abs=1e-11)


def test_lambda_mass_against_scipy():
    ref, _ = integrate.quad(lambda s: float(kernels.lam(s)), 0.25, 0.5, epsabs=1e-14)
    assert kernels.LAMBDA_MASS == pytest.approx(ref, rel=1e-10)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_gamma_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    ga, gb = float(kernels.gamma(lo)), float(kernels.gamma(hi))
    assert 0.0 <= ga <= gb + 1e-15 <= 1.0 + 1e-15


def test_certified_bounds_on_grid():
    t = np.linspace(-5, 5, 200001)
    assert np.max(kernels.psi(t)) <= BOUNDS.psi_max
    assert np.max(kernels.psi(t, 1)) <= BOUNDS.psi_d1_max
    assert np.max(np.abs(kernels.psi(t, 2))) <= BOUNDS.psi_d2_max
    assert np.max(kernels.phi(t)) <= BOUNDS.phi_max
    assert np.max(kernels.phi(t, 1)) <= BOUNDS.phi_d1_max
    assert np.max(np.abs(kernels.phi(t, 2))) <= BOUNDS.phi_d2_max
    assert np.max(kernels.gamma(t, 1)) <= BOUNDS.gamma_d1_max
    assert np.max(np.abs(kernels.gamma(t, 2))) <= BOUNDS.gamma_d2_max


def test_adaptive_simpson_on_polynomial():
    assert kernels.adaptive_simpson(lambda s: s**3, 0.0, 2.0) == pytest.approx(4.0, rel=1e-13)


def test_frozen_values():
    # regression pins; recompute only if a kernel definition changes
    assert float(kernels.psi(0.75)) == pytest.approx(math.exp(-3.0), rel=1e-15)
    assert float(kernels.gamma(0.3)) == pytest.approx(kernels.gamma_direct(0.3), abs=1e-12)
    assert float(kernels.phi(1.0, 1)) == pytest.approx(math.exp(0.0), rel=1e-15)
