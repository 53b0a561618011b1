"""The compiled core and the numpy fallback must agree to rounding."""
import numpy as np
import pytest

from zerochain import _pycore
from zerochain._backend import COMPILED

pytestmark = pytest.mark.skipif(COMPILED is None, reason="compiled core not built")


@pytest.fixture
def data(gen):
    X = np.ascontiguousarray(gen.uniform(-3, 3, (500, 9)))
    X[::7] *= 0.1
    X[::11, 4:] = 0.0
    m = np.ascontiguousarray(gen.choice([0.0, 5.0], 500))
    return X, m


@pytest.mark.parametrize("name", ["chain_value", "chain_grad", "theta"])
def test_unary_kernels_agree(data, name):
    X, _ = data
    np.testing.assert_allclose(getattr(COMPILED, name)(X), getattr(_pycore, name)(X), rtol=1e-12, atol=1e-12)


def test_hessian_bands_agree(data):
    X, _ = data
    for a, b in zip(COMPILED.chain_hess_bands(X), _pycore.chain_hess_bands(X)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", ["g_basic", "g_smooth", "g_stat", "f_stat"])
def test_estimators_agree(data, name):
    X, m = data
    np.testing.assert_allclose(getattr(COMPILED, name)(X, m), getattr(_pycore, name)(X, m), rtol=1e-12, atol=1e-10)


def test_theta_gradient_agrees(data):
    X, _ = data
    for j in (1, 4, 9):
        np.testing.assert_allclose(COMPILED.theta_grad(X, j), _pycore.theta_grad(X, j), rtol=1e-12, atol=1e-12)


def test_link_terms_agree(gen):
    a, b = gen.uniform(-3, 3, (2, 1000))
    for u, v in zip(COMPILED.link_terms(a, b), _pycore.link_terms(a, b)):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-14)


def test_fallback_selected_by_environment():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import zerochain; print(zerochain.BACKEND)"],
        env={"ZEROCHAIN_BACKEND": "python", "PATH": ""},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"
