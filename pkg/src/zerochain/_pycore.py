"""Pure-numpy implementation of the hot chain kernels.

Row-wise on ``(n, T)`` float64 arrays. ``m`` arguments are per-row seed
multipliers ``z / p``; ``M`` is a per-coordinate ``(n, T)`` multiplier.
The compiled twin in ``_ccore.pyx`` exposes exactly the same functions.
"""
import numpy as np

from .kernels import gamma, phi, psi

NAME = "python"
# below this, the Gamma-norm is treated as exactly zero
NORM_FLOOR = 1e-300


def _prev(X):
    return np.concatenate([np.ones((X.shape[0], 1)), X[:, :-1]], axis=1)


def _H(a, b):
    return psi(-a) * phi(-b) - psi(a) * phi(b)


def _h1(a, b):
    return psi(-a) * phi(-b, 1) + psi(a) * phi(b, 1)


def _h2(a, b):
    return psi(-a, 1) * phi(-b) + psi(a, 1) * phi(b)


def link_terms(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _H(a, b), _h1(a, b), _h2(a, b)


def chain_value(X):
    return _H(_prev(X), X).sum(axis=1)


def chain_grad(X):
    g = -_h1(_prev(X), X)
    g[:, :-1] -= _h2(X[:, :-1], X[:, 1:])
    return g


def chain_hess_bands(X):
    a = _prev(X)
    # d/db h1(a, b) and d/da h2(a, b)
    dh1 = -psi(-a) * phi(-X, 2) + psi(a) * phi(X, 2)
    diag = -dh1
    left, right = X[:, :-1], X[:, 1:]
    dh2 = -psi(-left, 2) * phi(-right) + psi(left, 2) * phi(right)
    diag[:, :-1] -= dh2
    off = psi(-left, 1) * phi(-right, 1) - psi(left, 1) * phi(right, 1)
    return diag, off


def _suffix_norms(G):
    S = np.cumsum((G * G)[:, ::-1], axis=1)[:, ::-1]
    return np.sqrt(S)


def theta(X):
    G = gamma(np.abs(X))
    return gamma(1.0 - _suffix_norms(G))


def _theta_coeff(norms):
    c = np.zeros_like(norms)
    ok = norms >= NORM_FLOOR
    c[ok] = -gamma(1.0 - norms[ok], 1) / norms[ok]
    return c


def _mu(X):
    ax = np.abs(X)
    return gamma(ax) * gamma(ax, 1) * np.sign(X)


def theta_grad(X, j):
    """Gradient of Theta_j (1-based j) for every row."""
    G = gamma(np.abs(X[:, j - 1:]))
    norm = np.sqrt((G * G).sum(axis=1))
    c = _theta_coeff(norm)
    out = np.zeros_like(X)
    out[:, j - 1:] = c[:, None] * _mu(X[:, j - 1:])
    return out


def g_basic(X, m):
    g = chain_grad(X)
    ax = np.abs(X)
    idx = np.arange(1, X.shape[1] + 1)
    above = ax > 0.25
    prog = np.where(above.any(axis=1), X.shape[1] - np.argmax(above[:, ::-1], axis=1), 0)
    noisy = idx[None, :] > prog[:, None]
    return np.where(noisy, g * np.asarray(m)[:, None], g)


def g_coord(X, M):
    g = chain_grad(X)
    ax = np.abs(X)
    idx = np.arange(1, X.shape[1] + 1)
    above = ax > 0.25
    prog = np.where(above.any(axis=1), X.shape[1] - np.argmax(above[:, ::-1], axis=1), 0)
    noisy = idx[None, :] > prog[:, None]
    return np.where(noisy, g * M, g)


def g_smooth(X, m):
    nu = 1.0 + theta(X) * (np.asarray(m)[:, None] - 1.0)
    return chain_grad(X) * nu


def f_stat(X, m):
    nu = 1.0 + theta(X) * (np.asarray(m)[:, None] - 1.0)
    return (_H(_prev(X), X) * nu).sum(axis=1)


def g_stat(X, m):
    m = np.asarray(m, dtype=float)[:, None]
    a = _prev(X)
    H = _H(a, X)
    G = gamma(np.abs(X))
    norms = _suffix_norms(G)
    nu = 1.0 + gamma(1.0 - norms) * (m - 1.0)
    out = -_h1(a, X) * nu
    out[:, :-1] -= _h2(X[:, :-1], X[:, 1:]) * nu[:, 1:]
    acc = np.cumsum(H * _theta_coeff(norms), axis=1)
    out += (m - 1.0) * acc * _mu(X)
    return out
