"""The deterministic hard chain F_T and the smoothed progress indicator Theta.

    F_T(x) = sum_{i=1}^T H(x_{i-1}, x_i),   x_0 = 1,
    H(a, b) = Psi(-a) Phi(-b) - Psi(a) Phi(b).

With x_0 = 1 the first link reduces to -Psi(1) Phi(x_1), so no special case is
needed.  All numerics go through the backend core (compiled when available).
Functions accept a single point of shape ``(T,)`` or a batch ``(n, T)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._backend import as_rows, core
from .errors import DimensionError

__all__ = [
    "ZERO_TOL",
    "ChainConstants",
    "CONSTANTS",
    "ChainFunction",
    "LinkTerms",
    "progress",
    "support",
    "chain_value",
    "chain_gradient",
    "chain_hessian_bands",
    "theta",
    "theta_all",
    "theta_gradient",
    "link_terms",
]

# entries of computed gradients at or below this are treated as exact zeros
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class ChainConstants:
    delta0: float = 12.0
    lip1: float = 152.0
    grad_inf: float = 23.0
    varsigma: float = 23.0
    lip1_bar: float = 328.0
    lip1_rot: float = 155.0
    lip1_bar_rot: float = 336.0
    large_grad: float = 1.0


CONSTANTS = ChainConstants()


class LinkTerms(NamedTuple):
    H: float
    h1: float
    h2: float


@dataclass(frozen=True)
class ChainFunction:
    """F_T for a fixed chain length ``T``."""

    T: int

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"chain length must be a positive integer, got {self.T!r}")

    def check(self, x):
        X, single = as_rows(x)
        if X.shape[1] != self.T:
            raise DimensionError(f"point has dimension {X.shape[1]}, chain has T={self.T}")
        return X, single

    def value(self, x):
        return chain_value(self, x)

    def gradient(self, x):
        return chain_gradient(self, x)

    def hessian_bands(self, x):
        return chain_hessian_bands(self, x)


def progress(x, alpha=0.0):
    """Largest 1-based index with ``|x_i| > alpha``; 0 if there is none.

    The virtual coordinate x_0 = 1 always qualifies, which is where the 0
    comes from.  For a 2-D input the progress of every row is returned.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha!r}")
    ax = np.abs(np.asarray(x, dtype=float))
    above = ax > alpha
    if ax.ndim == 1:
        hits = np.flatnonzero(above)
        return int(hits[-1] + 1) if hits.size else 0
    T = ax.shape[-1]
    last = T - np.argmax(above[..., ::-1], axis=-1)
    return np.where(above.any(axis=-1), last, 0)


def support(x, tol=0.0):
    """1-based indices of entries with magnitude above ``tol`` (exact nonzeros by default)."""
    return {int(i) + 1 for i in np.flatnonzero(np.abs(np.asarray(x, dtype=float)) > tol)}


def _unwrap(out, single):
    return out[0] if single else out


def chain_value(f: ChainFunction, x):
    X, single = f.check(x)
    out = core.chain_value(X)
    return float(out[0]) if single else out


def chain_gradient(f: ChainFunction, x):
    X, single = f.check(x)
    return _unwrap(core.chain_grad(X), single)


def chain_hessian_bands(f: ChainFunction, x):
    """Diagonal (length T) and first off-diagonal (length T-1) of the Hessian."""
    X, single = f.check(x)
    diag, off = core.chain_hess_bands(X)
    return _unwrap(diag, single), _unwrap(off, single)


def _check_index(j, T):
    if not 1 <= j <= T:
        raise IndexError(f"Theta index {j} outside 1..{T}")


def theta_all(x):
    """Theta_j(x) for every j = 1..T, via one backward pass of suffix sums."""
    X, single = as_rows(x)
    return _unwrap(core.theta(X), single)


def theta(j, x):
    """Smoothed indicator of ``j > prog(x)``: Gamma(1 - ||Gamma(|x_{>=j}|)||)."""
    X, single = as_rows(x)
    _check_index(j, X.shape[1])
    out = core.theta(X)[:, j - 1]
    return float(out[0]) if single else out


def theta_gradient(j, x):
    X, single = as_rows(x)
    _check_index(j, X.shape[1])
    return _unwrap(core.theta_grad(X, int(j)), single)


def link_terms(a, b):
    """The (H, h1, h2) triple for one pair of neighbouring coordinates."""
    H, h1, h2 = core.link_terms(a, b)
    if np.ndim(H) == 0:
        return LinkTerms(float(H), float(h1), float(h2))
    return LinkTerms(H, h1, h2)
