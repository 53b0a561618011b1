"""Scalar building blocks of the hard chain: Psi, Phi, Lambda and Gamma.

Every function here is vectorized over ``t`` and returns exact zeros on the
flat pieces (no ``0 * inf`` artefacts near the essential singularities).

Gamma has no closed form. It is tabulated once at import on a uniform grid
over [1/4, 1/2] and evaluated by cubic Hermite interpolation, using the exact
node slopes Lambda / mass.  ``gamma_direct`` recomputes it by quadrature and
is kept for cross-checks.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

__all__ = [
    "KernelId",
    "KernelBounds",
    "BOUNDS",
    "LAMBDA_MASS",
    "GAMMA_TABLE",
    "eval_kernel",
    "psi",
    "phi",
    "lam",
    "gamma",
    "gamma_direct",
    "adaptive_simpson",
]

SQRT_E = math.sqrt(math.e)
PHI_SCALE = math.sqrt(2.0 * math.pi * math.e)
# exp() of anything below this is 0.0 in double precision
EXP_UNDERFLOW = -745.0
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

GAMMA_LO = 0.25
GAMMA_HI = 0.5
GAMMA_GRID_SIZE = 4096


class KernelId(enum.Enum):
    PSI = "psi"
    PHI = "phi"
    LAMBDA = "lambda"
    GAMMA = "gamma"


@dataclass(frozen=True)
class KernelBounds:
    """Certified sup-bounds on the kernels and their derivatives."""

    psi_max: float = math.e
    psi_d1_max: float = math.sqrt(54.0 / math.e)
    psi_d2_max: float = 32.5
    phi_max: float = PHI_SCALE
    phi_d1_max: float = SQRT_E
    phi_d2_max: float = 1.0
    gamma_d1_max: float = 6.0
    gamma_d2_max: float = 128.0


BOUNDS = KernelBounds()


def _safe_exp(expo):
    out = np.zeros_like(expo)
    ok = expo >= EXP_UNDERFLOW
    out[ok] = np.exp(expo[ok])
    return out


def psi(t, order=0):
    """Psi(t) = exp(1 - 1/(2t-1)^2) for t > 1/2, zero otherwise."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0.5
    if not np.any(m):
        return out
    u = 2.0 * t[m] - 1.0
    with np.errstate(over="ignore", divide="ignore"):
        inv2 = 1.0 / (u * u)
        val = _safe_exp(1.0 - inv2)
        live = val > 0.0
        if order == 0:
            res = val
        elif order == 1:
            res = np.where(live, val * 4.0 * inv2 / np.where(live, u, 1.0), 0.0)
        else:
            res = np.where(live, val * (16.0 * inv2**3 - 24.0 * inv2 * inv2), 0.0)
    out[m] = res
    return out


def _normal_cdf(t):
    # same erfc route as the compiled core, so both backends agree to the ulp
    return 0.5 * erfc(-t * _INV_SQRT2)


def phi(t, order=0):
    """Phi(t) = sqrt(e) * integral_{-inf}^t exp(-s^2/2) ds."""
    t = np.asarray(t, dtype=float)
    if order == 0:
        return PHI_SCALE * _normal_cdf(t)
    d1 = SQRT_E * np.exp(-0.5 * t * t)
    if order == 1:
        return d1
    return -t * d1


def lam(t, order=0):
    """The bump exp(-1/(100 (t-1/4)(1/2-t))) supported on (1/4, 1/2)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > GAMMA_LO) & (t < GAMMA_HI)
    if not np.any(m):
        return out
    tm = t[m]
    q = (tm - GAMMA_LO) * (GAMMA_HI - tm)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        val = _safe_exp(-1.0 / (100.0 * q))
        if order == 0:
            res = val
        elif order == 1:
            live = val > 0.0
            qs = np.where(live, q, 1.0)
            res = np.where(live, val * (0.75 - 2.0 * tm) / (100.0 * qs * qs), 0.0)
        else:
            live = val > 0.0
            qs = np.where(live, q, 1.0)
            dq = 0.75 - 2.0 * tm
            # d/dt [dq / (100 q^2)] = (-2 q - 2 dq^2) / (100 q^3)
            a = dq / (100.0 * qs * qs)
            da = (-2.0 * qs - 2.0 * dq * dq) / (100.0 * qs**3)
            res = np.where(live, val * (a * a + da), 0.0)
    out[m] = res
    return out


def adaptive_simpson(f, a, b, tol=1e-12, max_depth=60):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""
    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    c = 0.5 * (a + b)
    fc = f(c)
    whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb)
    total = 0.0
    stack = [(a, b, fa, fb, fc, whole, tol, 0)]
    while stack:
        a0, b0, fa0, fb0, fc0, s0, eps, depth = stack.pop()
        c0 = 0.5 * (a0 + b0)
        d = 0.5 * (a0 + c0)
        e = 0.5 * (c0 + b0)
        fd, fe = f(d), f(e)
        left = (c0 - a0) / 6.0 * (fa0 + 4.0 * fd + fc0)
        right = (b0 - c0) / 6.0 * (fc0 + 4.0 * fe + fb0)
        delta = left + right - s0
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((a0, c0, fa0, fc0, fd, left, 0.5 * eps, depth + 1))
            stack.append((c0, b0, fc0, fb0, fe, right, 0.5 * eps, depth + 1))
    return total


def _lam_scalar(t):
    if t <= GAMMA_LO or t >= GAMMA_HI:
        return 0.0
    expo = -1.0 / (100.0 * (t - GAMMA_LO) * (GAMMA_HI - t))
    return math.exp(expo) if expo >= EXP_UNDERFLOW else 0.0


LAMBDA_MASS = adaptive_simpson(_lam_scalar, GAMMA_LO, GAMMA_HI, tol=1e-12)


@dataclass(frozen=True)
class GammaTable:
    """Node values and slopes of Gamma on a uniform grid over [1/4, 1/2]."""

    lo: float
    step: float
    values: np.ndarray
    slopes: np.ndarray


def _build_gamma_table(n=GAMMA_GRID_SIZE):
    nodes = np.linspace(GAMMA_LO, GAMMA_HI, n)
    step = (GAMMA_HI - GAMMA_LO) / (n - 1)
    gx, gw = np.polynomial.legendre.leggauss(16)
    left = nodes[:-1]
    pts = left[:, None] + 0.5 * step * (gx[None, :] + 1.0)
    cell = 0.5 * step * (lam(pts) @ gw)
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    values = cum / cum[-1]
    values[-1] = 1.0
    slopes = lam(nodes) / LAMBDA_MASS
    values.setflags(write=False)
    slopes.setflags(write=False)
    return GammaTable(GAMMA_LO, step, values, slopes)


GAMMA_TABLE = _build_gamma_table()


def _gamma_interp(t):
    tab = GAMMA_TABLE
    n = tab.values.size
    s = (t - tab.lo) / tab.step
    k = np.clip(np.floor(s).astype(np.int64), 0, n - 2)
    u = s - k
    u2 = u * u
    u3 = u2 * u
    h = tab.step
    v = (
        (2 * u3 - 3 * u2 + 1) * tab.values[k]
        + (u3 - 2 * u2 + u) * h * tab.slopes[k]
        + (-2 * u3 + 3 * u2) * tab.values[k + 1]
        + (u3 - u2) * h * tab.slopes[k + 1]
    )
    # Gamma is monotone: keep the cubic between its node values
    return np.clip(v, tab.values[k], tab.values[k + 1])


def gamma(t, order=0):
    """Smooth step: 0 for t <= 1/4, 1 for t >= 1/2, integrated bump between."""
    t = np.asarray(t, dtype=float)
    if order == 1:
        return lam(t) / LAMBDA_MASS
    if order == 2:
        return lam(t, 1) / LAMBDA_MASS
    out = np.where(t >= GAMMA_HI, 1.0, 0.0)
    m = (t > GAMMA_LO) & (t < GAMMA_HI)
    if np.any(m):
        out[m] = _gamma_interp(t[m])
    return out


def gamma_direct(t, tol=1e-13):
    """Gamma(t) by direct adaptive quadrature (slow; for cross-checks)."""
    t = float(t)
    if t <= GAMMA_LO:
        return 0.0
    if t >= GAMMA_HI:
        return 1.0
    return adaptive_simpson(_lam_scalar, GAMMA_LO, t, tol=tol) / LAMBDA_MASS


_DISPATCH = {
    KernelId.PSI: psi,
    KernelId.PHI: phi,
    KernelId.LAMBDA: lam,
    KernelId.GAMMA: gamma,
}


def eval_kernel(kernel, order, t):
    """Evaluate ``kernel`` (or its first/second derivative) at ``t``.

    Scalars in, scalar out; arrays are accepted and evaluated elementwise.

    Raises
    ------
    ValueError
        If ``order`` is not 0, 1 or 2, or ``t`` contains a non-finite value.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"kernel derivative order must be 0, 1 or 2, got {order!r}")
    kernel = KernelId(kernel)
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("kernel argument must be finite")
    out = _DISPATCH[kernel](np.atleast_1d(arr), order)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)
