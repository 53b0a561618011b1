"""Instance builders: scaling recipes, random rotations and soft projection.

A built instance is a :class:`~zerochain.oracles.StochasticOracle` whose
certificate holds the bounds the construction guarantees after scaling.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import kvtext, rng
from .chain import CONSTANTS
from .errors import DimensionError, InfeasibleInstance
from .oracles import (
    STAT_MSS_CONST,
    STAT_VAR_CONST,
    ActiveOracle,
    BasicOracle,
    Certificate,
    SmoothOracle,
    StatOracle,
    StochasticOracle,
    QuadOracle,
    random_permutation,
)

__all__ = [
    "KINDS",
    "ScaleParams",
    "RotationMatrix",
    "CompressedInstance",
    "ScaledOracle",
    "InstanceSpec",
    "scale_params_bounded_variance",
    "scale_params_mss",
    "scale_params_randomized",
    "scale_params_randomized_mss",
    "sample_rotation",
    "soft_project",
    "compressed_eval",
    "build_instance",
    "required_dimension",
]

KINDS = ("ZR_BV", "ZR_MSS", "RAND_BV", "RAND_MSS", "STAT", "ACTIVE", "QUAD")

COMPRESSION_RADIUS = 230.0
COMPRESSION_ETA = 0.2
# guards floor() against LΔ/(...) landing a hair below an integer
_FLOOR_SLACK = 1e-12


@dataclass(frozen=True)
class ScaleParams:
    """Output of a scaling recipe.

    ``grad_scale`` is L lambda / l1, the factor multiplying unscaled gradients;
    ``rounds`` is the round count below which no zero-respecting method is
    likely to be eps-stationary.
    """

    lam: float
    T: int
    p: float
    L: float
    ell1: float
    rounds: float
    L_effective: Optional[float] = None

    @property
    def grad_scale(self):
        return self.L * self.lam / self.ell1

    @property
    def value_scale(self):
        return self.grad_scale * self.lam


def _positive(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{k} must be positive and finite, got {v!r}")


def _floor(x):
    return int(math.floor(x * (1.0 + _FLOOR_SLACK)))


def _max_eps(T_of_eps, T_min, eps):
    """Largest eps with T_of_eps(eps) >= T_min (bisection in log scale; T_of_eps decreases)."""
    lo, hi = math.log(eps) - 60.0, math.log(eps)
    if T_of_eps(math.exp(lo)) < T_min:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if T_of_eps(math.exp(mid)) >= T_min:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def _recipe(eps, delta, L_of_eps, p_of_eps, ell1, factor, T_min, offset):
    def T_raw(e):
        return L_of_eps(e) * delta / (CONSTANTS.delta0 * ell1 * (factor * e) ** 2)

    T = _floor(T_raw(eps))
    if T < T_min:
        best = _max_eps(T_raw, T_min, eps)
        raise InfeasibleInstance(
            f"eps={eps} gives T={T} < {T_min}; largest feasible eps is {best:.6g}", max_eps=best
        )
    L = L_of_eps(eps)
    p = p_of_eps(eps)
    return ScaleParams(
        lam=ell1 / L * factor * eps,
        T=T,
        p=p,
        L=L,
        ell1=ell1,
        rounds=(T - offset) / (2.0 * p),
    )


def _p(var_const, eps, sigma2):
    return min((var_const * eps) ** 2 / sigma2, 1.0)


def scale_params_bounded_variance(eps, delta, L, sigma2):
    """Zero-respecting bounded-variance recipe: lambda = 2 l1 eps / L, T >= 3."""
    _positive(eps=eps, delta=delta, L=L, sigma2=sigma2)
    c = CONSTANTS
    return _recipe(
        eps, delta, lambda e: L, lambda e: _p(2 * c.varsigma, e, sigma2), c.lip1, 2.0, 3, 1
    )


def _mss(eps, delta, lbar, sigma2, var_const, ell1, ell1_bar, factor, offset):
    def p_of(e):
        return _p(var_const, e, sigma2)

    def L_of(e):
        return ell1 / ell1_bar * lbar * math.sqrt(p_of(e))

    out = _recipe(eps, delta, L_of, p_of, ell1, factor, 1, offset)
    return ScaleParams(**{**asdict(out), "L_effective": out.L})


def scale_params_mss(eps, delta, lbar, sigma2):
    """Mean-squared-smooth recipe: the bounded-variance one run at L = (l1/l1bar) lbar sqrt(p)."""
    _positive(eps=eps, delta=delta, lbar=lbar, sigma2=sigma2)
    c = CONSTANTS
    return _mss(eps, delta, lbar, sigma2, 2 * c.varsigma, c.lip1, c.lip1_bar, 2.0, 1)


def scale_params_randomized(eps, delta, L, sigma2):
    """Rotated-instance recipe: lambda = 4 l1 eps / L with l1 = 155, T >= 4."""
    _positive(eps=eps, delta=delta, L=L, sigma2=sigma2)
    c = CONSTANTS
    return _recipe(
        eps, delta, lambda e: L, lambda e: _p(4 * c.varsigma, e, sigma2), c.lip1_rot, 4.0, 4, 2
    )


def scale_params_randomized_mss(eps, delta, lbar, sigma2):
    _positive(eps=eps, delta=delta, lbar=lbar, sigma2=sigma2)
    c = CONSTANTS
    return _mss(eps, delta, lbar, sigma2, 4 * c.varsigma, c.lip1_rot, c.lip1_bar_rot, 4.0, 2)


def scale_params_stat(eps, delta, lbar, sigma2):
    """MSS recipe with the statistical-learning constants (varsigma 1e3, l1bar^2 = 1e11 + 152^2)."""
    _positive(eps=eps, delta=delta, lbar=lbar, sigma2=sigma2)
    c = CONSTANTS
    return _mss(
        eps, delta, lbar, sigma2, 2 * math.sqrt(STAT_VAR_CONST), c.lip1, math.sqrt(STAT_MSS_CONST), 2.0, 1
    )


# ---------------------------------------------------------------------------
# rotation and soft projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotationMatrix:
    columns: np.ndarray

    @property
    def d(self):
        return self.columns.shape[0]

    @property
    def T(self):
        return self.columns.shape[1]


def sample_rotation(d, T, rng_seed):
    """Haar-distributed d x T matrix with orthonormal columns.

    QR of a Gaussian matrix, with column signs fixed so that R has a positive
    diagonal (without the fix the draw is not exactly Haar).
    """
    if T < 1 or d < T:
        raise DimensionError(f"need d >= T >= 1, got d={d}, T={T}")
    G = rng.stream(rng_seed, rng.INSTANCE).standard_normal((d, T))
    Q, R = np.linalg.qr(G)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    Q.setflags(write=False)
    return RotationMatrix(Q)


def soft_project(x, R):
    """Return ``(rho(x), apply_J)`` with rho(x) = x / sqrt(1 + |x|^2 / R^2).

    ``apply_J(v)`` computes J(x) v = (v - rho (rho . v) / R^2) / sqrt(1 + |x|^2/R^2)
    in O(d); J is symmetric so the same map applies J^T.  Batches ``(n, d)``
    with matching ``v`` are handled row-wise.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    x = np.asarray(x, dtype=float)
    s = 1.0 / np.sqrt(1.0 + np.sum(x * x, axis=-1, keepdims=True) / (R * R))
    rho = s * x

    def apply_J(v):
        v = np.asarray(v, dtype=float)
        return s * (v - rho * np.sum(rho * v, axis=-1, keepdims=True) / (R * R))

    return rho, apply_J


class CompressedInstance(StochasticOracle):
    """F(x) = F_T(U^T rho(x)) + (eta/2)|x|^2 with estimator J(x)^T U gbar(U^T rho(x), z) + eta x."""

    kind = "COMPRESSED"

    def __init__(self, base: SmoothOracle, rotation: RotationMatrix, R=None, eta=COMPRESSION_ETA):
        if rotation.T != base.f.T:
            raise DimensionError("rotation width must equal the chain length")
        self.base = base
        self.rotation = rotation
        self.R = COMPRESSION_RADIUS * math.sqrt(base.f.T) if R is None else float(R)
        self.eta = float(eta)
        self.chain_T = base.f.T
        self.seeds = base.seeds
        c = CONSTANTS
        self.certificate = Certificate(
            delta=c.delta0 * base.f.T,
            L=c.lip1_rot,
            sigma2=c.varsigma**2 * (1.0 - base.p) / base.p,
            p=base.p,
            T=base.f.T,
            d=rotation.d,
            lbar=c.lip1_bar_rot / math.sqrt(base.p),
        )

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.rotation.d or x.ndim > 2:
            raise DimensionError(f"point has dimension {x.shape[-1]}, instance has d={self.rotation.d}")
        return x

    def to_chain(self, x):
        rho, _ = soft_project(self._check(x), self.R)
        return rho @ self.rotation.columns

    def value(self, x):
        x = self._check(x)
        return self.base.value(self.to_chain(x)) + 0.5 * self.eta * np.sum(x * x, axis=-1)

    def _lift(self, x, chain_grad):
        rho, apply_J = soft_project(x, self.R)
        return apply_J(chain_grad @ self.rotation.columns.T) + self.eta * x

    def grad(self, x):
        x = self._check(x)
        return self._lift(x, self.base.grad(self.to_chain(x)))

    def estimate(self, x, z):
        x = self._check(x)
        return self._lift(x, self.base.estimate(self.to_chain(x), z))


def compressed_eval(ci: CompressedInstance, x, z):
    """``(value, gradient estimate)`` of the compressed instance at ``x``."""
    return ci.value(x), ci.estimate(x, z)


class ScaledOracle(StochasticOracle):
    """x -> (L lambda^2 / l1) F(x / lambda), gradients scaled by L lambda / l1."""

    def __init__(self, base: StochasticOracle, params: ScaleParams, lbar=None):
        self.base = base
        self.params = params
        self.kind = base.kind
        self.chain_T = base.chain_T
        self.seeds = base.seeds
        self.lam = params.lam
        self.gs = params.grad_scale
        self.vs = params.value_scale
        bc = base.certificate
        self.certificate = Certificate(
            delta=self.vs * bc.delta,
            L=self.gs / self.lam * bc.L,
            sigma2=self.gs**2 * bc.sigma2,
            p=bc.p,
            T=bc.T,
            d=bc.d,
            lbar=None if bc.lbar is None else self.gs / self.lam * bc.lbar,
        )

    def value(self, x):
        return self.vs * self.base.value(np.asarray(x, dtype=float) / self.lam)

    def grad(self, x):
        return self.gs * self.base.grad(np.asarray(x, dtype=float) / self.lam)

    def estimate(self, x, z):
        return self.gs * self.base.estimate(np.asarray(x, dtype=float) / self.lam, z)

    def to_chain(self, x):
        return self.base.to_chain(np.asarray(x, dtype=float) / self.lam)


# ---------------------------------------------------------------------------
# specs and builders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    """Everything needed to rebuild an instance bit-exactly.

    ``L`` is used by the bounded-variance kinds (ZR_BV, RAND_BV, ACTIVE),
    ``lbar`` by the mean-squared-smooth ones (ZR_MSS, RAND_MSS, STAT, QUAD).
    ``d = 0`` picks the default dimension.  ``r`` and ``s`` only apply to QUAD.
    """

    kind: str
    eps: float = 0.0
    delta: float = 0.0
    L: Optional[float] = None
    lbar: Optional[float] = None
    sigma2: float = 0.0
    K: int = 1
    d: int = 0
    seed: int = 0
    r: Optional[float] = None
    s: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instance kind {self.kind!r}; expected one of {KINDS}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        rng.check_seed(self.seed)
        # canonical scalar types, so equal specs serialize identically
        for k in ("eps", "delta", "L", "lbar", "sigma2", "r"):
            v = getattr(self, k)
            if v is not None:
                object.__setattr__(self, k, float(v))
        for k in ("K", "d", "seed", "s"):
            v = getattr(self, k)
            if v is not None:
                object.__setattr__(self, k, int(v))

    def to_dict(self, prefix=""):
        return {prefix + k: v for k, v in asdict(self).items() if v is not None}

    def dumps(self):
        return kvtext.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d, prefix=""):
        names = {f.name for f in fields(cls)}
        kw = {k[len(prefix):]: v for k, v in d.items() if k.startswith(prefix) and k[len(prefix):] in names}
        return cls(**kw)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(kvtext.loads(text))


def _need(spec, *names):
    for n in names:
        v = getattr(spec, n)
        if v is None or not v > 0:
            raise ValueError(f"{spec.kind} needs a positive {n}")


def _default_dim(spec, T):
    return spec.d if spec.d else 4 * T


def _warn_dim(spec, d, T, p):
    need = required_dimension(spec.K, T, p, 0.5)
    if d < need:
        warnings.warn(
            f"{spec.kind}: d={d} is far below the {need} needed for the rotation argument; "
            "mechanics and certificates are still exact",
            stacklevel=3,
        )


def build_instance(spec: InstanceSpec, rng_seed=None) -> StochasticOracle:
    """Build the oracle described by ``spec``.

    ``rng_seed`` overrides ``spec.seed`` (it drives rotations, permutations and
    the sign of the QUAD instance).
    """
    seed = spec.seed if rng_seed is None else rng.check_seed(rng_seed)
    kind = spec.kind
    if kind == "QUAD":
        _need(spec, "lbar", "r")
        s = spec.s
        if s is None:
            s = 1 if rng.stream(seed, rng.INSTANCE).random() < 0.5 else -1
        return QuadOracle(spec.d or 1, spec.r, spec.lbar, spec.sigma2, s)
    if kind in ("ZR_BV", "RAND_BV", "ACTIVE"):
        _need(spec, "eps", "delta", "L", "sigma2")
    else:
        _need(spec, "eps", "delta", "lbar", "sigma2")

    if kind == "ZR_BV":
        sp = scale_params_bounded_variance(spec.eps, spec.delta, spec.L, spec.sigma2)
        base = BasicOracle(sp.T, sp.p)
    elif kind == "ZR_MSS":
        sp = scale_params_mss(spec.eps, spec.delta, spec.lbar, spec.sigma2)
        base = SmoothOracle(sp.T, sp.p)
    elif kind == "STAT":
        sp = scale_params_stat(spec.eps, spec.delta, spec.lbar, spec.sigma2)
        base = StatOracle(sp.T, sp.p)
    elif kind == "ACTIVE":
        sp0 = scale_params_bounded_variance(spec.eps, spec.delta, spec.L, spec.sigma2)
        N = int(math.floor(spec.sigma2 / (2 * CONSTANTS.varsigma * spec.eps) ** 2))
        if N < 2:
            raise InfeasibleInstance(
                "ACTIVE needs sigma2 >= 2 (46 eps)^2 so that N >= 2",
                max_eps=math.sqrt(spec.sigma2 / 2.0) / (2 * CONSTANTS.varsigma),
            )
        sp = ScaleParams(**{**asdict(sp0), "p": 1.0 / N, "rounds": (sp0.T - 1) * N / 2.0})
        base = ActiveOracle(sp.T, N, random_permutation(N**sp.T, seed))
    else:
        recipe = scale_params_randomized if kind == "RAND_BV" else scale_params_randomized_mss
        sp = recipe(spec.eps, spec.delta, spec.L if kind == "RAND_BV" else spec.lbar, spec.sigma2)
        d = _default_dim(spec, sp.T)
        _warn_dim(spec, d, sp.T, sp.p)
        base = CompressedInstance(SmoothOracle(sp.T, sp.p), sample_rotation(d, sp.T, seed))
    out = ScaledOracle(base, sp)
    out.spec = spec
    return out


def required_dimension(K, T, p, delta, R=None):
    """Dimension at which the rotation argument applies.

    With ``R=None`` the compressed form ceil(18 * 230^2 K T^2 / p * ln(2 K T^2 / (p delta)));
    otherwise the generic ceil(18 R^2 K T / p * ln(2 K T^2 / (p delta))).
    """
    _positive(K=K, T=T, p=p)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    log_term = math.log(2.0 * K * T * T / (p * delta))
    if R is None:
        return math.ceil(18.0 * COMPRESSION_RADIUS**2 * K * T * T / p * log_term)
    return math.ceil(18.0 * R * R * K * T / p * log_term)
