"""Stochastic gradient oracles built on the hard chain.

Estimators (all unbiased for the chain gradient):

* ``g_basic``  -- scales coordinates past ``prog_{1/4}(x)`` by ``z/p``.
* ``g_smooth`` -- the same with the indicator replaced by Theta (mean-squared smooth).
* ``g_stat``   -- exact x-gradient of the sampled objective ``f_stat_value``.
* ``g_coord``  -- one Bernoulli bit per coordinate.
* ``g_active`` -- ``g_coord`` driven by a finite-sum index through a permutation.
* ``quad_pair``-- the Gaussian-shift quadratic used for the sigma^2/eps^2 floor.

The ``*Oracle`` classes bundle an estimator with its seed distribution and the
certificate (Delta, L, L-bar, sigma^2, p, T, d) that the instance claims.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._backend import as_mult, core
from .chain import CONSTANTS, ChainFunction
from .errors import DimensionError, UnsupportedSeed

__all__ = [
    "MAX_ATOMS",
    "EXPLICIT_PERMUTATION_LIMIT",
    "Bernoulli",
    "BitVector",
    "FiniteSum",
    "Gaussian",
    "Certificate",
    "StochasticOracle",
    "BasicOracle",
    "SmoothOracle",
    "StatOracle",
    "CoordOracle",
    "ActiveOracle",
    "QuadOracle",
    "ExplicitPermutation",
    "FeistelPermutation",
    "random_permutation",
    "g_basic",
    "g_smooth",
    "f_stat_value",
    "g_stat",
    "g_coord",
    "zeta",
    "g_active",
    "quad_pair",
    "closed_form_moments",
]

MAX_ATOMS = 2**20
EXPLICIT_PERMUTATION_LIMIT = 10**6

# g_stat constants from the statistical-learning analysis (varsigma <= 1e3)
STAT_VAR_CONST = 1e6
STAT_MSS_CONST = 1e11 + 152.0**2


def _check_p(p):
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p!r}")


def _check_bit(z):
    if z not in (0, 1):
        raise ValueError(f"seed bit must be 0 or 1, got {z!r}")


# ---------------------------------------------------------------------------
# seed distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bernoulli:
    p: float
    variant = "BERNOULLI"

    def __post_init__(self):
        _check_p(self.p)

    def draw(self, rng):
        return int(rng.random() < self.p)

    def atoms(self):
        out = [(1.0 - self.p, 0), (self.p, 1)]
        return [(w, z) for w, z in out if w > 0.0]


@dataclass(frozen=True)
class BitVector:
    p: float
    T: int
    variant = "BIT_VECTOR"

    def __post_init__(self):
        _check_p(self.p)

    def draw(self, rng):
        return (rng.random(self.T) < self.p).astype(np.int8)

    def atoms(self):
        if 2**self.T > MAX_ATOMS:
            raise UnsupportedSeed(f"2^{self.T} bit patterns exceed the {MAX_ATOMS}-atom cutoff")
        out = []
        for bits in itertools.product((0, 1), repeat=self.T):
            ones = sum(bits)
            w = self.p**ones * (1.0 - self.p) ** (self.T - ones)
            if w > 0.0:
                out.append((w, np.array(bits, dtype=np.int8)))
        return out


@dataclass(frozen=True)
class FiniteSum:
    """Uniform index over {1, ..., N^T}, mapped to bits through ``permutation``."""

    N: int
    T: int
    permutation: object = field(compare=False)
    variant = "FINITE_SUM"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"finite-sum seeds need an integer N >= 2, got {self.N!r}")
        if self.permutation.size != self.N**self.T:
            raise ValueError("permutation size must equal N^T")

    @property
    def p(self):
        return 1.0 / self.N

    @property
    def size(self):
        return self.N**self.T

    def draw(self, rng):
        return int(rng.integers(1, self.size + 1))

    def atoms(self):
        if self.size > MAX_ATOMS:
            raise UnsupportedSeed(f"{self.size} finite-sum seeds exceed the {MAX_ATOMS}-atom cutoff")
        w = 1.0 / self.size
        return [(w, k) for k in range(1, self.size + 1)]


@dataclass(frozen=True)
class Gaussian:
    mean: float
    variance: float
    variant = "GAUSSIAN"
    p = 1.0

    def draw(self, rng):
        return float(self.mean + math.sqrt(self.variance) * rng.standard_normal())

    def atoms(self):
        raise UnsupportedSeed("a Gaussian seed has no finite atom list")


# ---------------------------------------------------------------------------
# permutations of {1, ..., size}
# ---------------------------------------------------------------------------


class ExplicitPermutation:
    """Permutation stored as an array; ``perm(k)`` is 1-based."""

    def __init__(self, image):
        image = np.asarray(image, dtype=np.int64)
        if not np.array_equal(np.sort(image), np.arange(1, image.size + 1)):
            raise ValueError("image must be a permutation of 1..n")
        self.image = image
        self.size = int(image.size)

    @classmethod
    def identity(cls, size):
        return cls(np.arange(1, size + 1))

    def __call__(self, k):
        if not 1 <= k <= self.size:
            raise IndexError(f"seed index {k} outside 1..{self.size}")
        return int(self.image[k - 1])


class FeistelPermutation:
    """Keyed pseudorandom bijection of {1, ..., size} without storing it.

    Balanced Feistel network on ``2 * half`` bits with a BLAKE2b round
    function, restricted to the domain by cycle walking.
    """

    ROUNDS = 6

    def __init__(self, size, key):
        if size < 2:
            raise ValueError("permutation needs at least 2 elements")
        self.size = int(size)
        bits = max(2, (self.size - 1).bit_length())
        self.half = (bits + 1) // 2
        self.mask = (1 << self.half) - 1
        self._key = int(key).to_bytes(16, "little", signed=False)
        self._nbytes = (self.half + 7) // 8

    def _round(self, r, v):
        h = hashlib.blake2b(
            r.to_bytes(1, "little") + v.to_bytes(self._nbytes, "little"),
            digest_size=8,
            key=self._key,
        )
        return int.from_bytes(h.digest(), "little") & self.mask

    def _encrypt(self, v):
        left, right = v >> self.half, v & self.mask
        for r in range(self.ROUNDS):
            left, right = right, left ^ self._round(r, right)
        return (left << self.half) | right

    def __call__(self, k):
        if not 1 <= k <= self.size:
            raise IndexError(f"seed index {k} outside 1..{self.size}")
        v = self._encrypt(k - 1)
        while v >= self.size:
            v = self._encrypt(v)
        return v + 1


def random_permutation(size, seed):
    """Uniformly random explicit permutation up to 10^6 elements, keyed Feistel beyond."""
    if size <= EXPLICIT_PERMUTATION_LIMIT:
        rng = np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))
        return ExplicitPermutation(rng.permutation(size) + 1)
    return FeistelPermutation(size, int(seed) & (2**128 - 1))


# ---------------------------------------------------------------------------
# estimator functions
# ---------------------------------------------------------------------------


def _chain_rows(f, x):
    X, single = f.check(x)
    return X, single


def _finish(out, single):
    return out[0] if single else out


def g_basic(f: ChainFunction, p, x, z):
    """[g(x,z)]_i = dF_i(x) * (1 + 1{i > prog_{1/4}(x)} (z/p - 1))."""
    _check_p(p)
    _check_bit(z)
    X, single = _chain_rows(f, x)
    return _finish(core.g_basic(X, as_mult(z / p, X.shape[0])), single)


def g_smooth(f: ChainFunction, p, x, z):
    """[g(x,z)]_i = dF_i(x) * (1 + Theta_i(x) (z/p - 1))."""
    _check_p(p)
    _check_bit(z)
    X, single = _chain_rows(f, x)
    return _finish(core.g_smooth(X, as_mult(z / p, X.shape[0])), single)


def f_stat_value(f: ChainFunction, p, x, z):
    """Sampled objective whose z-average is F_T: sum_i H(x_{i-1}, x_i) nu_i(x, z)."""
    _check_p(p)
    _check_bit(z)
    X, single = _chain_rows(f, x)
    out = core.f_stat(X, as_mult(z / p, X.shape[0]))
    return float(out[0]) if single else out


def g_stat(f: ChainFunction, p, x, z):
    """Analytic x-gradient of ``f_stat_value`` (includes the d Theta terms)."""
    _check_p(p)
    _check_bit(z)
    X, single = _chain_rows(f, x)
    return _finish(core.g_stat(X, as_mult(z / p, X.shape[0])), single)


def g_coord(f: ChainFunction, p, x, zbits):
    _check_p(p)
    X, single = _chain_rows(f, x)
    bits = np.asarray(zbits, dtype=float)
    if bits.shape[-1] != f.T:
        raise DimensionError(f"need {f.T} seed bits, got {bits.shape[-1]}")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("seed bits must be 0 or 1")
    M = np.ascontiguousarray(np.broadcast_to(bits / p, X.shape))
    return _finish(core.g_coord(X, M), single)


def zeta(k, N, T):
    """Bit j is 1 iff digit j of (k - 1) in base N is 0 (least significant first)."""
    if not 1 <= k <= N**T:
        raise IndexError(f"seed index {k} outside 1..{N}^{T}")
    v = k - 1
    bits = np.empty(T, dtype=np.int8)
    for j in range(T):
        v, digit = divmod(v, N)
        bits[j] = digit == 0
    return bits


def g_active(f: ChainFunction, N, pi, x, k):
    return g_coord(f, 1.0 / N, x, zeta(pi(k), N, f.T))


def quad_pair(x, z, s, r, lbar):
    """Value and gradient of (lbar/2)(|x|^2 - 2 z x_1 + r^2)."""
    if r <= 0 or lbar <= 0:
        raise ValueError("r and lbar must be positive")
    x = np.asarray(x, dtype=float)
    value = 0.5 * lbar * (x @ x - 2.0 * z * x[0] + r * r)
    grad = lbar * x.copy()
    grad[0] -= lbar * z
    return float(value), grad


# ---------------------------------------------------------------------------
# oracle objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """Parameters an instance claims to satisfy."""

    delta: float
    L: float
    sigma2: float
    p: float
    T: int
    d: int
    lbar: Optional[float] = None

    def as_dict(self):
        return {k: getattr(self, k) for k in ("delta", "L", "lbar", "sigma2", "p", "T", "d")}


class StochasticOracle:
    """Deterministic objective + seeded gradient estimator + declared certificate.

    Subclasses implement ``value``, ``grad`` and ``estimate``; ``estimate``
    accepts a single point or an ``(n, d)`` batch that shares the seed ``z``.
    """

    kind = "ABSTRACT"
    chain_T: Optional[int] = None
    seeds: object
    certificate: Certificate

    @property
    def dim(self):
        return self.certificate.d

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def estimate(self, x, z):
        raise NotImplementedError

    def respond(self, X, z):
        """Exact values and seeded gradients for a batch sharing one seed."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.atleast_1d(self.value(X)), np.atleast_2d(self.estimate(X, z))

    def to_chain(self, X):
        """Map query points to the coordinates the chain actually sees."""
        return np.asarray(X, dtype=float)


class _ChainOracle(StochasticOracle):
    def __init__(self, T, p):
        _check_p(p)
        self.f = ChainFunction(int(T))
        self.p = float(p)
        self.chain_T = self.f.T
        self.seeds = Bernoulli(self.p)
        self.certificate = self._certificate()

    def _certificate(self):
        raise NotImplementedError

    def value(self, x):
        return self.f.value(x)

    def grad(self, x):
        return self.f.gradient(x)

    def _mult(self, X, z):
        return as_mult(z / self.p, X.shape[0])


class BasicOracle(_ChainOracle):
    kind = "BASIC"

    def _certificate(self):
        c = CONSTANTS
        return Certificate(
            delta=c.delta0 * self.f.T,
            L=c.lip1,
            sigma2=c.varsigma**2 * (1.0 - self.p) / self.p,
            p=self.p,
            T=self.f.T,
            d=self.f.T,
        )

    def estimate(self, x, z):
        X, single = self.f.check(x)
        return _finish(core.g_basic(X, self._mult(X, z)), single)


class SmoothOracle(_ChainOracle):
    kind = "SMOOTH"

    def _certificate(self):
        c = CONSTANTS
        return Certificate(
            delta=c.delta0 * self.f.T,
            L=c.lip1,
            sigma2=c.varsigma**2 * (1.0 - self.p) / self.p,
            p=self.p,
            T=self.f.T,
            d=self.f.T,
            lbar=c.lip1_bar / math.sqrt(self.p),
        )

    def estimate(self, x, z):
        X, single = self.f.check(x)
        return _finish(core.g_smooth(X, self._mult(X, z)), single)


class StatOracle(_ChainOracle):
    """Statistical-learning oracle: the estimate is the gradient of a sampled function."""

    kind = "STAT"

    def _certificate(self):
        c = CONSTANTS
        return Certificate(
            delta=c.delta0 * self.f.T,
            L=c.lip1,
            sigma2=STAT_VAR_CONST * (1.0 - self.p) / self.p,
            p=self.p,
            T=self.f.T,
            d=self.f.T,
            lbar=math.sqrt(STAT_MSS_CONST / self.p),
        )

    def sample_value(self, x, z):
        X, single = self.f.check(x)
        out = core.f_stat(X, self._mult(X, z))
        return float(out[0]) if single else out

    def estimate(self, x, z):
        X, single = self.f.check(x)
        return _finish(core.g_stat(X, self._mult(X, z)), single)


class CoordOracle(_ChainOracle):
    kind = "COORD"

    def __init__(self, T, p):
        super().__init__(T, p)
        self.seeds = BitVector(self.p, self.f.T)

    def _certificate(self):
        return replace(BasicOracle._certificate(self))

    def estimate(self, x, z):
        return g_coord(self.f, self.p, x, z)


class ActiveOracle(_ChainOracle):
    """Finite-sum oracle: the algorithm picks the index ``k`` itself."""

    kind = "ACTIVE"

    def __init__(self, T, N, permutation):
        super().__init__(T, 1.0 / N)
        self.N = int(N)
        self.permutation = permutation
        self.seeds = FiniteSum(self.N, self.f.T, permutation)

    def _certificate(self):
        return BasicOracle._certificate(self)

    def bits(self, k):
        return zeta(self.permutation(k), self.N, self.f.T)

    def estimate(self, x, k):
        return g_coord(self.f, self.p, x, self.bits(k))


class QuadOracle(StochasticOracle):
    """F_s(x) = (lbar/2)|x - theta_s|^2 observed through z ~ N(r s, sigma^2 / lbar^2)."""

    kind = "QUAD"

    def __init__(self, d, r, lbar, sigma2, s=1):
        if s not in (-1, 1):
            raise ValueError("s must be +1 or -1")
        if r <= 0 or lbar <= 0 or sigma2 < 0:
            raise ValueError("need r > 0, lbar > 0, sigma2 >= 0")
        self.r, self.lbar, self.sigma2, self.s = float(r), float(lbar), float(sigma2), s
        self.theta = np.zeros(int(d))
        self.theta[0] = r * s
        self.seeds = Gaussian(r * s, sigma2 / lbar**2)
        self.certificate = Certificate(
            delta=0.5 * lbar * r * r, L=lbar, sigma2=sigma2, p=1.0, T=0, d=int(d), lbar=lbar
        )

    def value(self, x):
        X = np.asarray(x, dtype=float)
        D = X - self.theta
        return 0.5 * self.lbar * np.sum(D * D, axis=-1)

    def grad(self, x):
        return self.lbar * (np.asarray(x, dtype=float) - self.theta)

    def estimate(self, x, z):
        out = self.lbar * np.array(x, dtype=float)
        out[..., 0] -= self.lbar * z
        return out

    def sample_value(self, x, z):
        X = np.asarray(x, dtype=float)
        return 0.5 * self.lbar * (np.sum(X * X, axis=-1) - 2.0 * z * X[..., 0] + self.r**2)

    def moments(self, x):
        """Exact mean and variance; the estimate is affine in the Gaussian seed."""
        return self.grad(x), self.lbar**2 * self.seeds.variance


def closed_form_moments(oracle: StochasticOracle, x):
    """Exact mean and variance of ``oracle.estimate(x, z)`` over an enumerable seed.

    Returns ``(mean, variance)``; for a batch ``x`` of shape ``(n, d)`` the
    results are ``(n, d)`` and ``(n,)``.

    Raises
    ------
    UnsupportedSeed
        If the seed distribution is continuous or has more than 2^20 atoms.
    """
    atoms = oracle.seeds.atoms()
    X = np.asarray(x, dtype=float)
    evals = [(w, oracle.estimate(X, z)) for w, z in atoms]
    mean = sum(w * g for w, g in evals)
    var = sum(w * np.sum((g - mean) ** 2, axis=-1) for w, g in evals)
    return mean, var
