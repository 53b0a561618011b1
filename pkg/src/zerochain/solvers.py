"""Baseline algorithms driven through the query protocol.

All three start from the origin and only ever move along combinations of
gradients they have received, so they are zero-respecting on every instance.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .chain import ZERO_TOL, support
from .protocol import Algorithm, run, run_active

__all__ = [
    "SolverConfig",
    "SGD",
    "Spider",
    "GreedyWalker",
    "sgd",
    "spider",
    "greedy_chain_walker",
    "default_sgd_step",
]

SOLVERS = ("sgd", "spider", "walker")


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.  ``None`` fields fall back to the documented defaults.

    step           fixed step size (SGD) or step cap (SPIDER)
    eps            target accuracy; SPIDER's defaults are derived from it
    epoch          SPIDER epoch length q
    restart_batch  fresh seeds averaged at each SPIDER restart
    restart_scale  multiplies the default restart batch ceil(sigma^2 / eps^2)
    step_scale     multiplies SPIDER's normalized step (tuning knob, default 1)
    output         'last' or 'uniform' (SGD output-point rule)
    max_rounds     round budget
    """

    name: str = "sgd"
    max_rounds: int = 1000
    step: Optional[float] = None
    eps: Optional[float] = None
    epoch: Optional[int] = None
    restart_batch: Optional[int] = None
    restart_scale: float = 1.0
    step_scale: float = 1.0
    output: str = "last"

    def __post_init__(self):
        if self.name not in SOLVERS:
            raise ValueError(f"unknown solver {self.name!r}; expected one of {SOLVERS}")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise ValueError("max_rounds must be a positive integer")
        if self.step is not None and self.step < 0:
            raise ValueError("step size must be nonnegative")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        for k in ("epoch", "restart_batch"):
            v = getattr(self, k)
            if v is not None and (int(v) != v or v < 1):
                raise ValueError(f"{k} must be a positive integer")
        if not (self.restart_scale > 0 and self.step_scale > 0):
            raise ValueError("restart_scale and step_scale must be positive")
        if self.output not in ("last", "uniform"):
            raise ValueError("output must be 'last' or 'uniform'")
        if self.step is not None:
            object.__setattr__(self, "step", float(self.step))
        if self.eps is not None:
            object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "restart_scale", float(self.restart_scale))
        object.__setattr__(self, "step_scale", float(self.step_scale))

    def to_dict(self, prefix=""):
        return {prefix + k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d, prefix=""):
        names = {f.name for f in fields(cls)}
        return cls(**{k[len(prefix):]: v for k, v in d.items() if k.startswith(prefix) and k[len(prefix):] in names})


def default_sgd_step(cert, budget):
    """min{1/L, sqrt(2 Delta / (L sigma^2 N))}."""
    step = 1.0 / cert.L
    if cert.sigma2 > 0:
        step = min(step, math.sqrt(2.0 * cert.delta / (cert.L * cert.sigma2 * budget)))
    return step


class SGD(Algorithm):
    """x_{t+1} = x_t - step * g(x_t, z_t) from x_0 = 0."""

    K = 1

    def __init__(self, config: SolverConfig):
        self.config = config

    def start(self, instance, generator):
        c = self.config
        self.step = c.step if c.step is not None else default_sgd_step(instance.certificate, c.max_rounds)
        self.x = np.zeros(instance.dim)
        self.iterates = [] if c.output == "uniform" else None
        # output index fixed up front by the algorithm's own randomness
        self.out_index = int(generator.integers(0, c.max_rounds)) if c.output == "uniform" else None

    def propose(self, t):
        c = self.config
        if t <= c.max_rounds:
            if self.iterates is not None:
                self.iterates.append(self.x.copy())
            return self.x
        if t == c.max_rounds + 1 and self.iterates is not None:
            return self.iterates[self.out_index]
        return None

    def observe(self, t, values, grads):
        if t <= self.config.max_rounds:
            self.x = self.x - self.step * grads[0]


class Spider(Algorithm):
    """Recursive K=2 estimator v_t = v_{t-1} + g(x_t, z) - g(x_{t-1}, z).

    Each epoch opens with ``restart_batch`` rounds that query (x, x) to average
    fresh seeds at the current point; the remaining q - 1 rounds of the epoch
    query (x_t, x_{t-1}).  Steps are x <- x - eta v with
    eta = c * min{eps / (lbar |v|), 1 / (2 lbar)} with c = ``step_scale``.
    """

    K = 2

    def __init__(self, config: SolverConfig):
        if config.eps is None:
            raise ValueError("SPIDER needs a target eps")
        self.config = config

    def start(self, instance, generator):
        c = self.config
        cert = instance.certificate
        self.lbar = cert.lbar if cert.lbar is not None else cert.L
        sigma = math.sqrt(cert.sigma2)
        self.q = c.epoch if c.epoch is not None else max(1, math.ceil(sigma / c.eps))
        if c.restart_batch is not None:
            self.B = c.restart_batch
        else:
            self.B = max(1, math.ceil(c.restart_scale * cert.sigma2 / c.eps**2))
        self.x = np.zeros(instance.dim)
        self.x_prev = self.x
        self.v = None
        self.acc = np.zeros(instance.dim)
        self.in_restart = 0  # restart rounds consumed so far in this epoch
        self.inner = 0  # recursive rounds taken in this epoch

    def propose(self, t):
        if self.in_restart < self.B and self.inner == 0:
            return np.stack([self.x, self.x])
        return np.stack([self.x, self.x_prev])

    def _step(self):
        c = self.config
        nv = float(np.linalg.norm(self.v))
        eta = c.step_scale / (2.0 * self.lbar)
        if nv > 0:
            eta = min(eta, c.step_scale * c.eps / (self.lbar * nv))
        if self.config.step is not None:
            eta = min(eta, self.config.step)
        self.x_prev = self.x
        self.x = self.x - eta * self.v

    def observe(self, t, values, grads):
        if self.in_restart < self.B and self.inner == 0:
            self.acc = self.acc + grads[0]
            self.in_restart += 1
            if self.in_restart < self.B:
                return
            self.v = self.acc / self.B
            self.acc = np.zeros_like(self.acc)
        else:
            self.v = self.v + grads[0] - grads[1]
        self.inner += 1
        if self.inner >= self.q:
            self.inner = 0
            self.in_restart = 0
        self._step()


class GreedyWalker(Algorithm):
    """Queries ``scale`` on every coordinate revealed so far (the maximal zero-respecting probe).

    Stops after its query covers the whole chain.  In the active protocol it
    uses the round index as the finite-sum index, so indices never repeat.
    """

    K = 1

    def __init__(self, scale=None, active=False):
        self.scale = scale
        self.active = active

    def start(self, instance, generator):
        self.T = instance.chain_T
        if self.T is None:
            raise ValueError("greedy walker needs an instance with a chain length")
        self.value = self.scale if self.scale is not None else getattr(instance, "lam", 1.0)
        self.x = np.zeros(instance.dim)
        self.revealed = set()
        self.done = False

    def propose(self, t):
        if self.done:
            return None
        if len(self.revealed) >= self.T:
            self.done = True
        x = self.x.copy()
        return (x, [t]) if self.active else x

    def observe(self, t, values, grads):
        new = support(grads[0], ZERO_TOL) - self.revealed
        for i in new:
            self.x[i - 1] = self.value
        self.revealed |= new


def sgd(config: SolverConfig, instance, run_seed, stop_eps=None, record=True):
    extra = 1 if config.output == "uniform" and stop_eps is None else 0
    return run(SGD(config), instance, config.max_rounds + extra, run_seed, stop_eps, record)


def spider(config: SolverConfig, instance, run_seed, stop_eps=None, record=True):
    return run(Spider(config), instance, config.max_rounds, run_seed, stop_eps, record)


def greedy_chain_walker(instance, run_seed, max_rounds=10**7, active=False, record=True):
    algo = GreedyWalker(active=active)
    driver = run_active if active else run
    return driver(algo, instance, max_rounds, run_seed, record=record)
