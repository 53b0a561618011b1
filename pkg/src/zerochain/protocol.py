"""The K-batch query protocol, run traces and their audits.

Each round the algorithm proposes K points, the oracle draws one seed from a
counter-based stream addressed by (run_seed, round) and answers every point
with that seed.  Values are exact, gradients are the seeded estimates.

Trace text format (version 1), one record per line, fields separated by a
single space, every float written with ``float.hex`` so replay is bit-exact::

    zerochain-trace 1
    protocol <standard|active>
    run_seed <int>
    manifest <hex of the UTF-8 manifest text, or ->
    rounds <n>
    <t> <K> <d> <seed> <K*d point floats> <K values> <K*d gradient floats>
    ...

``<seed>`` is ``b:<0|1>`` for a Bernoulli bit, ``v:<bits>`` for a bit vector,
``k:<i>,<j>,...`` for active-oracle indices (one per slot) and ``g:<hex>``
for a Gaussian draw.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .chain import ZERO_TOL, progress, support
from .transforms import RotationMatrix, soft_project

__all__ = [
    "Algorithm",
    "Round",
    "Trace",
    "run",
    "run_active",
    "zero_respecting_audit",
    "stationarity_time",
    "progress_curve",
    "dumps_trace",
    "loads_trace",
]


class Algorithm:
    """Interface every solver implements.

    ``start`` receives the instance (for public facts such as its dimension
    and certificate) and the algorithm's own generator, drawn once per run.
    ``propose`` returns a ``(K, d)`` array, or ``None`` to stop; in the active
    protocol it returns ``(points, indices)``.  ``observe`` gets the exact
    values and the seeded gradients for the proposed points.
    """

    K = 1

    def start(self, instance, generator):
        pass

    def propose(self, t):
        raise NotImplementedError

    def observe(self, t, values, grads):
        pass


@dataclass(frozen=True)
class Round:
    t: int
    points: np.ndarray
    seed: object
    values: np.ndarray
    grads: np.ndarray


@dataclass
class Trace:
    protocol: str
    run_seed: int
    manifest: str = ""
    rounds: list = field(default_factory=list)
    n_rounds: int = 0
    # filled by run() when a stopping tolerance is given
    hit_round: Optional[int] = None
    last_point: Optional[np.ndarray] = None

    @property
    def K(self):
        return self.rounds[0].points.shape[0] if self.rounds else 0

    def queries(self):
        return sum(r.points.shape[0] for r in self.rounds)


def _batch(X, K, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape != (K, d):
        raise ValueError(f"algorithm proposed a batch of shape {X.shape}, protocol expects {(K, d)}")
    return X


def _instance_K(instance):
    spec = getattr(instance, "spec", None)
    return None if spec is None else spec.K


def _grad_norm(instance, x):
    return float(np.linalg.norm(instance.grad(x)))


def run(algorithm, instance, max_rounds, run_seed, stop_eps=None, record=True, manifest=""):
    """Drive ``algorithm`` against ``instance`` for at most ``max_rounds`` rounds.

    With ``stop_eps`` the run ends at the first round whose slot-1 point has
    exact gradient norm at most ``stop_eps`` (stored as ``hit_round``).  With
    ``record=False`` only the round count and the last point are kept.
    """
    return _drive(algorithm, instance, max_rounds, run_seed, stop_eps, record, manifest, active=False)


def run_active(algorithm, instance, max_rounds, run_seed, stop_eps=None, record=True, manifest=""):
    """Variant where the algorithm picks the finite-sum index of every query."""
    return _drive(algorithm, instance, max_rounds, run_seed, stop_eps, record, manifest, active=True)


def _drive(algorithm, instance, max_rounds, run_seed, stop_eps, record, manifest, active):
    rng.check_seed(run_seed)
    K, d = algorithm.K, instance.dim
    want = _instance_K(instance)
    if want is not None and want != K:
        raise ValueError(f"algorithm batch size {K} does not match instance K={want}")
    algorithm.start(instance, rng.stream(run_seed, rng.ALGORITHM))
    trace = Trace("active" if active else "standard", run_seed, manifest)
    seeds = instance.seeds
    for t in range(1, max_rounds + 1):
        prop = algorithm.propose(t)
        if prop is None:
            break
        if active:
            X, ks = prop
            X = _batch(X, K, d)
            ks = tuple(int(k) for k in np.atleast_1d(ks))
            if len(ks) != K:
                raise ValueError("active protocol needs one index per query")
            values = np.atleast_1d(instance.value(X))
            grads = np.stack([instance.estimate(X[i], ks[i]) for i in range(K)])
            z = ks
        else:
            X = _batch(prop, K, d)
            z = seeds.draw(rng.stream(run_seed, rng.ORACLE, t))
            values, grads = instance.respond(X, z)
        algorithm.observe(t, values, grads)
        trace.n_rounds = t
        trace.last_point = X[0]
        if record:
            trace.rounds.append(Round(t, X, z, values, grads))
        if stop_eps is not None and _grad_norm(instance, X[0]) <= stop_eps:
            trace.hit_round = t
            break
    return trace


def zero_respecting_audit(trace: Trace, tol=ZERO_TOL):
    """Violations ``(round, slot, coordinate)`` of the zero-respecting rule (1-based)."""
    revealed = set()
    out = []
    for r in trace.rounds:
        for k, x in enumerate(r.points):
            for i in sorted(support(x, tol) - revealed):
                out.append((r.t, k + 1, i))
        for g in r.grads:
            revealed |= support(g, tol)
    return out


def stationarity_time(trace: Trace, instance, eps):
    """First round whose slot-1 point satisfies |grad F| <= eps, else None."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not trace.rounds:
        return trace.hit_round
    X = np.stack([r.points[0] for r in trace.rounds])
    norms = np.linalg.norm(instance.grad(X), axis=-1)
    hits = np.flatnonzero(norms <= eps)
    return int(trace.rounds[hits[0]].t) if hits.size else None


def progress_curve(trace: Trace, rotation: Optional[RotationMatrix] = None, R=None, alpha=ZERO_TOL):
    """Running max over rounds of prog_alpha of the queries (through U^T rho when rotated)."""
    best = 0
    out = []
    for r in trace.rounds:
        X = r.points
        if rotation is not None:
            if X.shape[1] != rotation.d:
                raise ValueError("rotation dimension does not match the trace")
            radius = 230.0 * np.sqrt(rotation.T) if R is None else R
            X = soft_project(X, radius)[0] @ rotation.columns
        best = max(best, int(np.max(progress(X, alpha))))
        out.append(best)
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MAGIC = "zerochain-trace 1"


def _enc_seed(z):
    if isinstance(z, tuple):
        return "k:" + ",".join(str(k) for k in z)
    if isinstance(z, np.ndarray):
        return "v:" + "".join(str(int(b)) for b in z)
    if isinstance(z, (int, np.integer)):
        return f"b:{int(z)}"
    return "g:" + float(z).hex()


def _dec_seed(s):
    tag, body = s.split(":", 1)
    if tag == "k":
        return tuple(int(k) for k in body.split(","))
    if tag == "v":
        return np.array([int(c) for c in body], dtype=np.int8)
    if tag == "b":
        return int(body)
    if tag == "g":
        return float.fromhex(body)
    raise ValueError(f"unknown seed tag {tag!r}")


def _hex(a):
    return " ".join(float(v).hex() for v in np.ravel(a))


def dumps_trace(trace: Trace):
    head = [
        _MAGIC,
        f"protocol {trace.protocol}",
        f"run_seed {trace.run_seed}",
        "manifest " + (trace.manifest.encode().hex() if trace.manifest else "-"),
        f"rounds {len(trace.rounds)}",
    ]
    body = []
    for r in trace.rounds:
        K, d = r.points.shape
        body.append(
            f"{r.t} {K} {d} {_enc_seed(r.seed)} {_hex(r.points)} {_hex(r.values)} {_hex(r.grads)}"
        )
    return "\n".join(head + body) + "\n"


def loads_trace(text):
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError("not a version-1 trace")
    meta = dict(line.split(" ", 1) for line in lines[1:5])
    manifest = "" if meta["manifest"] == "-" else bytes.fromhex(meta["manifest"]).decode()
    trace = Trace(meta["protocol"], int(meta["run_seed"]), manifest)
    n = int(meta["rounds"])
    for line in lines[5 : 5 + n]:
        parts = line.split(" ")
        t, K, d = int(parts[0]), int(parts[1]), int(parts[2])
        seed = _dec_seed(parts[3])
        nums = np.array([float.fromhex(v) for v in parts[4:]])
        if nums.size != 2 * K * d + K:
            raise ValueError(f"round {t}: expected {2 * K * d + K} numbers, got {nums.size}")
        pts = nums[: K * d].reshape(K, d)
        vals = nums[K * d : K * d + K]
        grads = nums[K * d + K :].reshape(K, d)
        trace.rounds.append(Round(t, pts, seed, vals, grads))
    trace.n_rounds = trace.rounds[-1].t if trace.rounds else 0
    trace.last_point = trace.rounds[-1].points[0] if trace.rounds else None
    return trace
