"""Experiment manifests, epsilon sweeps, scaling fits and the command line.

Result files
------------
A sweep writes ``<output>.csv`` and ``<output>.summary.txt``.

CSV: header line then one row per (eps, trial), comma separated, in this order::

    eps,trial,seed,queries,final_grad_norm,T,p,round_bound,stationary_round,censored

Floats are written with ``repr`` (shortest round-trip form), so rows compare
bit-exactly across reruns.  ``queries`` is K times the number of rounds until
the slot-1 point was eps-stationary (or the whole budget when ``censored``).

Summary: a key/value document (see :mod:`zerochain.kvtext`) holding the full
manifest under ``manifest.*``, the code hash, the fit and per-eps medians.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import audit, kvtext, rng
from .errors import InfeasibleInstance
from .solvers import SolverConfig, sgd, spider
from .transforms import InstanceSpec, build_instance, required_dimension

__all__ = [
    "ExperimentManifest",
    "ScalingFit",
    "fit_scaling",
    "run_trial",
    "run_experiment",
    "sweep",
    "code_hash",
    "cli",
    "main",
]

CSV_COLUMNS = (
    "eps",
    "trial",
    "seed",
    "queries",
    "final_grad_norm",
    "T",
    "p",
    "round_bound",
    "stationary_round",
    "censored",
)

THREADS_ENV = "ZEROCHAIN_THREADS"


@dataclass(frozen=True)
class ExperimentManifest:
    """Instance spec, solver config and the sweep design.

    ``instance.eps`` is ignored by sweeps (each grid point overrides it);
    ``solver.eps`` likewise follows the grid.  ``slope_lo``/``slope_hi``
    optionally state the expected fitted exponent; ``sweep`` fails outside it.
    """

    instance: InstanceSpec
    solver: SolverConfig
    eps_grid: tuple
    trials: int = 1
    seed: int = 0
    output: str = "results/experiment"
    slope_lo: Optional[float] = None
    slope_hi: Optional[float] = None

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eps_grid)
        if not grid:
            raise ValueError("eps grid is empty")
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ValueError("eps grid must be strictly decreasing")
        if any(e <= 0 for e in grid):
            raise ValueError("eps values must be positive")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        rng.check_seed(self.seed)
        object.__setattr__(self, "eps_grid", grid)

    def to_dict(self):
        out = {
            "eps_grid": list(self.eps_grid),
            "trials": int(self.trials),
            "seed": int(self.seed),
            "output": self.output,
        }
        if self.slope_lo is not None:
            out["slope_lo"] = float(self.slope_lo)
        if self.slope_hi is not None:
            out["slope_hi"] = float(self.slope_hi)
        out.update(self.instance.to_dict("instance."))
        out.update(self.solver.to_dict("solver."))
        return out

    def dumps(self):
        return kvtext.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        top = {k: v for k, v in d.items() if "." not in k}
        unknown = set(top) - {"eps_grid", "trials", "seed", "output", "slope_lo", "slope_hi"}
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        return cls(
            instance=InstanceSpec.from_dict(d, "instance."),
            solver=SolverConfig.from_dict(d, "solver."),
            eps_grid=tuple(top["eps_grid"]),
            trials=top.get("trials", 1),
            seed=top.get("seed", 0),
            output=top.get("output", "results/experiment"),
            slope_lo=top.get("slope_lo"),
            slope_hi=top.get("slope_hi"),
        )

    @classmethod
    def loads(cls, text):
        return cls.from_dict(kvtext.loads(text))


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    stderr: float
    points: tuple


def fit_scaling(points):
    """OLS of log queries on log(1/eps); ``points`` is a list of (x, y) pairs."""
    pts = tuple((float(x), float(y)) for x, y in points)
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.unique(x).size < 2:
        raise ValueError("need at least two distinct abscissae")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    if x.size > 2:
        resid = y - (intercept + slope * x)
        stderr = math.sqrt(float(np.sum(resid**2)) / (x.size - 2) / sxx)
    else:
        stderr = 0.0
    return ScalingFit(slope, intercept, stderr, pts)


def code_hash():
    """SHA-256 over the package sources (.py and .pyx), in sorted path order."""
    root = Path(__file__).resolve().parent
    h = hashlib.sha256()
    for path in sorted(list(root.glob("*.py")) + list(root.glob("*.pyx"))):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def _trial_seeds(master, i, trial):
    return rng.derive_seed(master, i, trial, 0), rng.derive_seed(master, i, trial, 1)


def run_trial(manifest: ExperimentManifest, i, trial):
    """One run at grid point ``i``; returns a CSV row as a dict."""
    eps = manifest.eps_grid[i]
    run_seed, inst_seed = _trial_seeds(manifest.seed, i, trial)
    spec = InstanceSpec(**{**manifest.instance.to_dict(), "eps": eps, "seed": inst_seed})
    inst = build_instance(spec)
    cfg = SolverConfig(**{**manifest.solver.to_dict(), "eps": eps})
    solve = spider if cfg.name == "spider" else sgd
    tr = solve(cfg, inst, run_seed, stop_eps=eps, record=False)
    hit = tr.hit_round
    rounds = hit if hit is not None else tr.n_rounds
    params = getattr(inst, "params", None)
    return {
        "eps": eps,
        "trial": trial,
        "seed": run_seed,
        "queries": rounds * spec.K,
        "final_grad_norm": float(np.linalg.norm(inst.grad(tr.last_point))),
        "T": inst.certificate.T,
        "p": inst.certificate.p,
        "round_bound": params.rounds if params is not None else 0.0,
        "stationary_round": hit if hit is not None else -1,
        "censored": hit is None,
    }


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def _threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _run_all(manifest, jobs):
    n = _threads()
    if n == 1:
        return [run_trial(manifest, i, t) for i, t in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        futs = [ex.submit(run_trial, manifest, i, t) for i, t in jobs]
        return [f.result() for f in futs]


@dataclass
class SweepResult:
    manifest: ExperimentManifest
    rows: list
    fit: Optional[ScalingFit]
    medians: list
    beyond_bound: list
    censored: int
    runtime: float
    csv: str = ""
    summary: str = ""
    passed: bool = True
    paths: tuple = field(default_factory=tuple)


def _summarize(manifest, rows, runtime, do_fit):
    medians, beyond = [], []
    for i, eps in enumerate(manifest.eps_grid):
        sel = [r for r in rows if r["eps"] == eps]
        medians.append(float(np.median([r["queries"] for r in sel])))
        beyond.append(float(np.mean([r["stationary_round"] == -1 or r["stationary_round"] > r["round_bound"] for r in sel])))
    fit = None
    if do_fit and len(manifest.eps_grid) >= 2:
        fit = fit_scaling([(math.log(1 / e), math.log(m)) for e, m in zip(manifest.eps_grid, medians)])
    censored = sum(r["censored"] for r in rows)
    passed = True
    if fit is not None:
        if manifest.slope_lo is not None and fit.slope < manifest.slope_lo:
            passed = False
        if manifest.slope_hi is not None and fit.slope > manifest.slope_hi:
            passed = False
    return medians, beyond, fit, censored, passed


def _summary_text(res: SweepResult):
    d = {f"manifest.{k}": v for k, v in res.manifest.to_dict().items()}
    d["code_hash"] = code_hash()
    d["rows"] = len(res.rows)
    d["censored"] = res.censored
    d["runtime_s"] = round(res.runtime, 3)
    d["median_queries"] = res.medians
    d["fraction_beyond_round_bound"] = res.beyond_bound
    if res.fit is not None:
        d["fit.slope"] = res.fit.slope
        d["fit.intercept"] = res.fit.intercept
        d["fit.stderr"] = res.fit.stderr
    d["passed"] = res.passed
    return kvtext.dumps(d)


def run_experiment(manifest: ExperimentManifest, do_fit=True, write=True, grid=None):
    """Run every (eps, trial) of the manifest, optionally writing result files."""
    t0 = time.perf_counter()
    idx = range(len(manifest.eps_grid)) if grid is None else grid
    jobs = [(i, t) for i in idx for t in range(manifest.trials)]
    rows = _run_all(manifest, jobs)
    if grid is not None:
        manifest = ExperimentManifest(
            **{**manifest.__dict__, "eps_grid": tuple(manifest.eps_grid[i] for i in idx)}
        )
    medians, beyond, fit, censored, passed = _summarize(manifest, rows, 0, do_fit)
    res = SweepResult(manifest, rows, fit, medians, beyond, censored, time.perf_counter() - t0, passed=passed)
    res.csv = rows_to_csv(rows)
    res.summary = _summary_text(res)
    if write:
        base = Path(manifest.output)
        base.parent.mkdir(parents=True, exist_ok=True)
        csv_path = base.with_name(base.name + ".csv")
        sum_path = base.with_name(base.name + ".summary.txt")
        csv_path.write_text(res.csv)
        sum_path.write_text(res.summary)
        res.paths = (str(csv_path), str(sum_path))
    return res


def sweep(manifest: ExperimentManifest, write=True):
    return run_experiment(manifest, do_fit=True, write=write)


def manifest_from_summary(text):
    d = kvtext.loads(text)
    return ExperimentManifest.from_dict({k[len("manifest."):]: v for k, v in d.items() if k.startswith("manifest.")})


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _suite_key(name):
    norm = name.replace("_", "").replace("-", "").upper()
    for k in audit.SUITES:
        if k.replace("_", "") == norm:
            return k
    raise KeyError(name)


def _result(obj):
    print("RESULT " + json.dumps(obj, sort_keys=True))


def _cmd_verify(args):
    keys = list(audit.SUITES) if args.suite == "all" else [_suite_key(args.suite)]
    ok = True
    out = []
    for k in keys:
        print(f"== {k}")
        for r in audit.lemma_suite(k, args.budget, args.seed):
            print("  " + r.line() + (f"  ({r.note})" if r.note else ""))
            ok &= r.passed
            out.append({"suite": k, "check": r.check, "worst": r.worst, "bound": r.bound, "passed": r.passed})
    print(f"{sum(o['passed'] for o in out)}/{len(out)} clauses passed")
    _result({"reports": out, "passed": ok})
    return 0 if ok else 1


def _load_manifest(path):
    return ExperimentManifest.loads(Path(path).read_text())


def _cmd_run(args, do_fit):
    m = _load_manifest(args.manifest)
    if args.output:
        m = ExperimentManifest(**{**m.__dict__, "output": args.output})
    res = run_experiment(m, do_fit=do_fit, grid=None if do_fit else [0])
    for eps, med, frac in zip(res.manifest.eps_grid, res.medians, res.beyond_bound):
        print(f"eps={eps:<8g} median queries={med:<12g} beyond (T-1)/(2p): {frac:.2f}")
    if res.fit is not None:
        print(f"slope {res.fit.slope:.3f} +- {res.fit.stderr:.3f}  (censored runs: {res.censored})")
    print("wrote " + ", ".join(res.paths))
    _result(
        {
            "csv": res.paths[0],
            "summary": res.paths[1],
            "slope": None if res.fit is None else res.fit.slope,
            "medians": res.medians,
            "passed": res.passed,
        }
    )
    return 0 if res.passed else 1


def _cmd_replay(args):
    text = Path(args.summary).read_text()
    m = manifest_from_summary(text)
    csv_path = Path(args.summary.replace(".summary.txt", ".csv"))
    res = run_experiment(m, do_fit=True, write=False)
    same = csv_path.exists() and csv_path.read_text() == res.csv
    print("replay " + ("reproduced every row" if same else "DIFFERS from the stored CSV"))
    _result({"identical": same})
    return 0 if same else 1


def _cmd_lemma1(args):
    r = audit.hitting_time_sim(args.T, args.p, args.delta, args.trials, args.seed)
    margin = args.delta + 3 * math.sqrt(args.delta / args.trials)
    z = abs(r.mean_hitting_time - args.T / args.p) / r.stderr if r.stderr > 0 else 0.0
    ok = r.failure_rate <= margin and z <= 3.0
    print(f"threshold {r.threshold} rounds; failure rate {r.failure_rate:.4f} (allowed {margin:.4f})")
    print(f"mean hitting time {r.mean_hitting_time:.2f} +- {r.stderr:.2f} vs T/p = {args.T / args.p:g}")
    _result({**r._asdict(), "margin": margin, "passed": ok})
    return 0 if ok else 1


def _cmd_active(args):
    ok = audit.active_equivalence(args.N, args.T, args.seed)
    print(f"N={args.N} T={args.T}: pattern counts {'match' if ok else 'DO NOT match'} (N-1)^#zeros")
    _result({"N": args.N, "T": args.T, "passed": ok})
    return 0 if ok else 1


def _cmd_dim(args):
    d = required_dimension(args.K, args.T, args.p, args.delta, args.R)
    print(d)
    _result({"K": args.K, "T": args.T, "p": args.p, "delta": args.delta, "R": args.R, "dimension": d})
    return 0


def _parser():
    ap = argparse.ArgumentParser(prog="zerochain", description="Lower-bound constructions testbed.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("verify", help="run audit suites")
    v.add_argument("--suite", default="all")
    v.add_argument("--budget", type=int, default=None)
    v.add_argument("--seed", type=int, default=0)
    for name in ("run", "sweep"):
        s = sub.add_parser(name, help=f"{name} an experiment manifest")
        s.add_argument("--manifest", required=True)
        s.add_argument("--output", default=None)
    r = sub.add_parser("replay", help="rerun a summary's manifest and compare CSVs")
    r.add_argument("--summary", required=True)
    l1 = sub.add_parser("lemma1", help="greedy-walker hitting-time simulation")
    l1.add_argument("--T", type=int, required=True)
    l1.add_argument("--p", type=float, required=True)
    l1.add_argument("--delta", type=float, required=True)
    l1.add_argument("--trials", type=int, default=1000)
    l1.add_argument("--seed", type=int, default=0)
    a = sub.add_parser("active", help="exhaustive active-oracle equivalence")
    a.add_argument("--N", type=int, required=True)
    a.add_argument("--T", type=int, required=True)
    a.add_argument("--seed", type=int, default=0)
    d = sub.add_parser("dim", help="dimension needed by the rotation argument")
    d.add_argument("--K", type=int, required=True)
    d.add_argument("--T", type=int, required=True)
    d.add_argument("--p", type=float, required=True)
    d.add_argument("--delta", type=float, required=True)
    d.add_argument("--R", type=float, default=None)
    return ap


def cli(argv=None):
    """Entry point returning the exit code: 0 success, 1 failed check, 2 bad arguments."""
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.cmd == "verify":
            return _cmd_verify(args)
        if args.cmd == "run":
            return _cmd_run(args, do_fit=False)
        if args.cmd == "sweep":
            return _cmd_run(args, do_fit=True)
        if args.cmd == "replay":
            return _cmd_replay(args)
        if args.cmd == "lemma1":
            return _cmd_lemma1(args)
        if args.cmd == "active":
            return _cmd_active(args)
        return _cmd_dim(args)
    except (KeyError, ValueError, InfeasibleInstance, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli())
