"""Command-line experiment runner.

``ergolab <experiment> --config run.toml [--seed N] [--out DIR] [--force]``

Each run writes its numeric outputs (JSON reports, CSV tables) and a
``manifest.json`` into ``--out``. Exit codes: 0 success, 1 configuration
error or refused run, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, config as _config
from ._numerics import n_threads
from .averages import default_checkpoints, vdc_check, weighted_average
from .criterion import DEFAULT_DELTAS, DEFAULT_TOL, bfko_report, make_weight
from .errors import ConfigurationError, InvariantViolation
from .extension import corollary_experiment, generic_point_check
from .observables import from_dict as observable_from_dict
from .rng import make_rng
from .seminorms import SeminormParams, default_schedule, seminorm
from .systems import make_system

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    seed: int
    version: str
    start: str
    end: str = ""
    status: str = "running"
    outputs: list = field(default_factory=list)
    error: str = ""

    def to_dict(self):
        return {"experiment": self.experiment, "config_hash": self.config_hash,
                "seed": self.seed, "version": self.version, "start": self.start,
                "end": self.end, "status": self.status, "outputs": sorted(self.outputs),
                "error": self.error}


class _Writer:
    """Writes output files into one directory and remembers their names."""

    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def json(self, name, obj):
        with open(self.out / name, "w") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2, default=_jsonable)
            fh.write("\n")
        self.files.append(name)

    def csv(self, name, header, rows):
        with open(self.out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.files.append(name)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _pmap(fn, items):
    """Ordered map, threaded when ``ERGOLAB_THREADS`` > 1."""
    items = list(items)
    workers = n_threads()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# ----------------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------------

def run_seminorm(cfg, rng, w, force):
    system = make_system(cfg["system"])
    f = observable_from_dict(cfg["observable"])
    level = int(cfg["level"])
    H = tuple(cfg.get("H", ())) or default_schedule(level)
    params = SeminormParams(level=level, c=int(cfg.get("c", 1)), H_schedule=tuple(int(h) for h in H),
                            N=int(cfg.get("N", 100_000)), M=int(cfg.get("M", 256)),
                            backend=cfg.get("backend", "auto"), blocks=int(cfg.get("blocks", 8)),
                            force=force)
    est = seminorm(system, f, params, rng)
    w.json("seminorm.json", est.to_dict())


def _build_weight(wcfg, rng):
    system = make_system(wcfg["system"])
    f1, f2 = observable_from_dict(wcfg["f1"]), observable_from_dict(wcfg["f2"])
    N = int(wcfg["N"])
    horizon = int(wcfg.get("horizon", max(1, N // 10)))
    x = system.sample(rng, 1)[0]
    weight = make_weight(system, f1, f2, int(wcfg["a1"]), int(wcfg["a2"]), x, N + horizon)
    report = bfko_report(weight.values, tuple(wcfg.get("deltas", DEFAULT_DELTAS)),
                         schedule=[tuple(p) for p in wcfg["schedule"]] if "schedule" in wcfg else None,
                         horizon=horizon, tol=float(wcfg.get("tol", DEFAULT_TOL)))
    return weight, report


def _write_criterion(w, weight, report):
    w.csv("weight.csv", ["n", "value"], enumerate(weight.values, start=1))
    w.csv("densities.csv", ["delta", "L", "R", "density"],
          [(d, L, R, v) for (d, L, R), v in sorted(report.densities.items())])
    w.json("criterion.json", report.to_dict())


def run_criterion(cfg, rng, w, force):
    weight, report = _build_weight(cfg, rng)
    _write_criterion(w, weight, report)


def run_rtt(cfg, rng, w, force):
    r_weight, r_targets = rng.spawn(2)
    weight, report = _build_weight(cfg["weight"], r_weight)
    _write_criterion(w, weight, report)
    N = int(cfg["N"])
    if N > len(weight):
        raise ConfigurationError(f"N={N} exceeds the weight length {len(weight)}")
    tail_tol = float(cfg.get("tail_tol", 0.05))
    min_fraction = float(cfg.get("min_fraction", 0.95))
    cps = default_checkpoints(N)
    targets = cfg["targets"]
    trngs = r_targets.spawn(len(targets))

    def one(args):
        t, trng = args
        system = make_system(t["system"])
        g = observable_from_dict(t["g"])
        ys = system.sample(trng, int(t.get("samples", 20)))
        return [weighted_average(weight, system, g, y, cps) for y in ys]

    results = _pmap(one, zip(targets, trngs))
    summary, rows = [], []
    for i, (t, profs) in enumerate(zip(targets, results)):
        name = t.get("name", f"target{i}")
        osc = [p.oscillation for p in profs]
        ok = sum(o < tail_tol for o in osc)
        summary.append({"name": name, "samples": len(profs), "converged": ok,
                        "fraction": ok / len(profs), "max_oscillation": max(osc),
                        "median_oscillation": float(np.median(osc)),
                        "passed": ok / len(profs) >= min_fraction})
        for j, p in enumerate(profs):
            rows.extend((f"{name}/{j}", n, v) for n, v in zip(p.checkpoints, p.values))
    w.csv("rtt_profiles.csv", ["experiment", "N", "value"], rows)
    w.json("rtt.json", {"N": N, "tail_tol": tail_tol, "min_fraction": min_fraction,
                        "criterion_value": report.criterion_value, "verdict": report.verdict,
                        "targets": summary, "passed": all(s["passed"] for s in summary)})


def run_vdc(cfg, rng, w, force):
    N, H = int(cfg["N"]), int(cfg["H"])
    dim, trials = int(cfg.get("dim", 1)), int(cfg.get("trials", 100))
    rows = []
    for k, r in enumerate(rng.spawn(trials)):
        # alternate noise and structured sequences so both regimes are exercised
        u = r.uniform(-1.0, 1.0, size=(N, dim))
        if k % 2:
            theta = r.random(dim)
            u = u * 0.1 + np.cos(2 * math.pi * np.outer(np.arange(N), theta))
        rep = vdc_check(u, H)
        rows.append((k, rep.lhs, rep.rhs, rep.slack))
    w.csv("vdc.csv", ["trial", "lhs", "rhs", "slack"], rows)
    worst = min(r[3] for r in rows)
    w.json("vdc.json", {"N": N, "H": H, "dim": dim, "trials": trials, "min_slack": worst})
    if worst < -1e-9:
        raise InvariantViolation(f"van der Corput bound violated, slack {worst:.3e}")


def run_extension(cfg, rng, w, force):
    system = make_system(cfg["system"])
    f1, f2 = observable_from_dict(cfg["f1"]), observable_from_dict(cfg["f2"])
    rep = corollary_experiment(system, f1, f2, int(cfg["a1"]), int(cfg["a2"]), int(cfg["N"]),
                               int(cfg["samples"]), rng)
    w.csv("extension_samples.csv", ["sample", "average", "tail_oscillation"],
          zip(range(rep.samples), rep.averages, rep.tail_oscillations))
    w.json("extension.json", rep.to_dict())


def run_generic(cfg, rng, w, force):
    system = make_system(cfg["system"])
    g1, g2 = observable_from_dict(cfg["g1"]), observable_from_dict(cfg["g2"])
    points = int(cfg.get("points", 10))
    r_x, r_mc = rng.spawn(2)
    xs = system.sample(r_x, points)
    mcs = r_mc.spawn(points)
    a1, a2 = int(cfg["a1"]), int(cfg["a2"])
    N, mc, tol = int(cfg["N"]), int(cfg["mc"]), float(cfg.get("tol", 0.03))
    reps = _pmap(lambda args: generic_point_check(system, g1, g2, a1, a2, args[0], N, mc,
                                                  args[1], tol), zip(xs, mcs))
    w.csv("generic_points.csv", ["point", "lhs", "rhs", "rhs_stderr", "diff", "passed"],
          [(i, r.lhs, r.rhs, r.rhs_stderr, r.diff, int(r.passed)) for i, r in enumerate(reps)])
    w.json("generic.json", {"points": points, "passed": sum(r.passed for r in reps),
                            "tol": tol, "reports": [r.to_dict() for r in reps]})


RUNNERS = {
    "seminorm": run_seminorm,
    "criterion": run_criterion,
    "rtt": run_rtt,
    "vdc": run_vdc,
    "extension": run_extension,
    "generic": run_generic,
}


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

def run(experiment, cfg, seed=None, out="ergolab-out", force=False):
    """Validate ``cfg``, run ``experiment`` and return its :class:`RunManifest`.

    Errors propagate after the manifest has been written with a failed status.
    """
    _config.validate(cfg, experiment)
    _config.check_caps(cfg, experiment, force)
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    resolved = {**cfg, "experiment": experiment, "seed": seed}
    w = _Writer(out)
    man = RunManifest(experiment, _config.config_hash(resolved), seed, __version__, _now())
    try:
        RUNNERS[experiment](cfg, make_rng(seed), w, force)
        man.status = "ok"
    except Exception as exc:
        man.status = "failed"
        man.error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        man.end = _now()
        man.outputs = list(w.files)
        with open(w.out / "manifest.json", "w") as fh:
            json.dump(man.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return man


def build_parser():
    p = argparse.ArgumentParser(prog="ergolab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ergolab {__version__}")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in RUNNERS:
        s = sub.add_parser(name, help=f"run a {name} experiment")
        s.add_argument("--config", required=True, help="TOML experiment file")
        s.add_argument("--seed", type=int, default=None, help="u64 seed (overrides the config)")
        s.add_argument("--out", default="ergolab-out", help="output directory")
        s.add_argument("--force", action="store_true", help="run even above the cost caps")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config.load(args.config)
        man = run(args.experiment, cfg, args.seed, args.out, args.force)
    except InvariantViolation as exc:
        print(f"ergolab: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigurationError, ValueError) as exc:
        print(f"ergolab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(os.path.join(args.out, "manifest.json"))
    for name in man.outputs:
        print(os.path.join(args.out, name))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
