r"""Weights from two-point orbit data and the orthogonality criterion.

For a bounded sequence ``c`` the criterion asks that

.. math::

    \inf_{\delta>0} \lim_{L\to\infty} \inf_{R\ge L}
        \underline{d}(S_{\delta,L,R}(c)) = 1,
    \qquad
    S_{\delta,L,R} = \bigcap_{N=L}^{R}
        \{h : |\tfrac1N \textstyle\sum_{n=1}^N c_n c_{n+h}| < \delta\}.

Nothing here is finitely observable, so :func:`bfko_report` evaluates a
proxy: ``N`` runs over a grid inside ``[L, R]``, ``inf_R`` over a finite
list of extensions, the lower density is the minimum of ``|S ∩ [1, M]|/M``
over the tail half of the horizon, and the ``L``-limit is read at the
largest ``L`` of the schedule.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from ._numerics import prefix_sums_at
from .averages import bilinear_terms
from .errors import InvariantViolation
from .seminorms import autocorrelation_sweep

DEFAULT_DELTAS = (0.4, 0.2, 0.1, 0.05)
DEFAULT_TOL = 0.05


@dataclass
class WeightSequence:
    """``values[n-1] = c_n`` for ``n = 1..len(values)``."""

    values: np.ndarray
    bound: float
    provenance: dict = field(default_factory=lambda: {"source": "external"})

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.values) and np.abs(self.values).max() > self.bound + 1e-12:
            raise ValueError("weight exceeds its declared bound")

    def __len__(self):
        return len(self.values)

    def scaled(self, lam):
        return WeightSequence(lam * self.values, abs(lam) * self.bound,
                              {**self.provenance, "scaled_by": lam})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "value"])
            for n, v in enumerate(self.values, start=1):
                w.writerow([n, repr(float(v))])

    @classmethod
    def from_csv(cls, path, bound=None):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != ["n", "value"]:
            raise ValueError("weight CSV must start with the header 'n,value'")
        body = rows[1:]
        idx = [int(r[0]) for r in body]
        if idx != list(range(1, len(body) + 1)):
            raise ValueError("weight CSV indices must run 1, 2, ... without gaps")
        vals = np.array([float(r[1]) for r in body])
        b = float(np.abs(vals).max()) if bound is None and len(vals) else float(bound or 0.0)
        return cls(vals, b, {"source": "external", "path": str(path)})

    @classmethod
    def external(cls, values, bound=None):
        values = np.asarray(values, dtype=np.float64)
        b = float(np.abs(values).max()) if bound is None and len(values) else float(bound or 0.0)
        return cls(values, b, {"source": "external"})


def make_weight(system, f1, f2, a1, a2, x, N_total):
    """``c_n = f1(T^{a1 n} x) f2(T^{a2 n} x)`` for ``n = 1..N_total``."""
    if N_total < 1:
        raise ValueError("N_total must be >= 1")
    values = bilinear_terms(system, f1, f2, a1, a2, x, N_total)
    return WeightSequence(values, f1.sup_bound * f2.sup_bound,
                          {"source": "bilinear", "system": system.spec.to_dict(), "x": repr(x),
                           "f1": f1.name, "f2": f2.name, "a1": a1, "a2": a2})


# ----------------------------------------------------------------------------
# correlations and S-sets
# ----------------------------------------------------------------------------

@dataclass
class CorrelationTable:
    """``gamma[i, h] = (1/N_i) sum_{n=1}^{N_i} c_n c_{n+h}``, ``h = 0..H_max``."""

    N_list: np.ndarray
    H_max: int
    gamma: np.ndarray
    bound: float

    def rows(self, L, R):
        sel = (self.N_list >= L) & (self.N_list <= R)
        return self.gamma[sel]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "h", "gamma"])
            for N, row in zip(self.N_list, self.gamma):
                for h, g in enumerate(row):
                    w.writerow([int(N), h, repr(float(g))])


def correlation_table(c, N_list, H_max):
    """Prefix self-correlations of a weight for every ``N`` in ``N_list``."""
    if not isinstance(c, WeightSequence):
        c = WeightSequence.external(c)
    N_list = np.unique(np.asarray(N_list, dtype=np.int64))
    if len(N_list) == 0 or N_list[0] < 1:
        raise ValueError("N_list must contain positive lengths")
    if N_list[-1] + H_max > len(c):
        raise ValueError(f"need {int(N_list[-1]) + H_max} terms, weight has {len(c)}")
    gamma = np.stack([autocorrelation_sweep(c.values, H_max, int(N)) for N in N_list])
    return CorrelationTable(N_list, int(H_max), gamma, float(c.bound))


def _in_window(table, L, R):
    rows = table.rows(L, R)
    if len(rows) == 0:
        raise ValueError(f"no N of the table lies in [{L}, {R}]")
    return rows


def tail_min_density(member, horizon):
    """``min_{horizon/2 <= M <= horizon} (1/M) sum_{h<=M} member[h-1]``."""
    counts = np.cumsum(member[:horizon], dtype=np.float64)
    M = np.arange(1, horizon + 1)
    lo = max(1, horizon // 2)
    return float(np.min(counts[lo - 1:] / M[lo - 1:]))


def s_set_density(table, delta, L, R, horizon):
    """The set ``S_{delta,L,R}`` within ``[1, horizon]`` and its lower-density proxy.

    Returns ``(h_values, density)``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if L > R:
        raise ValueError("need L <= R")
    if not 1 <= horizon <= table.H_max:
        raise ValueError("horizon must lie in [1, H_max]")
    rows = _in_window(table, L, R)
    member = np.all(np.abs(rows[:, 1 : horizon + 1]) < delta, axis=0)
    return np.flatnonzero(member) + 1, tail_min_density(member, horizon)


def eta_cutoff(t, delta):
    """Piecewise-linear cutoff: 1 on ``[-delta/2, delta/2]``, 0 off ``(-delta, delta)``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    t = np.asarray(t, dtype=np.float64)
    out = np.clip((delta - np.abs(t)) / (delta / 2.0), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def smoothed_density(table, delta, L, R, horizon):
    """Density proxy with the strict indicators replaced by ``prod_N eta_delta(gamma_N(h))``.

    Never exceeds :func:`s_set_density` on the same data.
    """
    rows = _in_window(table, L, R)
    member = np.prod(eta_cutoff(rows[:, 1 : horizon + 1], delta), axis=0)
    return tail_min_density(member, horizon)


def f_xlr(cx, cxi, L, R, delta, N_list):
    """``prod_{N in N_list} eta_delta((1/N) sum_{n<=N} cx_n cxi_n)``.

    ``cx`` is the weight at ``x`` and ``cxi`` the sequence
    ``f1(T^{a1 n} xi1) f2(T^{a2 n} xi2)``; the product runs over a grid of
    ``N`` inside ``[L, R]`` rather than over every integer.
    """
    a = np.asarray(getattr(cx, "values", cx), dtype=np.float64)
    b = np.asarray(getattr(cxi, "values", cxi), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("cx and cxi must be aligned (same length)")
    N_list = np.asarray(N_list, dtype=np.int64)
    if len(N_list) == 0 or N_list.min() < L or N_list.max() > R:
        raise ValueError("N_list must be a non-empty subset of [L, R]")
    if N_list.max() > len(a):
        raise ValueError("sequences too short for N_list")
    N_sorted = np.unique(N_list)
    avgs = prefix_sums_at(a * b, N_sorted) / N_sorted
    return float(np.prod(eta_cutoff(avgs, delta)))


# ----------------------------------------------------------------------------
# the report
# ----------------------------------------------------------------------------

def default_schedule(N_max):
    """``L`` over powers of ten with ``10 L <= N_max``; ``R`` in ``{L, 10L, 100L}`` capped."""
    Ls = []
    L = 100
    while 10 * L <= N_max:
        Ls.append(L)
        L *= 10
    if not Ls:
        Ls = [max(1, N_max // 10)]
    sched = []
    for L in Ls:
        Rs = sorted({min(R, N_max) for R in (L, 10 * L, 100 * L)})
        sched.extend((L, R) for R in Rs)
    return sched


def default_n_grid(schedule, per_decade=4):
    """Every schedule endpoint plus a geometric grid between them."""
    pts = {int(v) for pair in schedule for v in pair}
    lo, hi = min(pts), max(pts)
    if hi > lo:
        k = int(np.ceil(np.log10(hi / lo) * per_decade)) + 1
        pts.update(int(round(v)) for v in np.geomspace(lo, hi, k))
    return np.array(sorted(pts), dtype=np.int64)


@dataclass
class CriterionReport:
    delta_grid: list
    schedule: list
    horizon: int
    densities: dict
    criterion_value: float
    tol: float
    N_grid: list
    notes: list = field(default_factory=list)

    @property
    def verdict(self):
        return "pass" if self.criterion_value >= 1.0 - self.tol else "fail"

    @property
    def passed(self):
        return self.verdict == "pass"

    def density(self, delta, L, R):
        return self.densities[(float(delta), int(L), int(R))]

    def to_dict(self):
        return {
            "delta_grid": [float(d) for d in self.delta_grid],
            "schedule": [[int(L), int(R)] for L, R in self.schedule],
            "horizon": int(self.horizon),
            "N_grid": [int(n) for n in self.N_grid],
            "densities": [{"delta": d, "L": L, "R": R, "density": v}
                          for (d, L, R), v in sorted(self.densities.items())],
            "criterion_value": float(self.criterion_value),
            "tol": float(self.tol),
            "verdict": self.verdict,
            "notes": list(self.notes),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def bfko_report(c, delta_grid=DEFAULT_DELTAS, schedule=None, horizon=None, N_grid=None,
                tol=DEFAULT_TOL, table=None):
    """Evaluate the finite proxy of the orthogonality criterion for ``c``.

    For each ``delta`` the density is minimised over the ``R`` paired with
    the largest ``L``; the criterion value is the minimum of that over
    ``delta``. Monotonicity of the densities in ``R`` and ``L`` is checked
    and raises :class:`InvariantViolation` if broken.
    """
    if not len(delta_grid):
        raise ValueError("delta_grid must be non-empty")
    if horizon is None:
        horizon = max(1, len(c) // 11)
    N_max = len(c) - horizon
    if schedule is None:
        schedule = default_schedule(N_max)
    schedule = sorted({(int(L), int(R)) for L, R in schedule})
    if not schedule:
        raise ValueError("schedule must be non-empty")
    if N_grid is None:
        N_grid = default_n_grid(schedule)
    if table is None:
        table = correlation_table(c, N_grid, horizon)
    densities = {}
    for d in delta_grid:
        for L, R in schedule:
            densities[(float(d), L, R)] = s_set_density(table, d, L, R, horizon)[1]
    _check_monotone(densities, schedule, delta_grid)

    L_top = max(L for L, _ in schedule)
    per_delta = [min(densities[(float(d), L, R)] for L, R in schedule if L == L_top)
                 for d in delta_grid]
    notes = [f"L-limit read at L={L_top}; inf over R in "
             f"{sorted(R for L, R in schedule if L == L_top)}; N restricted to the grid"]
    return CriterionReport(list(delta_grid), schedule, int(horizon), densities,
                           float(min(per_delta)), float(tol), [int(n) for n in table.N_list], notes)


def _check_monotone(densities, schedule, delta_grid):
    eps = 1e-12
    for d in delta_grid:
        for L, R in schedule:
            v = densities[(float(d), L, R)]
            for L2, R2 in schedule:
                w = densities[(float(d), L2, R2)]
                if L2 == L and R2 > R and w > v + eps:
                    raise InvariantViolation(f"density grew with R at delta={d}, L={L}")
                if R2 == R and L2 > L and w < v - eps:
                    raise InvariantViolation(f"density shrank with L at delta={d}, R={R}")
    ds = sorted(float(d) for d in delta_grid)
    for L, R in schedule:
        for d1, d2 in zip(ds, ds[1:]):
            if densities[(d2, L, R)] < densities[(d1, L, R)] - eps:
                raise InvariantViolation(f"density shrank with delta at L={L}, R={R}")
