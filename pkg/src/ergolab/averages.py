"""Birkhoff, bilinear and weighted ergodic averages, and a finitary van der
Corput check.

All averages are over the interval Følner sequence ``n = 1..N``. Partial
sums use the blocked reduction in :func:`ergolab._numerics.prefix_sums_at`,
so a profile is a deterministic function of its inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ._numerics import prefix_sums_at

#: default tail-oscillation tolerance for "converged"
CONVERGENCE_TOL = 0.02


@dataclass
class AverageProfile:
    """Partial averages ``(1/N) sum_{n<=N} a_n`` at increasing checkpoints."""

    checkpoints: np.ndarray
    values: np.ndarray
    bound: float = np.inf
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return float(self.values[-1])

    @property
    def oscillation(self):
        """sup - inf of the profile over checkpoints in ``[N_max/2, N_max]``."""
        tail = self.checkpoints >= self.checkpoints[-1] / 2
        v = self.values[tail]
        return float(v.max() - v.min())

    def converged(self, tol=CONVERGENCE_TOL):
        return self.oscillation < tol

    def to_csv(self, path, experiment_id="profile"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["experiment", "N", "value"])
            for N, v in zip(self.checkpoints, self.values):
                w.writerow([experiment_id, int(N), repr(float(v))])


def default_checkpoints(N_max, n_geometric=20, n_tail=41):
    """Geometric checkpoints up to ``N_max`` plus a dense linear grid over the tail half."""
    geo = np.unique(np.geomspace(1, N_max, n_geometric).astype(np.int64))
    tail = np.linspace(N_max // 2, N_max, n_tail).astype(np.int64)
    return np.unique(np.concatenate([geo, tail, [N_max]]))


def _checkpoints(checkpoints):
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.ndim != 1 or len(cps) == 0:
        raise ValueError("checkpoints must be a non-empty 1-d list")
    if cps[0] < 1 or np.any(np.diff(cps) <= 0):
        raise ValueError("checkpoints must be positive and strictly increasing")
    return cps


def profile_of(terms, checkpoints, bound=np.inf, meta=None):
    """Profile of the running averages of ``terms[0], terms[1], ...`` (term n = index n-1)."""
    cps = _checkpoints(checkpoints)
    if cps[-1] > len(terms):
        raise ValueError("not enough terms for the largest checkpoint")
    sums = prefix_sums_at(terms, cps)
    return AverageProfile(cps, sums / cps, float(bound), dict(meta or {}))


def _check_exponents(a1, a2):
    if a1 == 0 or a2 == 0:
        raise ValueError("exponents must be non-zero")
    if a1 == a2:
        raise ValueError("exponents must be distinct")


def birkhoff_average(system, f, x, checkpoints):
    """``(1/N) sum_{n=1}^N f(T^n x)`` at each checkpoint."""
    cps = _checkpoints(checkpoints)
    ns = np.arange(1, cps[-1] + 1, dtype=np.int64)
    terms = f(system.states_at(x, ns))
    return profile_of(terms, cps, f.sup_bound, {"kind": "birkhoff", "f": f.name})


def bilinear_terms(system, f1, f2, a1, a2, x, N):
    """``f1(T^{a1 n} x) f2(T^{a2 n} x)`` for ``n = 1..N``."""
    _check_exponents(a1, a2)
    ns = np.arange(1, N + 1, dtype=np.int64)
    return f1(system.states_at(x, a1 * ns)) * f2(system.states_at(x, a2 * ns))


def bilinear_average(system, f1, f2, a1, a2, x, checkpoints):
    """``(1/N) sum_{n=1}^N f1(T^{a1 n} x) f2(T^{a2 n} x)`` at each checkpoint."""
    cps = _checkpoints(checkpoints)
    terms = bilinear_terms(system, f1, f2, a1, a2, x, int(cps[-1]))
    return profile_of(terms, cps, f1.sup_bound * f2.sup_bound,
                      {"kind": "bilinear", "f1": f1.name, "f2": f2.name, "a": [a1, a2]})


def weighted_average(c, system_y, g, y, checkpoints):
    """``(1/N) sum_{n=1}^N c_n g(S^n y)`` for a weight sequence ``c``.

    ``c`` is a :class:`~ergolab.criterion.WeightSequence` (or any object with
    ``values`` and ``bound``) whose ``values[n-1]`` holds ``c_n``.
    """
    cps = _checkpoints(checkpoints)
    cv = np.asarray(getattr(c, "values", c), dtype=np.float64)
    bound = float(getattr(c, "bound", np.abs(cv).max() if len(cv) else 0.0))
    if len(cv) < cps[-1]:
        raise ValueError(f"weight has {len(cv)} terms, need {int(cps[-1])}")
    N = int(cps[-1])
    ns = np.arange(1, N + 1, dtype=np.int64)
    terms = cv[:N] * g(system_y.states_at(y, ns))
    return profile_of(terms, cps, bound * g.sup_bound, {"kind": "weighted", "g": g.name})


# ----------------------------------------------------------------------------
# van der Corput
# ----------------------------------------------------------------------------

@dataclass
class VdcReport:
    lhs: float
    rhs: float
    H: int
    N: int

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def holds(self):
        return self.slack >= -1e-9


def vdc_check(u, H):
    r"""Finitary van der Corput inequality for a finite sequence of vectors.

    With ``A = (1/N) sum_n u_n`` and
    ``gamma(h) = (1/N) sum_{n, n+h in [1, N]} <u_n, u_{n+h}>``,

    .. math::

        \|A\|^2 \le (1 + H/N) \frac1H \sum_{|h|<H} (1 - |h|/H) |\gamma(h)|
                   + \frac{2H}{N} \max_n \|u_n\|^2 .

    The first term alone already dominates (see ``docs/vdc.md``); the last
    term is kept as a margin for truncated-window variants.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    N = u.shape[0]
    if not 1 <= H <= N:
        raise ValueError("need 1 <= H <= N")
    mean = u.sum(axis=0) / N
    lhs = float(mean @ mean)
    gam = np.empty(H)
    for h in range(H):
        gam[h] = np.einsum("ij,ij->", u[: N - h], u[h:]) / N
    weights = 1.0 - np.arange(H) / H
    # gamma(-h) == gamma(h) for real vectors
    window = abs(gam[0]) + 2.0 * float(np.sum(weights[1:] * np.abs(gam[1:])))
    rhs = (1.0 + H / N) * window / H
    rhs += 2.0 * H / N * float(np.max(np.einsum("ij,ij->i", u, u)))
    return VdcReport(lhs, rhs, int(H), int(N))
