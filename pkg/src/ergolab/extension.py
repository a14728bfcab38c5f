r"""The three-fold self-joining over the Kronecker factor, realised by sampling.

For an ergodic system with Kronecker factor ``pi : X -> (Z, alpha)`` and
distinct non-zero ``a1, a2``:

* ``Z'`` is the closure of ``{(a1 n alpha, a2 n alpha)}`` in ``Z^2``. On a
  torus with irrational generator it is the image of Haar measure under
  ``t -> (a1 t, a2 t)``, annihilated by ``(a2/d, -a1/d)``, ``d = gcd``.
* ``nu_z`` is the law of ``(xi1, xi2)`` with ``xi_i ~ mu_{z + z_i}`` and
  ``(z1, z2) ~ Haar(Z')``.
* ``mu~ = int delta_x ⊗ nu_{pi x} dmu(x)`` lives on
  ``X~ = {(x, xi1, xi2) : (pi xi1 - pi x, pi xi2 - pi x) in Z'}`` and is
  invariant under ``(T, T, T)``.

Only torus and trivial Kronecker factors are handled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._numerics import prefix_sums_at, wrap01
from .averages import bilinear_terms, _check_exponents
from .errors import UnsupportedError
from .observables import Observable
from .rng import make_rng
from .systems import System, SystemSpec, TRIVIAL_POINT


class ZPrimeSampler:
    """Haar measure on ``Z'`` for a torus (or trivial) Kronecker factor."""

    def __init__(self, a1, a2, kronecker):
        _check_exponents(a1, a2)
        self.a1, self.a2 = int(a1), int(a2)
        d = math.gcd(abs(self.a1), abs(self.a2))
        self.annihilator = (self.a2 // d, -self.a1 // d)
        if kronecker is None or kronecker.kind not in ("torus", "trivial"):
            kind = None if kronecker is None else kronecker.kind
            raise UnsupportedError(f"Z' sampling needs a torus or trivial Kronecker factor, got {kind}")
        if kronecker.kind == "torus" and any(a.looks_rational() for a in kronecker.alphas):
            raise UnsupportedError("rational rotation: the orbit closure is finite, not handled")
        self.dim = kronecker.dim if kronecker.kind == "torus" else 0

    def sample(self, rng, count=1):
        """``count`` draws ``(z1, z2)``, each an array of shape ``(count, dim)``."""
        t = make_rng(rng).random((count, self.dim))
        return wrap01(self.a1 * t), wrap01(self.a2 * t)

    def relation_residual(self, z1, z2):
        """Distance of ``k z1 + m z2`` to the integers, ``(k, m)`` the annihilator."""
        k, m = self.annihilator
        r = wrap01(k * np.asarray(z1) + m * np.asarray(z2))
        return np.minimum(r, 1.0 - r)


def sample_zprime(s, rng):
    """One draw ``(z1, z2)`` from Haar measure on ``Z'``."""
    z1, z2 = s.sample(rng, 1)
    return z1[0], z2[0]


class TildeMuSampler:
    """Sampler for ``mu~`` over a base system with declared fibres."""

    def __init__(self, base, a1, a2):
        if not base.ergodic:
            raise UnsupportedError("the joining is built over an ergodic base")
        self.base = base
        self.zprime = ZPrimeSampler(a1, a2, base.kronecker)

    def sample(self, rng, count=1):
        rng = make_rng(rng)
        r_x, r_z, r_f = rng.spawn(3)
        xs = self.base.sample(r_x, count)
        z1, z2 = self.zprime.sample(r_z, count)
        fibre_rngs = r_f.spawn(2 * count)
        out = []
        for m, x in enumerate(xs):
            z = np.atleast_1d(self.base.project(x)) if self.zprime.dim else TRIVIAL_POINT
            xi1 = self.base.sample_fiber(wrap01(z + z1[m]) if self.zprime.dim else z, fibre_rngs[2 * m])
            xi2 = self.base.sample_fiber(wrap01(z + z2[m]) if self.zprime.dim else z, fibre_rngs[2 * m + 1])
            out.append((x, xi1, xi2))
        return out

    def relation_residual(self, triple):
        """How far ``(pi xi1 - pi x, pi xi2 - pi x)`` is from ``Z'`` (0 for trivial factors)."""
        if not self.zprime.dim:
            return 0.0
        x, xi1, xi2 = triple
        p = self.base.project
        z = np.atleast_1d(p(x))
        return float(np.max(self.zprime.relation_residual(np.atleast_1d(p(xi1)) - z,
                                                          np.atleast_1d(p(xi2)) - z)))


def sample_tilde_mu(ts, rng):
    return ts.sample(rng, 1)[0]


# ----------------------------------------------------------------------------
# X~ as a system
# ----------------------------------------------------------------------------

class TripleBatch(NamedTuple):
    x: object
    xi1: object
    xi2: object


class JoiningSystem(System):
    """``(X~, mu~, T x T x T)``; not ergodic in general, so seminorms use Monte Carlo."""

    ergodic = False

    def __init__(self, base, a1, a2):
        self.base = base
        self.a1, self.a2 = a1, a2
        self.sampler = TildeMuSampler(base, a1, a2)
        # descriptive only; X~ is not constructible from a SystemSpec
        self.spec = SystemSpec("product", left=base.spec, right=base.spec)

    def __repr__(self):
        return f"JoiningSystem({self.base!r}, a=({self.a1}, {self.a2}))"

    def states_at(self, x, ns):
        return TripleBatch(*(self.base.states_at(p, ns) for p in x))

    def _unbatch(self, batch, i):
        return tuple(self.base._unbatch(b, i) for b in batch)

    def sample(self, rng, count):
        return self.sampler.sample(rng, count)


def lift_observable(f, i):
    """``F_i(x, xi1, xi2) = f(x) f(xi_i)`` on the joining."""
    return Observable(f"F{i}[{f.name}]", lambda b: f(b.x) * f(b[i]), f.sup_bound ** 2,
                      {"kind": "lift", "i": i, "of": f.spec})


# ----------------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------------

@dataclass
class DecayReport:
    N: int
    samples: int
    averages: np.ndarray
    tail_oscillations: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def mean_abs(self):
        return float(np.mean(np.abs(self.averages)))

    @property
    def stderr(self):
        a = np.abs(self.averages)
        return float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0

    @property
    def mean_tail_oscillation(self):
        return float(np.mean(self.tail_oscillations))

    def to_dict(self):
        return {"N": self.N, "samples": self.samples, "mean_abs": self.mean_abs,
                "stderr": self.stderr, "mean_tail_oscillation": self.mean_tail_oscillation,
                "meta": self.meta}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _tail_checkpoints(N, k=21):
    return np.unique(np.linspace(N // 2, N, k).astype(np.int64))


def fourfold_terms(base, f1, f2, a1, a2, triple, N):
    x, xi1, xi2 = triple
    ns = np.arange(1, N + 1, dtype=np.int64)
    return (bilinear_terms(base, f1, f2, a1, a2, x, N)
            * f1(base.states_at(xi1, a1 * ns)) * f2(base.states_at(xi2, a2 * ns)))


def corollary_experiment(base, f1, f2, a1, a2, N, samples, rng=0):
    """Fourfold averages along ``mu~``-random points of ``X~``.

    For each sample, ``(1/N) sum_n f1(T^{a1 n} x) f2(T^{a2 n} x)
    f1(T^{a1 n} xi1) f2(T^{a2 n} xi2)`` and its tail oscillation.
    """
    _check_exponents(a1, a2)
    sampler = TildeMuSampler(base, a1, a2)
    triples = sampler.sample(rng, samples)
    cps = _tail_checkpoints(N)
    avgs = np.empty(samples)
    osc = np.empty(samples)
    for m, tr in enumerate(triples):
        terms = fourfold_terms(base, f1, f2, a1, a2, tr, N)
        prof = prefix_sums_at(terms, cps) / cps
        avgs[m] = prof[-1]
        osc[m] = prof.max() - prof.min()
    return DecayReport(int(N), int(samples), avgs, osc,
                       {"f1": f1.name, "f2": f2.name, "a": [a1, a2]})


@dataclass
class IdentityReport:
    lhs: float
    rhs: float
    rhs_stderr: float
    lhs_oscillation: float
    tol: float
    meta: dict = field(default_factory=dict)

    @property
    def diff(self):
        return abs(self.lhs - self.rhs)

    @property
    def passed(self):
        return self.diff < self.tol

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "rhs_stderr": self.rhs_stderr,
                "lhs_oscillation": self.lhs_oscillation, "diff": self.diff, "tol": self.tol,
                "passed": self.passed, "meta": self.meta}


def nu_integral(base, g1, g2, a1, a2, z, mc, rng=0):
    """Monte Carlo ``int g1 ⊗ g2 dnu_z`` and its standard error."""
    sampler = ZPrimeSampler(a1, a2, base.kronecker)
    rng = make_rng(rng)
    r_z, r_f = rng.spawn(2)
    z1, z2 = sampler.sample(r_z, mc)
    frs = r_f.spawn(2 * mc)
    z = np.atleast_1d(z)
    vals = np.empty(mc)
    zero = np.zeros(1, dtype=np.int64)
    for m in range(mc):
        if sampler.dim:
            xi1 = base.sample_fiber(wrap01(z + z1[m]), frs[2 * m])
            xi2 = base.sample_fiber(wrap01(z + z2[m]), frs[2 * m + 1])
        else:
            xi1 = base.sample_fiber(z, frs[2 * m])
            xi2 = base.sample_fiber(z, frs[2 * m + 1])
        vals[m] = g1(base.states_at(xi1, zero))[0] * g2(base.states_at(xi2, zero))[0]
    se = float(vals.std(ddof=1) / math.sqrt(mc)) if mc > 1 else 0.0
    return float(vals.mean()), se


def generic_point_check(base, g1, g2, a1, a2, x, N, mc, rng=0, tol=0.03):
    """Compare the bilinear orbit average at ``x`` with ``int g1 ⊗ g2 dnu_{pi x}``."""
    terms = bilinear_terms(base, g1, g2, a1, a2, x, N)
    cps = _tail_checkpoints(N)
    prof = prefix_sums_at(terms, cps) / cps
    rhs, se = nu_integral(base, g1, g2, a1, a2, base.project(x), mc, rng)
    return IdentityReport(float(prof[-1]), rhs, se, float(prof.max() - prof.min()), tol,
                          {"x": repr(x), "g1": g1.name, "g2": g2.name, "a": [a1, a2], "N": N,
                           "mc": mc})
