r"""Estimators for the uniformity seminorms ``U^l(X, mu, T, c)``.

The seminorms are defined recursively,

.. math::

    \|f\|_{U^1(T,c)} = \|E(f | I_{T^c})\|_{L^2}, \qquad
    \|f\|_{U^{l+1}(T,c)}^{2^{l+1}} = \limsup_H \frac{1}{2H+1}
        \sum_{|h| \le H} \|f \cdot T^h f\|_{U^l(T,c)}^{2^l},

so the shift ``c`` only enters at the bottom level. Unrolling gives the
``2^l``-th power as an average over ``(h_1, ..., h_{l-1})`` of
``||E(Delta_h f | I_{T^c})||^2`` where ``Delta_h f`` is the product of ``f``
over the corners of the cube spanned by the ``h_j``.

Three backends estimate that power:

``orbit``
    Ergodic systems only. The base level uses the mean ergodic theorem,
    ``||E(g | I_{T^c})||^2 = lim_H avg_{|k|<=H} <T^{ck} g, g>``, with the
    inner products read off a single long orbit. Error bars come from
    splitting the orbit into contiguous batches.
``monte_carlo``
    Any system with an invariant-measure sampler. The base level is the
    mean over ``x ~ mu`` of the squared ``T^c``-orbit average of ``g``.
``exact``
    Finite permutation systems. Invariant-factor projections are orbit
    averages of ``T^c`` and every Cesàro limit in ``h`` is an average over
    one period, so the result is exact up to rounding.

Outer ``h``-averages are folded onto ``h >= 0``: ``Delta`` commutes with
``T^{-h}`` and ``E(. | I_{T^c})`` commutes with ``T``, so the ``h`` and
``-h`` terms agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._numerics import blocked_lag_sums, correlate_valid
from .errors import ConfigurationError, InvariantViolation, UnsupportedError
from .observables import tensor
from .rng import make_rng
from .systems import SystemSpec, make_system

BACKENDS = ("auto", "orbit", "monte_carlo", "exact")

#: cost caps, overridable with ``force=True``
MAX_WORK = 4 * 10**9
LEVEL3_MAX_N = 10**5
LEVEL3_MAX_H = 256
EXACT_MAX_WORK = 10**8


class CostCapExceeded(ConfigurationError):
    pass


@dataclass(frozen=True)
class SeminormParams:
    """Truncation parameters.

    ``H_schedule`` has one entry per level: the outer ``h``-truncations
    first, the ``k``-truncation of the ``U^1`` correlation form last (the
    monte_carlo backend replaces that last average by a length-``N``
    orbit average and ignores it).
    """

    level: int
    c: int = 1
    H_schedule: tuple = ()
    N: int = 100_000
    M: int = 256
    backend: str = "auto"
    blocks: int = 8
    force: bool = False

    def __post_init__(self):
        if not self.H_schedule:
            object.__setattr__(self, "H_schedule", default_schedule(self.level))
        object.__setattr__(self, "H_schedule", tuple(int(h) for h in self.H_schedule))

    def validate(self):
        if not isinstance(self.level, (int, np.integer)) or self.level < 1:
            raise ConfigurationError("level must be an integer >= 1")
        if not isinstance(self.c, (int, np.integer)) or self.c == 0:
            raise ConfigurationError("c must be a non-zero integer")
        if len(self.H_schedule) != self.level:
            raise ConfigurationError(
                f"H_schedule needs {self.level} entries (one per level), got {len(self.H_schedule)}")
        if any(h < 1 for h in self.H_schedule) or self.N < 1 or self.M < 1:
            raise ConfigurationError("all truncations must be >= 1")
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        return self

    def at_level(self, level, c=None):
        """Same truncations re-shaped for another level (and optionally another c)."""
        outer = self.H_schedule[0] if self.level > 1 else default_schedule(2)[0]
        sched = (outer,) * (level - 1) + (self.H_schedule[-1],)
        return replace(self, level=level, c=self.c if c is None else c, H_schedule=sched)

    def to_dict(self):
        d = asdict(self)
        d["H_schedule"] = list(self.H_schedule)
        return d


def default_schedule(level):
    if level <= 2:
        return (256,) * (level - 1) + (1024,)
    return (32,) * (level - 1) + (256,)


@dataclass
class SeminormEstimate:
    """An estimate of ``||f||_{U^l(T,c)}`` and of its ``2^l``-th power."""

    value: float
    level: int
    c: int
    stderr: float
    power: float
    power_stderr: float
    spread: float
    backend: str
    params: SeminormParams
    clamped: bool = False
    sup_bound: float = np.inf
    extra: dict = field(default_factory=dict)

    @property
    def power_uncertainty(self):
        """Batch error and truncation spread combined, on the ``2^l``-th power."""
        return math.hypot(self.power_stderr, self.spread)

    @property
    def uncertainty(self):
        """:attr:`power_uncertainty` mapped to the seminorm scale."""
        return _root_interval(self.power, self.power_uncertainty, self.level)

    def to_dict(self):
        return {
            "level": int(self.level),
            "c": int(self.c),
            "value": float(self.value),
            "stderr": float(self.stderr),
            "power": float(self.power),
            "power_stderr": float(self.power_stderr),
            "spread": float(self.spread),
            "clamped": bool(self.clamped),
            "backend": self.backend,
            "params": self.params.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _root_interval(power, err, level):
    k = 2.0 ** -level
    hi = max(power + err, 0.0) ** k
    lo = max(power - err, 0.0) ** k
    return (hi - lo) / 2.0


def _finalize(power, power_stderr, spread, backend, params, sup_bound, extra=None):
    clamped = power < 0
    value = max(power, 0.0) ** (2.0 ** -params.level)
    stderr = _root_interval(power, power_stderr, params.level)
    return SeminormEstimate(float(value), int(params.level), int(params.c), float(stderr),
                            float(power), float(power_stderr), float(spread), backend, params,
                            clamped, float(sup_bound), dict(extra or {}))


def _fold_weight(h):
    return 1.0 if h == 0 else 2.0


def _shift_mul(w, h):
    """``w_n * w_{n+h}`` on the last axis (length shrinks by ``h``)."""
    n = w.shape[-1]
    return w[..., : n - h] * w[..., h:]


def _truncations(H):
    return sorted({max(1, H // 4), max(1, H // 2), H})


def autocorrelation_sweep(values, H, prefix_N, fft=None):
    """``gamma(h) = (1/N) sum_{n=1}^N v_n v_{n+h}`` for ``h = 0..H`` with ``N = prefix_N``.

    ``fft=None`` switches to the FFT route above a work threshold; both
    routes agree to rounding.
    """
    values = np.asarray(values, dtype=np.float64)
    if H < 0 or prefix_N < 1:
        raise ValueError("need H >= 0 and prefix_N >= 1")
    if prefix_N + H > len(values):
        raise ValueError("prefix_N + H exceeds the number of values")
    return correlate_valid(values[:prefix_N], values[: prefix_N + H], fft=fft) / prefix_N


# ----------------------------------------------------------------------------
# orbit backend
# ----------------------------------------------------------------------------

def _orbit_leaf(w, K, N, c, blocks, truncs, fft):
    """Per-block ``avg_{|k|<=H'} gamma(ck)`` for each truncation ``H'`` in ``truncs``."""
    sums, lengths = blocked_lag_sums(w, K, N, K, blocks, fft=fft)
    pooled = sums.sum(axis=0) / lengths.sum()
    # gamma(-s) is read from the shifted orbit, and must match gamma(s)
    # up to the 2|s| boundary terms
    s = np.arange(-K, K + 1)
    sup2 = float(np.max(np.abs(w))) ** 2
    gap = np.abs(pooled - pooled[::-1])
    if np.any(gap > 2 * np.abs(s) * sup2 / N + 1e-9):
        raise InvariantViolation("correlation asymmetry exceeds boundary effects")
    per_lag = sums[:, :: abs(c)] / lengths[:, None]  # lags c*k for k = -Hb..Hb
    Hb = (per_lag.shape[1] - 1) // 2
    out = []
    for Ht in truncs:
        out.append(per_lag[:, Hb - Ht : Hb + Ht + 1].mean(axis=1))
    return np.stack(out, axis=1), lengths  # (blocks, len(truncs))


def _orbit_recurse(w, outer, K, N, c, blocks, fft):
    if not outer:
        res, lengths = _orbit_leaf(w, K, N, c, blocks, (K // abs(c),), fft)
        return res[:, 0], lengths
    H = outer[0]
    acc = 0.0
    for h in range(H + 1):
        part, lengths = _orbit_recurse(_shift_mul(w, h), outer[1:], K, N, c, blocks, fft)
        acc = acc + _fold_weight(h) * part
    return acc / (2 * H + 1), lengths


def _orbit_backend(system, f, p, rng, fft=None):
    if not system.ergodic:
        raise UnsupportedError("orbit backend needs an ergodic system; use monte_carlo")
    outer, Hb = p.H_schedule[:-1], p.H_schedule[-1]
    c = int(p.c)
    K = abs(c) * Hb
    x = system.sample(make_rng(rng), 1)[0]
    ns = np.arange(-K, p.N + sum(outer) + K, dtype=np.int64)
    v = f(system.states_at(x, ns))
    if not outer:
        truncs = _truncations(Hb)
        res, lengths = _orbit_leaf(v, K, p.N, c, p.blocks, truncs, fft)
    else:
        H = outer[0]
        truncs = _truncations(H)
        partials = []
        acc = 0.0
        for h in range(H + 1):
            part, lengths = _orbit_recurse(_shift_mul(v, h), outer[1:], K, p.N, c, p.blocks, fft)
            acc = acc + _fold_weight(h) * part
            if h in truncs:
                partials.append(acc / (2 * h + 1))
        res = np.stack(partials, axis=1)
    weights = lengths / lengths.sum()
    curve = weights @ res  # pooled estimate at each truncation
    power = float(curve[-1])
    B = len(lengths)
    stderr = float(np.std(res[:, -1], ddof=1) / math.sqrt(B)) if B > 1 else 0.0
    spread = float(curve.max() - curve.min())
    return power, stderr, spread, {"x": repr(x), "truncations": truncs,
                                   "curve": [float(t) for t in curve]}


# ----------------------------------------------------------------------------
# Monte Carlo backend
# ----------------------------------------------------------------------------

def _mc_leaf(W, N, c):
    """Squared ``T^c`` orbit averages at ``N/4, N/2, N`` -> shape (M, 3)."""
    sub = W[:, : abs(c) * N : abs(c)][:, :N]
    csum = np.cumsum(sub, axis=1)
    Ns = np.array(_truncations(N))
    if len(Ns) < 3:
        Ns = np.resize(Ns, 3)
    A = csum[:, Ns - 1] / Ns
    return A * A


def _mc_recurse(W, outer, N, c):
    if not outer:
        return _mc_leaf(W, N, c)
    H = outer[0]
    acc = 0.0
    for h in range(H + 1):
        acc = acc + _fold_weight(h) * _mc_recurse(_shift_mul(W, h), outer[1:], N, c)
    return acc / (2 * H + 1)


def _mc_backend(system, f, p, rng):
    rng = make_rng(rng)
    xs = system.sample(rng, p.M)
    outer = p.H_schedule[:-1]
    c = abs(int(p.c))  # I_{T^c} = I_{T^{-c}}
    length = c * (p.N - 1) + 1 + sum(outer)
    ns = np.arange(length, dtype=np.int64)
    V = np.stack([f(system.states_at(x, ns)) for x in xs])
    curves = []
    if not outer:
        q = _mc_leaf(V, p.N, c)
    else:
        H = outer[0]
        truncs = _truncations(H)
        acc = 0.0
        for h in range(H + 1):
            acc = acc + _fold_weight(h) * _mc_recurse(_shift_mul(V, h), outer[1:], p.N, c)
            if h in truncs and h != H:
                curves.append(float((acc[:, -1] / (2 * h + 1)).mean()))
        q = acc / (2 * H + 1)
    per_sample = q[:, -1]
    power = float(per_sample.mean())
    stderr = float(per_sample.std(ddof=1) / math.sqrt(p.M)) if p.M > 1 else 0.0
    curve = curves + [float(v) for v in q.mean(axis=0)]
    spread = float(max(curve) - min(curve))
    return power, stderr, spread, {"curve": curve}


# ----------------------------------------------------------------------------
# exact backend
# ----------------------------------------------------------------------------

def _cycles(perm):
    """Cycle label of each point of a permutation, and the cycle lengths."""
    n = len(perm)
    label = np.full(n, -1)
    lengths = []
    for start in range(n):
        if label[start] >= 0:
            continue
        j, size = start, 0
        while label[j] < 0:
            label[j] = len(lengths)
            j = perm[j]
            size += 1
        lengths.append(size)
    return label, np.array(lengths)


def _perm_power(perm, k):
    out = np.arange(len(perm))
    step = perm if k > 0 else np.argsort(perm)
    for _ in range(abs(k)):
        out = step[out]
    return out


def exact_power(values, perm, prob, level, c):
    """Exact ``||g||_{U^l(T,c)}^{2^l}`` on a finite permutation system."""
    values = np.asarray(values, dtype=np.float64)
    label, _ = _cycles(_perm_power(perm, c))
    ncyc = label.max() + 1
    mass = np.bincount(label, weights=prob, minlength=ncyc)
    _, base_cycles = _cycles(perm)
    period = int(np.lcm.reduce(base_cycles))
    shifts = [_perm_power(perm, h) for h in range(period)]

    def power(g, lev):
        if lev == 1:
            cond = np.bincount(label, weights=prob * g, minlength=ncyc) / mass
            return float(np.sum(mass * cond * cond))
        return sum(power(g * g[s], lev - 1) for s in shifts) / period

    return power(values, level)


def _exact_backend(system, f, p):
    fm = system.finite_model()
    _, cyc = _cycles(fm.perm)
    period = int(np.lcm.reduce(cyc))
    if period ** (p.level - 1) * len(fm.perm) > EXACT_MAX_WORK and not p.force:
        raise CostCapExceeded("exact computation exceeds the cost cap; pass force=True")
    power = exact_power(f(fm.batch), fm.perm, fm.prob, p.level, p.c)
    return power, 0.0, 0.0, {"period": period, "states": len(fm.perm)}


# ----------------------------------------------------------------------------
# entry points
# ----------------------------------------------------------------------------

def _has_finite_model(system):
    try:
        system.finite_model()
    except UnsupportedError:
        return False
    return True


def resolve_backend(system, backend):
    if backend != "auto":
        return backend
    if _has_finite_model(system):
        return "exact"
    return "orbit" if system.ergodic else "monte_carlo"


def check_cost(p, backend):
    if p.force:
        return
    outer = p.H_schedule[:-1]
    cells = math.prod(h + 1 for h in outer)
    if backend == "orbit":
        if p.level >= 3 and (p.N > LEVEL3_MAX_N or max(p.H_schedule) > LEVEL3_MAX_H):
            raise CostCapExceeded(
                f"level-{p.level} estimates are capped at N <= {LEVEL3_MAX_N}, "
                f"H <= {LEVEL3_MAX_H}; pass force=True to override")
        work = cells * (p.N + 2 * abs(p.c) * p.H_schedule[-1])
    elif backend == "monte_carlo":
        work = cells * p.M * p.N
    else:
        return
    if work > MAX_WORK:
        raise CostCapExceeded(f"estimated work {work:.2e} exceeds cap {MAX_WORK:.0e}")


def seminorm(system, f, params, rng=0):
    """Estimate ``||f||_{U^l(X, mu, T, c)}``.

    Parameters
    ----------
    system : System
    f : Observable
    params : SeminormParams
    rng : int or numpy.random.Generator
        Seeds the start point (orbit) or the sample (monte_carlo).

    Returns
    -------
    SeminormEstimate
    """
    params.validate()
    backend = resolve_backend(system, params.backend)
    check_cost(params, backend)
    if backend == "orbit":
        out = _orbit_backend(system, f, params, rng)
    elif backend == "monte_carlo":
        out = _mc_backend(system, f, params, rng)
    elif backend == "exact":
        out = _exact_backend(system, f, params)
    else:
        raise UnsupportedError(f"backend {backend!r}")
    power, stderr, spread, extra = out
    return _finalize(power, stderr, spread, backend, params, f.sup_bound, extra)


# ----------------------------------------------------------------------------
# inequality checks
# ----------------------------------------------------------------------------

@dataclass
class InequalityReport:
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    holds: bool
    vacuous: bool = False
    details: dict = field(default_factory=dict)

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else math.inf if self.lhs > 0 else 1.0

    @property
    def slack(self):
        return self.rhs - self.lhs

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "lhs_stderr": self.lhs_stderr,
                "rhs_stderr": self.rhs_stderr, "ratio": self.ratio, "holds": self.holds,
                "vacuous": self.vacuous, "details": self.details}


def multilinear_l2(system, fs, as_, N, M, rng=0):
    """Monte Carlo ``|| (1/N) sum_{n=1}^N prod_j T^{a_j n} f_j ||_{L^2}`` and its stderr."""
    rng = make_rng(rng)
    xs = system.sample(rng, M)
    ns = np.arange(1, N + 1, dtype=np.int64)
    A = np.empty(M)
    for m, x in enumerate(xs):
        prod = np.ones(N)
        for f, a in zip(fs, as_):
            prod *= f(system.states_at(x, a * ns))
        A[m] = prod.mean()
    sq = A * A
    mean_sq = float(sq.mean())
    norm = math.sqrt(mean_sq)
    se_sq = float(sq.std(ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return norm, _root_interval(mean_sq, se_sq, 1)


def multilinear_shift(as_, i, i_prime=None):
    """The ``c`` for which ``||f_i||_{U^k(T,c)}`` controls the k-linear average."""
    if len(as_) == 1:
        return int(as_[0])
    if i_prime is None:
        i_prime = next(j for j in range(len(as_)) if j != i)
    if i_prime == i:
        raise ValueError("i_prime must differ from i")
    return int(as_[i] - as_[i_prime])


def check_multilinear_estimate(system, fs, as_, i, params, rng=0, N=10_000, M=200,
                               rhs_tol=0.02, lhs_tol=0.05, i_prime=None):
    """Compare a k-linear average with ``||f_i||_{U^k(T,c)}``.

    The implicit constant is unknown, so the report carries the ratio and
    only asserts the qualitative statement: a small right-hand side forces
    a small left-hand side.
    """
    k = len(fs)
    if k not in (1, 2, 3) or len(as_) != k:
        raise ValueError("need 1 to 3 functions with matching exponents")
    if len(set(as_)) != k or 0 in as_:
        raise ValueError("exponents must be distinct and non-zero")
    c = multilinear_shift(as_, i, i_prime)
    r1, r2 = make_rng(rng).spawn(2)
    lhs, lhs_se = multilinear_l2(system, fs, as_, N, M, r1)
    est = seminorm(system, fs[i], params.at_level(k, c), r2)
    vacuous = est.value > rhs_tol
    holds = vacuous or lhs < lhs_tol
    return InequalityReport(lhs, est.value, lhs_se, est.uncertainty, holds, vacuous,
                            {"k": k, "a": list(as_), "i": i, "c": c,
                             "rhs_tol": rhs_tol, "lhs_tol": lhs_tol})


def check_product_inequality(system_x, f, system_y, g, a, b, c, level, params, rng=0,
                             lhs_params=None, factor_estimates=None):
    r"""Check ``||f ⊗ g||_{U^l(T^a x S^b, c)} <= |ab|^{1/4} |c|^{1/2^l}
    ||f||_{U^{l+1}(T)} ||g||_{U^{l+1}(S)}``.

    The left side is estimated on the product system (Monte Carlo unless
    ``lhs_params`` says otherwise), the right side from the two factors.
    The factor norms do not depend on ``a, b, c``; a sweep over those can
    pass them once as ``factor_estimates = (f_est, g_est)`` at level ``l + 1``.
    """
    if level not in (1, 2):
        raise ValueError("level must be 1 or 2")
    if 0 in (a, b, c):
        raise ValueError("a, b, c must be non-zero")
    spec = SystemSpec.product(SystemSpec.power(system_x.spec, a), SystemSpec.power(system_y.spec, b))
    prod = make_system(spec)
    if lhs_params is None:
        lhs_params = replace(params.at_level(level, c), backend="monte_carlo")
    else:
        lhs_params = lhs_params.at_level(level, c)
    r1, r2, r3 = make_rng(rng).spawn(3)
    lhs = seminorm(prod, tensor(f, g), lhs_params, r1)
    if factor_estimates is None:
        ef = seminorm(system_x, f, params.at_level(level + 1, 1), r2)
        eg = seminorm(system_y, g, params.at_level(level + 1, 1), r3)
    else:
        ef, eg = factor_estimates
        if ef.level != level + 1 or eg.level != level + 1 or ef.c != 1 or eg.c != 1:
            raise ValueError("factor estimates must be U^(l+1) norms with c = 1")
    const = abs(a * b) ** 0.25 * abs(c) ** (2.0 ** -level)
    rhs = const * ef.value * eg.value
    rhs_hi = const * (ef.value + ef.uncertainty) * (eg.value + eg.uncertainty)
    rhs_err = rhs_hi - rhs
    tol = 3.0 * math.hypot(lhs.uncertainty, rhs_err)
    return InequalityReport(lhs.value, rhs, lhs.uncertainty, rhs_err, lhs.value <= rhs + tol,
                            False, {"a": a, "b": b, "c": c, "level": level, "constant": const,
                                    "f_norm": ef.value, "g_norm": eg.value, "tolerance": tol})


def union_components_power(components, weights, fs, params, rng=0):
    """Weighted sum of component ``2^l``-th powers (the non-ergodic disintegration)."""
    rngs = make_rng(rng).spawn(len(components))
    ests = [seminorm(s, f, params, r) for s, f, r in zip(components, fs, rngs)]
    total = sum(w * e.power for w, e in zip(weights, ests))
    err = math.sqrt(sum((w * e.power_uncertainty) ** 2 for w, e in zip(weights, ests)))
    return total, err, ests
