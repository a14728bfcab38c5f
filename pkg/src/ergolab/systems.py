"""A zoo of concrete invertible measure-preserving systems.

Each system exposes vectorised orbit evaluation (``states_at``), single
steps in both directions, a sampler for its invariant measure, and, where
one is declared, the projection onto its Kronecker factor together with a
sampler for the fibres of the corresponding disintegration.

State conventions
-----------------
rotation            float in [0, 1)
torus_rotation      tuple of floats in [0, 1)
skew_product        tuple ``(x, y)``
bernoulli           :class:`BernoulliState` ``(key, offset)``
cyclic              int in ``range(q)``
product             tuple ``(left_state, right_state)``
power               state of the base system
union               :class:`UnionState` ``(component, state)``

Batches returned by ``states_at`` are what observables consume: torus-like
systems give ``(len(ns), d)`` float arrays, cyclic systems int arrays,
bernoulli systems a :class:`SymbolView`, products a :class:`PairBatch`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from ._numerics import frac_mul, hash_uniform, mul_int_mod1, wrap01
from .errors import ConfigurationError, UnsupportedError
from .rng import make_rng


# ----------------------------------------------------------------------------
# rotation numbers
# ----------------------------------------------------------------------------

def _dd_from_decimal(d):
    hi = float(d)
    lo = float(d - Decimal(hi))
    return hi, lo


getcontext().prec = 60
_NAMED_ALPHAS = {
    "sqrt2-1": _dd_from_decimal(Decimal(2).sqrt() - 1),
    "golden": _dd_from_decimal((Decimal(5).sqrt() - 1) / 2),
}


@dataclass(frozen=True)
class Alpha:
    """A rotation number stored as a double-double ``hi + lo`` in [0, 1)."""

    hi: float
    lo: float = 0.0
    name: str | None = None

    @classmethod
    def parse(cls, value):
        if isinstance(value, Alpha):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in _NAMED_ALPHAS:
                hi, lo = _NAMED_ALPHAS[key]
                return cls(hi, lo, key)
            try:
                frac = Fraction(key)
            except ValueError:
                raise ConfigurationError(f"cannot parse rotation number {value!r}") from None
            frac -= math.floor(frac)
            hi, lo = _dd_from_decimal(Decimal(frac.numerator) / Decimal(frac.denominator))
            return cls(hi, lo, value)
        if isinstance(value, (int, float, np.floating, np.integer)):
            v = float(value)
            if not math.isfinite(v):
                raise ConfigurationError("rotation number must be finite")
            return cls(float(wrap01(v)), 0.0)
        raise ConfigurationError(f"cannot parse rotation number {value!r}")

    @property
    def value(self):
        return self.hi + self.lo

    def times(self, k):
        """``frac(k * alpha)`` as a new :class:`Alpha` (low part folded in)."""
        return Alpha(float(frac_mul(k, self.hi, self.lo)), 0.0)

    def looks_rational(self, max_den=10**4, tol=1e-12):
        frac = Fraction(self.hi).limit_denominator(max_den)
        return abs(float(frac) - self.value) < tol

    def to_json(self):
        return self.name if self.name is not None else self.hi


SQRT2_MINUS_1 = Alpha.parse("sqrt2-1")
GOLDEN = Alpha.parse("golden")


# ----------------------------------------------------------------------------
# specs
# ----------------------------------------------------------------------------

KINDS = ("rotation", "torus_rotation", "skew_product", "bernoulli", "cyclic",
         "product", "power", "union")


@dataclass(frozen=True)
class SystemSpec:
    """Declarative description of a system; see :func:`make_system`."""

    kind: str
    alpha: Alpha | None = None
    alphas: tuple = ()
    symbol_values: tuple = ()
    probs: tuple = ()
    q: int | None = None
    left: SystemSpec | None = None
    right: SystemSpec | None = None
    base: SystemSpec | None = None
    c: int | None = None
    components: tuple = ()
    weights: tuple = ()
    ergodic: bool | None = None

    # constructors -----------------------------------------------------------
    @classmethod
    def rotation(cls, alpha=SQRT2_MINUS_1):
        return cls("rotation", alpha=Alpha.parse(alpha))

    @classmethod
    def torus_rotation(cls, alphas):
        return cls("torus_rotation", alphas=tuple(Alpha.parse(a) for a in alphas))

    @classmethod
    def skew_product(cls, alpha=SQRT2_MINUS_1):
        return cls("skew_product", alpha=Alpha.parse(alpha))

    @classmethod
    def bernoulli(cls, symbol_values=(-1.0, 1.0), probs=(0.5, 0.5)):
        return cls("bernoulli", symbol_values=tuple(float(v) for v in symbol_values),
                   probs=tuple(float(p) for p in probs))

    @classmethod
    def cyclic(cls, q):
        return cls("cyclic", q=q)

    @classmethod
    def product(cls, left, right, ergodic=None):
        return cls("product", left=left, right=right, ergodic=ergodic)

    @classmethod
    def power(cls, base, c):
        return cls("power", base=base, c=c)

    @classmethod
    def union(cls, components, weights):
        return cls("union", components=tuple(components),
                   weights=tuple(float(w) for w in weights))

    # validation -------------------------------------------------------------
    def validate(self):
        k = self.kind
        if k not in KINDS:
            raise ConfigurationError(f"unknown system kind {k!r}")
        if k in ("rotation", "skew_product") and self.alpha is None:
            raise ConfigurationError(f"{k} needs alpha")
        if k == "torus_rotation" and not self.alphas:
            raise ConfigurationError("torus_rotation needs a non-empty alphas list")
        if k == "bernoulli":
            if len(self.symbol_values) == 0 or len(self.symbol_values) != len(self.probs):
                raise ConfigurationError("bernoulli needs matching symbol_values and probs")
            if any(p < 0 for p in self.probs) or abs(math.fsum(self.probs) - 1.0) > 1e-12:
                raise ConfigurationError("bernoulli probs must be non-negative and sum to 1")
        if k == "cyclic":
            if not isinstance(self.q, (int, np.integer)) or self.q < 1:
                raise ConfigurationError("cyclic needs an integer q >= 1")
        if k == "product":
            if self.left is None or self.right is None:
                raise ConfigurationError("product needs left and right")
            self.left.validate()
            self.right.validate()
        if k == "power":
            if self.base is None:
                raise ConfigurationError("power needs a base system")
            if not isinstance(self.c, (int, np.integer)) or self.c == 0:
                raise ConfigurationError("power exponent must be a non-zero integer")
            self.base.validate()
        if k == "union":
            if not self.components or len(self.components) != len(self.weights):
                raise ConfigurationError("union needs matching components and weights")
            if any(w <= 0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
                raise ConfigurationError("union weights must be positive and sum to 1")
            for comp in self.components:
                comp.validate()
        return self

    # (de)serialisation ------------------------------------------------------
    _FIELDS = {
        "rotation": {"alpha"},
        "torus_rotation": {"alphas"},
        "skew_product": {"alpha"},
        "bernoulli": {"symbol_values", "probs"},
        "cyclic": {"q"},
        "product": {"left", "right", "ergodic"},
        "power": {"base", "c"},
        "union": {"components", "weights"},
    }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError(f"system spec must be a table, got {type(d).__name__}")
        kind = d.get("kind")
        if kind not in cls._FIELDS:
            raise ConfigurationError(f"unknown system kind {kind!r}")
        extra = set(d) - cls._FIELDS[kind] - {"kind"}
        if extra:
            raise ConfigurationError(f"unknown key {sorted(extra)[0]!r} in {kind} system spec")
        if kind == "rotation":
            spec = cls.rotation(d.get("alpha", "sqrt2-1"))
        elif kind == "skew_product":
            spec = cls.skew_product(d.get("alpha", "sqrt2-1"))
        elif kind == "torus_rotation":
            spec = cls.torus_rotation(d.get("alphas", ["sqrt2-1", "golden"]))
        elif kind == "bernoulli":
            spec = cls.bernoulli(d.get("symbol_values", (-1.0, 1.0)), d.get("probs", (0.5, 0.5)))
        elif kind == "cyclic":
            spec = cls.cyclic(d.get("q"))
        elif kind == "product":
            spec = cls.product(cls.from_dict(d.get("left")), cls.from_dict(d.get("right")),
                               d.get("ergodic"))
        elif kind == "power":
            spec = cls.power(cls.from_dict(d.get("base")), d.get("c"))
        else:
            spec = cls.union([cls.from_dict(c) for c in d.get("components", [])],
                             d.get("weights", []))
        return spec.validate()

    def to_dict(self):
        k = self.kind
        if k in ("rotation", "skew_product"):
            return {"kind": k, "alpha": self.alpha.to_json()}
        if k == "torus_rotation":
            return {"kind": k, "alphas": [a.to_json() for a in self.alphas]}
        if k == "bernoulli":
            return {"kind": k, "symbol_values": list(self.symbol_values), "probs": list(self.probs)}
        if k == "cyclic":
            return {"kind": k, "q": int(self.q)}
        if k == "product":
            out = {"kind": k, "left": self.left.to_dict(), "right": self.right.to_dict()}
            if self.ergodic is not None:
                out["ergodic"] = self.ergodic
            return out
        if k == "power":
            return {"kind": k, "base": self.base.to_dict(), "c": int(self.c)}
        return {"kind": k, "components": [c.to_dict() for c in self.components],
                "weights": list(self.weights)}


# ----------------------------------------------------------------------------
# states, batches, Kronecker factors
# ----------------------------------------------------------------------------

class BernoulliState(NamedTuple):
    key: int
    offset: int


class UnionState(NamedTuple):
    component: int
    state: object


class PairBatch(NamedTuple):
    left: object
    right: object


class UnionBatch(NamedTuple):
    component: int
    batch: object


@dataclass(frozen=True)
class SymbolView:
    """Lazy window onto bernoulli sequences: ``coord(k)[i]`` is ``x_k`` of the i-th point."""

    system: "BernoulliShift"
    keys: np.ndarray
    positions: np.ndarray

    def coord(self, k=0):
        return self.system.symbols(self.keys, self.positions + k)

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True)
class KroneckerFactor:
    """Declared Kronecker factor.

    ``kind`` is ``"torus"`` (rotation by ``alphas`` on T^d), ``"cyclic"``
    (translation by one on Z/q) or ``"trivial"`` (one point). Points are
    float arrays of shape ``(d,)``, ints, or the empty array respectively.
    """

    kind: str
    alphas: tuple = ()
    q: int | None = None

    @property
    def dim(self):
        return len(self.alphas)


TRIVIAL_POINT = np.zeros(0)


@dataclass(frozen=True)
class FiniteModel:
    """Finite permutation model of a system: states, the map, and the measure."""

    batch: object
    perm: np.ndarray
    prob: np.ndarray


# ----------------------------------------------------------------------------
# systems
# ----------------------------------------------------------------------------

class System:
    """Base class. Subclasses are immutable after construction."""

    invertible = True
    ergodic = True
    kronecker: KroneckerFactor | None = None

    def __init__(self, spec):
        self.spec = spec

    def __repr__(self):
        return f"{type(self).__name__}({self.spec.to_dict()})"

    # orbit machinery --------------------------------------------------------
    def states_at(self, x, ns):
        raise NotImplementedError

    def state_at(self, x, n):
        return self._unbatch(self.states_at(x, np.array([n], dtype=np.int64)), 0)

    def step(self, x):
        return self.state_at(x, 1)

    def step_inv(self, x):
        return self.state_at(x, -1)

    def _unbatch(self, batch, i):
        raise NotImplementedError

    # measure ----------------------------------------------------------------
    def sample(self, rng, count):
        raise NotImplementedError

    def project(self, x):
        raise UnsupportedError(f"{type(self).__name__} has no declared Kronecker factor")

    def sample_fiber(self, z, rng):
        raise UnsupportedError(f"{type(self).__name__} has no declared disintegration")

    def finite_model(self):
        raise UnsupportedError(f"{type(self).__name__} is not a finite system")


class TorusRotation(System):
    """``x -> x + alpha`` on T^d. ``d == 1`` is the circle rotation."""

    def __init__(self, spec):
        super().__init__(spec)
        self.alphas = (spec.alpha,) if spec.kind == "rotation" else tuple(spec.alphas)
        self.dim = len(self.alphas)
        self.kronecker = KroneckerFactor("torus", self.alphas)

    def _coords(self, x):
        return np.atleast_1d(np.asarray(x, dtype=np.float64))

    def states_at(self, x, ns):
        ns = np.asarray(ns, dtype=np.int64)
        x = self._coords(x)
        out = np.empty((len(ns), self.dim))
        for j, a in enumerate(self.alphas):
            out[:, j] = wrap01(x[j] + frac_mul(ns, a.hi, a.lo))
        return out

    def _unbatch(self, batch, i):
        row = batch[i]
        return float(row[0]) if self.spec.kind == "rotation" else tuple(float(v) for v in row)

    def sample(self, rng, count):
        u = make_rng(rng).random((count, self.dim))
        return [self._unbatch(u, i) for i in range(count)]

    def project(self, x):
        return self._coords(x).copy()

    def sample_fiber(self, z, rng):
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        return self._unbatch(wrap01(z)[None, :], 0)


class SkewProduct(System):
    """Anzai skew product ``(x, y) -> (x + alpha, y + x)`` on T^2.

    Closed form: ``T^n(x, y) = (x + n alpha, y + n x + n(n-1)/2 alpha)``,
    valid for every integer ``n``. Kronecker factor: the first coordinate.
    """

    MAX_INDEX = 10**8  # keeps n(n-1)/2 below 2**53

    def __init__(self, spec):
        super().__init__(spec)
        self.alpha = spec.alpha
        self.kronecker = KroneckerFactor("torus", (self.alpha,))

    def states_at(self, x, ns):
        ns = np.asarray(ns, dtype=np.int64)
        if len(ns) and np.abs(ns).max() > self.MAX_INDEX:
            raise UnsupportedError("skew product orbit index too large for exact arithmetic")
        x0, y0 = float(x[0]), float(x[1])
        a = self.alpha
        tri = ns * (ns - 1) // 2
        out = np.empty((len(ns), 2))
        out[:, 0] = wrap01(x0 + frac_mul(ns, a.hi, a.lo))
        out[:, 1] = wrap01(y0 + mul_int_mod1(ns, x0) + frac_mul(tri, a.hi, a.lo))
        return out

    def _unbatch(self, batch, i):
        return (float(batch[i, 0]), float(batch[i, 1]))

    def sample(self, rng, count):
        u = make_rng(rng).random((count, 2))
        return [self._unbatch(u, i) for i in range(count)]

    def project(self, x):
        return np.array([float(x[0])])

    def sample_fiber(self, z, rng):
        z = float(np.atleast_1d(z)[0])
        return (float(wrap01(z)), float(make_rng(rng).random()))


class BernoulliShift(System):
    """Two-sided shift on i.i.d. symbols.

    A state ``(key, offset)`` stands for the sequence ``n -> s(key, offset + n)``
    where ``s`` is a counter-based hash oracle, so ``T^n x`` is available for
    every ``n`` without materialising anything. Weakly mixing, hence the
    Kronecker factor is trivial.
    """

    def __init__(self, spec):
        super().__init__(spec)
        self.values = np.asarray(spec.symbol_values, dtype=np.float64)
        self.cum = np.cumsum(spec.probs)
        self.cum[-1] = 1.0
        self.kronecker = KroneckerFactor("trivial")

    def symbols(self, keys, positions):
        keys = np.broadcast_to(np.asarray(keys, dtype=np.uint64), np.shape(positions))
        u = np.empty(np.shape(positions))
        for key in np.unique(keys):
            sel = keys == key
            u[sel] = hash_uniform(key, np.asarray(positions)[sel])
        idx = np.searchsorted(self.cum, u, side="right")
        return self.values[np.minimum(idx, len(self.values) - 1)]

    def states_at(self, x, ns):
        ns = np.asarray(ns, dtype=np.int64)
        key = np.uint64(x.key)
        return SymbolView(self, np.full(len(ns), key, dtype=np.uint64), x.offset + ns)

    def _unbatch(self, batch, i):
        return BernoulliState(int(batch.keys[i]), int(batch.positions[i]))

    def sample(self, rng, count):
        keys = make_rng(rng).integers(0, 2**64, size=count, dtype=np.uint64)
        return [BernoulliState(int(k), 0) for k in keys]

    def project(self, x):
        return TRIVIAL_POINT

    def sample_fiber(self, z, rng):
        return self.sample(rng, 1)[0]


class Cyclic(System):
    """``j -> j + 1 mod q`` with uniform measure."""

    def __init__(self, spec):
        super().__init__(spec)
        self.q = int(spec.q)
        self.kronecker = KroneckerFactor("cyclic", q=self.q)

    def states_at(self, x, ns):
        return np.mod(int(x) + np.asarray(ns, dtype=np.int64), self.q)

    def _unbatch(self, batch, i):
        return int(batch[i])

    def sample(self, rng, count):
        return [int(j) for j in make_rng(rng).integers(0, self.q, size=count)]

    def project(self, x):
        return int(x) % self.q

    def sample_fiber(self, z, rng):
        return int(z) % self.q

    def finite_model(self):
        q = self.q
        return FiniteModel(np.arange(q), (np.arange(q) + 1) % q, np.full(q, 1.0 / q))


class Power(System):
    """``T^c`` for a base system ``T``; one step is ``c`` base steps."""

    def __init__(self, spec):
        super().__init__(spec)
        self.base = make_system(spec.base)
        self.c = int(spec.c)
        b = self.base
        if isinstance(b, Cyclic):
            self.ergodic = math.gcd(self.c, b.q) == 1
        else:
            self.ergodic = b.ergodic and not isinstance(b, Union)
        kr = b.kronecker
        if kr is not None and kr.kind == "torus":
            self.kronecker = KroneckerFactor("torus", tuple(a.times(self.c) for a in kr.alphas))
        else:
            self.kronecker = kr

    def states_at(self, x, ns):
        return self.base.states_at(x, self.c * np.asarray(ns, dtype=np.int64))

    def _unbatch(self, batch, i):
        return self.base._unbatch(batch, i)

    def sample(self, rng, count):
        return self.base.sample(rng, count)

    def project(self, x):
        return self.base.project(x)

    def sample_fiber(self, z, rng):
        return self.base.sample_fiber(z, rng)

    def finite_model(self):
        fm = self.base.finite_model()
        perm = np.arange(len(fm.perm))
        step = fm.perm if self.c > 0 else np.argsort(fm.perm)
        for _ in range(abs(self.c)):
            perm = step[perm]
        return FiniteModel(fm.batch, perm, fm.prob)


class Product(System):
    """``T x S`` with the product measure."""

    def __init__(self, spec):
        super().__init__(spec)
        self.left = make_system(spec.left)
        self.right = make_system(spec.right)
        # ergodicity of a product is a property of both spectra; only declared
        self.ergodic = bool(spec.ergodic)
        kl, kr = self.left.kronecker, self.right.kronecker
        if kl is not None and kr is not None:
            if kl.kind == "torus" and kr.kind == "torus":
                self.kronecker = KroneckerFactor("torus", kl.alphas + kr.alphas)
            elif kl.kind == "trivial" and kr.kind in ("torus", "trivial"):
                self.kronecker = kr
            elif kr.kind == "trivial" and kl.kind == "torus":
                self.kronecker = kl

    def states_at(self, x, ns):
        return PairBatch(self.left.states_at(x[0], ns), self.right.states_at(x[1], ns))

    def _unbatch(self, batch, i):
        return (self.left._unbatch(batch.left, i), self.right._unbatch(batch.right, i))

    def sample(self, rng, count):
        rl, rr = make_rng(rng).spawn(2)
        return list(zip(self.left.sample(rl, count), self.right.sample(rr, count)))

    def _split_point(self, z):
        kl = self.left.kronecker
        dl = kl.dim if kl.kind == "torus" else 0
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        return z[:dl], z[dl:]

    def project(self, x):
        if self.kronecker is None:
            return super().project(x)
        parts = [np.atleast_1d(self.left.project(x[0])), np.atleast_1d(self.right.project(x[1]))]
        return np.concatenate(parts).astype(np.float64)

    def sample_fiber(self, z, rng):
        if self.kronecker is None:
            return super().sample_fiber(z, rng)
        zl, zr = self._split_point(z)
        rl, rr = make_rng(rng).spawn(2)
        return (self.left.sample_fiber(zl, rl), self.right.sample_fiber(zr, rr))

    def finite_model(self):
        fl, fr = self.left.finite_model(), self.right.finite_model()
        nl, nr = len(fl.perm), len(fr.perm)
        il, ir = np.divmod(np.arange(nl * nr), nr)
        batch = PairBatch(_take(fl.batch, il), _take(fr.batch, ir))
        perm = fl.perm[il] * nr + fr.perm[ir]
        return FiniteModel(batch, perm, fl.prob[il] * fr.prob[ir])


class Union(System):
    """Disjoint union of systems with mixing weights (never ergodic)."""

    ergodic = False

    def __init__(self, spec):
        super().__init__(spec)
        self.components = [make_system(c) for c in spec.components]
        self.weights = np.asarray(spec.weights, dtype=np.float64)

    def states_at(self, x, ns):
        i, sub = x
        return UnionBatch(int(i), self.components[int(i)].states_at(sub, ns))

    def _unbatch(self, batch, i):
        return UnionState(batch.component, self.components[batch.component]._unbatch(batch.batch, i))

    def sample(self, rng, count):
        rng = make_rng(rng)
        which = rng.choice(len(self.components), size=count, p=self.weights)
        children = rng.spawn(len(self.components))
        pools = [comp.sample(children[j], int((which == j).sum()))
                 for j, comp in enumerate(self.components)]
        cursor = [0] * len(self.components)
        out = []
        for j in which:
            out.append(UnionState(int(j), pools[j][cursor[j]]))
            cursor[j] += 1
        return out


def _take(batch, idx):
    if isinstance(batch, PairBatch):
        return PairBatch(_take(batch.left, idx), _take(batch.right, idx))
    return np.asarray(batch)[idx]


_CLASSES = {
    "rotation": TorusRotation,
    "torus_rotation": TorusRotation,
    "skew_product": SkewProduct,
    "bernoulli": BernoulliShift,
    "cyclic": Cyclic,
    "product": Product,
    "power": Power,
    "union": Union,
}


def make_system(spec):
    """Build a :class:`System` from a :class:`SystemSpec` (or its dict form)."""
    if isinstance(spec, dict):
        spec = SystemSpec.from_dict(spec)
    spec.validate()
    return _CLASSES[spec.kind](spec)


# ----------------------------------------------------------------------------
# module-level operations
# ----------------------------------------------------------------------------

@dataclass
class OrbitBuffer:
    """``values[k] = f(T^(n_lo + k) x)``."""

    n_lo: int
    n_hi: int
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, n):
        return self.values[n - self.n_lo]


def orbit(system, x, n_lo, n_hi, f):
    """Evaluate ``f`` along the orbit segment ``T^n x``, ``n_lo <= n <= n_hi``."""
    if n_lo > n_hi:
        raise ValueError("need n_lo <= n_hi")
    if n_lo < 0 and not system.invertible:
        raise UnsupportedError("negative orbit index on a non-invertible system")
    ns = np.arange(n_lo, n_hi + 1, dtype=np.int64)
    values = f(system.states_at(x, ns))
    return OrbitBuffer(int(n_lo), int(n_hi), values,
                       {"system": system.spec.to_dict(), "observable": f.name, "x": x})


def sample_invariant(system, rng, count):
    """``count`` i.i.d. draws from the invariant measure."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return system.sample(rng, count)


def kronecker_project(system, x):
    return system.project(x)


def sample_fiber(system, z, rng):
    """One draw from the fibre measure over the Kronecker point ``z``."""
    return system.sample_fiber(z, rng)
