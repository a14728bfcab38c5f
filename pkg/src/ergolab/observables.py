"""Bounded observables on the system zoo.

An :class:`Observable` wraps a vectorised rule acting on the batches that
:meth:`System.states_at` returns, together with a declared sup bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .systems import PairBatch, SymbolView, UnionBatch


@dataclass(frozen=True)
class Observable:
    name: str
    rule: Callable
    sup_bound: float
    spec: dict | None = None

    def __call__(self, batch):
        return np.asarray(self.rule(batch), dtype=np.float64)

    def __mul__(self, other):
        return pointwise_product(self, other)


def _torus(batch):
    if isinstance(batch, (SymbolView, PairBatch, UnionBatch)):
        raise TypeError("torus observable applied to a non-torus batch")
    batch = np.asarray(batch, dtype=np.float64)
    # a bare vector is read as points of the circle
    return batch[:, None] if batch.ndim == 1 else batch


def _length(batch):
    if isinstance(batch, PairBatch):
        return _length(batch.left)
    if isinstance(batch, UnionBatch):
        return _length(batch.batch)
    return len(batch)


def constant(value=1.0):
    v = float(value)
    return Observable(f"const({v:g})", lambda b: np.full(_length(b), v), abs(v),
                      {"kind": "constant", "value": v})


def zero():
    return constant(0.0)


def coordinate(coord=0):
    """The ``coord``-th torus coordinate, a number in [0, 1)."""
    return Observable(f"x[{coord}]", lambda b: _torus(b)[:, coord], 1.0,
                      {"kind": "coordinate", "coord": coord})


def cos_char(k=1, coord=0, amplitude=1.0):
    """``amplitude * cos(2 pi k x_coord)``."""
    return Observable(f"cos(2pi*{k}*x[{coord}])",
                      lambda b: amplitude * np.cos(2 * np.pi * k * _torus(b)[:, coord]),
                      abs(amplitude), {"kind": "cos", "k": k, "coord": coord, "amplitude": amplitude})


def sin_char(k=1, coord=0, amplitude=1.0):
    return Observable(f"sin(2pi*{k}*x[{coord}])",
                      lambda b: amplitude * np.sin(2 * np.pi * k * _torus(b)[:, coord]),
                      abs(amplitude), {"kind": "sin", "k": k, "coord": coord, "amplitude": amplitude})


def symbol(k=0, sup_bound=1.0):
    """The ``k``-th coordinate of a bernoulli sequence."""
    return Observable(f"sym[{k}]", lambda b: b.coord(k), sup_bound,
                      {"kind": "symbol", "k": k, "sup_bound": sup_bound})


def residue_table(values):
    """``f(j) = values[j mod len(values)]`` on a cyclic system."""
    table = np.asarray(values, dtype=np.float64)
    return Observable(f"table{list(np.round(table, 6))}",
                      lambda b: table[np.mod(np.asarray(b), len(table))],
                      float(np.abs(table).max()) if len(table) else 0.0,
                      {"kind": "table", "values": [float(v) for v in table]})


def residue(q):
    """``f(j) = j`` on Z/q."""
    return Observable("j", lambda b: np.asarray(b, dtype=np.float64), float(q - 1),
                      {"kind": "residue", "q": q})


def indicator(j):
    return Observable(f"1[{j}]", lambda b: (np.asarray(b) == j).astype(np.float64), 1.0,
                      {"kind": "indicator", "j": j})


def tensor(f, g):
    """``(f ⊗ g)(x, y) = f(x) g(y)`` on a product system."""
    return Observable(f"({f.name})⊗({g.name})", lambda b: f(b.left) * g(b.right),
                      f.sup_bound * g.sup_bound, {"kind": "tensor", "left": f.spec, "right": g.spec})


def left(f):
    return Observable(f"left({f.name})", lambda b: f(b.left), f.sup_bound,
                      {"kind": "left", "of": f.spec})


def right(f):
    return Observable(f"right({f.name})", lambda b: f(b.right), f.sup_bound,
                      {"kind": "right", "of": f.spec})


def pointwise_product(f, g):
    return Observable(f"({f.name})*({g.name})", lambda b: f(b) * g(b),
                      f.sup_bound * g.sup_bound, {"kind": "product", "factors": [f.spec, g.spec]})


def union_observable(parts):
    """Use ``parts[i]`` on the ``i``-th component of a union system."""
    parts = list(parts)
    return Observable("union(" + ", ".join(p.name for p in parts) + ")",
                      lambda b: parts[b.component](b.batch),
                      max(p.sup_bound for p in parts),
                      {"kind": "union", "parts": [p.spec for p in parts]})


def spot_check_bound(f, batch, slack=1e-12):
    """True if ``|f| <= sup_bound`` on every point of ``batch``."""
    return bool(np.all(np.abs(f(batch)) <= f.sup_bound + slack))


_BUILDERS = {
    "constant": (constant, {"value"}),
    "zero": (zero, set()),
    "coordinate": (coordinate, {"coord"}),
    "cos": (cos_char, {"k", "coord", "amplitude"}),
    "sin": (sin_char, {"k", "coord", "amplitude"}),
    "symbol": (symbol, {"k", "sup_bound"}),
    "table": (residue_table, {"values"}),
    "residue": (residue, {"q"}),
    "indicator": (indicator, {"j"}),
}


def from_dict(d):
    """Build an observable from its config-table form."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigurationError("observable spec must be a table with a 'kind' key")
    kind = d["kind"]
    if kind in ("tensor",):
        _reject_extra(d, {"left", "right"}, kind)
        return tensor(from_dict(d["left"]), from_dict(d["right"]))
    if kind in ("left", "right"):
        _reject_extra(d, {"of"}, kind)
        return (left if kind == "left" else right)(from_dict(d["of"]))
    if kind == "product":
        _reject_extra(d, {"factors"}, kind)
        fs = [from_dict(x) for x in d["factors"]]
        out = fs[0]
        for f in fs[1:]:
            out = pointwise_product(out, f)
        return out
    if kind == "union":
        _reject_extra(d, {"parts"}, kind)
        return union_observable([from_dict(x) for x in d["parts"]])
    if kind not in _BUILDERS:
        raise ConfigurationError(f"unknown observable kind {kind!r}")
    builder, allowed = _BUILDERS[kind]
    _reject_extra(d, allowed, kind)
    return builder(**{k: v for k, v in d.items() if k != "kind"})


def _reject_extra(d, allowed, kind):
    extra = set(d) - set(allowed) - {"kind"}
    if extra:
        raise ConfigurationError(f"unknown key {sorted(extra)[0]!r} in {kind} observable")
