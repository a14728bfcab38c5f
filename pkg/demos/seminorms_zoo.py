"""Uniformity seminorms across the system zoo.

A rotation has a Kronecker factor that sees ``cos(2 pi x)``, so its
``U^2`` seminorm is far from zero: ``||cos||_{U^2}^4 = 1/8``. A Bernoulli
shift is weakly mixing, so the same seminorm of the coordinate symbol
vanishes in the limit; at finite ``H`` the ``h = 0`` term leaves a bias of
order ``H^{-1/4}``. Finite systems are computed exactly.

Run: ``python3 demos/seminorms_zoo.py``
"""

from ergolab import observables as O
from ergolab.seminorms import SeminormParams, seminorm
from ergolab.systems import SystemSpec, make_system

cases = [
    ("rotation sqrt2-1, cos", SystemSpec.rotation("sqrt2-1"), O.cos_char(), 1000),
    ("bernoulli, symbol", SystemSpec.bernoulli(), O.symbol(), 1000),
    ("cyclic q=4, table", SystemSpec.cyclic(4), O.residue_table([1.0, 0.0, -1.0, 0.0]), 16),
]

print(f"{'case':28s} {'level':>5s} {'value':>9s} {'+/-':>9s} backend")
for name, spec, f, H in cases:
    system = make_system(spec)
    for level in (1, 2):
        p = SeminormParams(level=level, H_schedule=(H,) * level, N=50_000)
        est = seminorm(system, f, p, rng=0)
        print(f"{name:28s} {level:5d} {est.value:9.5f} {est.uncertainty:9.5f} {est.backend}")

print(f"\nexact rotation value at level 2: {8 ** -0.25:.5f}")
