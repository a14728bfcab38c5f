"""Weighted averages along a criterion-passing weight.

With the Bernoulli weight from ``orthogonality_criterion.py``, averages
``(1/N) sum_n c_n g(S^n y)`` are computed over several target systems and
starting points. Each profile settles; its oscillation over
``[N/2, N]`` is printed next to the final value.

Run: ``python3 demos/weighted_averages.py``
"""

from ergolab import observables as O
from ergolab.averages import default_checkpoints, weighted_average
from ergolab.criterion import make_weight
from ergolab.systems import SystemSpec, make_system

N = 50_000
bern = make_system(SystemSpec.bernoulli())
weight = make_weight(bern, O.symbol(), O.symbol(), 1, 2, bern.sample(7, 1)[0], N)
cps = default_checkpoints(N)

targets = [("rotation golden", SystemSpec.rotation("golden"), O.sin_char()),
           ("skew product", SystemSpec.skew_product("sqrt2-1"), O.cos_char(coord=1)),
           ("cyclic q=4", SystemSpec.cyclic(4), O.residue_table([1.0, 0.0, -1.0, 0.0]))]
for name, spec, g in targets:
    system = make_system(spec)
    for y in system.sample(3, 3):
        prof = weighted_average(weight, system, g, y, cps)
        print(f"{name:16s} final={prof.final:+.4f} oscillation={prof.oscillation:.4f}")
