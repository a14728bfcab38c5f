"""Samplers for the three-fold joining and the experiments built on them."""

import math

import numpy as np
import pytest
from scipy import stats

from ergolab import observables as O
from ergolab.errors import UnsupportedError
from ergolab.extension import (JoiningSystem, TildeMuSampler, ZPrimeSampler,
                               corollary_experiment, generic_point_check, lift_observable,
                               nu_integral, sample_tilde_mu, sample_zprime)
from ergolab.seminorms import SeminormParams, seminorm
from ergolab.systems import SystemSpec, make_system

ROT = make_system(SystemSpec.rotation("sqrt2-1"))
SKEW = make_system(SystemSpec.skew_product("golden"))
BERN = make_system(SystemSpec.bernoulli())
ZERO = O.zero()


def _circ(d):
    d = np.asarray(d) % 1.0
    return np.minimum(d, 1.0 - d)


# ----------------------------------------------------------------------------
# Z'
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("a,ann", [((1, 2), (2, -1)), ((2, 4), (2, -1)), ((3, -2), (-2, -3))])
def test_zprime_annihilator(a, ann):
    s = ZPrimeSampler(*a, ROT.kronecker)
    assert s.annihilator == ann
    z1, z2 = s.sample(0, 10_000)
    assert np.all(_circ(ann[0] * z1 + ann[1] * z2) < 1e-9)
    assert np.all(s.relation_residual(z1, z2) < 1e-9)


def test_zprime_single_draw():
    z1, z2 = sample_zprime(ZPrimeSampler(1, 2, ROT.kronecker), 3)
    assert z1.shape == (1,) and _circ(2 * z1 - z2)[0] < 1e-9


def test_zprime_matches_orbit_closure():
    # character moments of the sampler against the equidistributed orbit
    a1, a2 = 1, 2
    n = np.arange(1, 10**5 + 1)
    o1 = ROT.states_at(0.0, a1 * n)
    o2 = ROT.states_at(0.0, a2 * n)
    z1, z2 = ZPrimeSampler(a1, a2, ROT.kronecker).sample(7, 10**5)
    z1, z2 = z1[:, 0], z2[:, 0]
    for k in range(-3, 4):
        for m in range(-3, 4):
            orb = np.mean(np.exp(2j * np.pi * (k * o1 + m * o2)))
            smp = np.mean(np.exp(2j * np.pi * (k * z1 + m * z2)))
            assert abs(orb - smp) < 0.02


def test_zprime_rejects_rational_and_cyclic():
    with pytest.raises(UnsupportedError):
        ZPrimeSampler(1, 2, make_system(SystemSpec.rotation("1/3")).kronecker)
    with pytest.raises(UnsupportedError):
        ZPrimeSampler(1, 2, make_system(SystemSpec.cyclic(5)).kronecker)
    with pytest.raises(ValueError):
        ZPrimeSampler(2, 2, ROT.kronecker)


# ----------------------------------------------------------------------------
# mu~
# ----------------------------------------------------------------------------

def test_tilde_mu_rotation_is_explicit():
    ts = TildeMuSampler(ROT, 1, 2)
    for x, xi1, xi2 in ts.sample(0, 500):
        d = _circ(2 * (np.asarray(xi1) - x) - (np.asarray(xi2) - x))
        assert d.max() < 1e-9
        assert ts.relation_residual((x, xi1, xi2)) < 1e-9


def test_tilde_mu_bernoulli_is_independent():
    ts = TildeMuSampler(BERN, 1, 2)
    zero = np.zeros(1, dtype=np.int64)
    trip = ts.sample(4, 5000)
    v = np.array([[O.symbol()(BERN.states_at(p, zero))[0] for p in t] for t in trip])
    assert np.all(np.abs(v.mean(axis=0)) < 4 / math.sqrt(5000))
    c = np.corrcoef(v.T)
    assert np.all(np.abs(c[np.triu_indices(3, 1)]) < 4 / math.sqrt(5000))
    x, xi1, xi2 = sample_tilde_mu(ts, 1)
    assert len({x.key, xi1.key, xi2.key}) == 3


def test_tilde_mu_skew_fibres_uniform():
    ts = TildeMuSampler(SKEW, 1, 2)
    trip = ts.sample(2, 10_000)
    for i in range(3):
        for j in range(2):
            col = np.array([t[i][j] for t in trip])
            assert stats.kstest(col, "uniform").statistic < 0.02
    assert max(ts.relation_residual(t) for t in trip[:500]) < 1e-9


@pytest.mark.parametrize("base", [ROT, SKEW], ids=["rot", "skew"])
def test_tilde_mu_shift_invariance(base):
    ts = TildeMuSampler(base, 2, -1)
    trip = ts.sample(9, 10_000)
    moved = [tuple(base.step(p) for p in t) for t in trip]
    assert max(ts.relation_residual(t) for t in moved[:1000]) < 1e-9
    first = np.array([np.atleast_1d(t[1])[0] for t in moved])
    assert stats.kstest(first, "uniform").statistic < 0.02


def test_non_ergodic_base_rejected():
    u = make_system(SystemSpec.union([SystemSpec.rotation(0.1), SystemSpec.rotation(0.2)],
                                     [0.5, 0.5]))
    with pytest.raises(UnsupportedError):
        TildeMuSampler(u, 1, 2)


# ----------------------------------------------------------------------------
# the joining as a system
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("level", [1, 2])
@pytest.mark.parametrize("i", [1, 2])
def test_lift_matches_product_factor(level, i):
    # (x, xi_i) is Haar distributed on the square for a rotation base
    f = O.cos_char()
    j = JoiningSystem(ROT, 1, 2)
    p = SeminormParams(level=level, H_schedule=(32,) * level, N=1000, M=300, backend="monte_carlo")
    lifted = seminorm(j, lift_observable(f, i), p, 1)
    prod = make_system(SystemSpec.product(ROT.spec, ROT.spec))
    ref = seminorm(prod, O.tensor(f, f), p, 2)
    tol = 3 * math.hypot(lifted.power_uncertainty, ref.power_uncertainty)
    assert abs(lifted.power - ref.power) <= tol


# ----------------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------------

def test_fourfold_zero_functions():
    rep = corollary_experiment(ROT, ZERO, ZERO, 1, 2, 1000, 5, 0)
    assert not rep.averages.any() and rep.mean_abs == 0.0


def test_fourfold_bernoulli_decays():
    r1 = corollary_experiment(BERN, O.symbol(), O.symbol(), 1, 2, 5000, 100, 0)
    r4 = corollary_experiment(BERN, O.symbol(), O.symbol(), 1, 2, 20_000, 100, 0)
    assert r4.mean_abs < 0.05
    assert r1.mean_abs / r4.mean_abs >= 1.5


def test_fourfold_resonant_rotation_persists():
    rep = corollary_experiment(ROT, O.cos_char(2), O.cos_char(1), 1, 2, 20_000, 50, 0)
    assert rep.mean_abs > 0.1


def test_nu_integral_constants():
    m, se = nu_integral(ROT, O.constant(), O.constant(), 1, 2, np.array([0.3]), 100, 0)
    assert m == 1.0 and se == 0.0


def test_generic_constants():
    rep = generic_point_check(ROT, O.constant(), O.constant(), 1, 2, 0.2, 1000, 50, 0)
    assert rep.lhs == 1.0 and rep.rhs == 1.0 and rep.passed


def test_generic_null_case():
    rep = generic_point_check(ROT, O.cos_char(), O.cos_char(), 1, 2, 0.37, 10**5, 10_000, 0)
    assert abs(rep.lhs) < 0.01 and rep.passed


def test_generic_resonant_case():
    rep = generic_point_check(ROT, O.cos_char(2), O.cos_char(1), 1, 2, 0.0, 10**5, 10_000, 0)
    assert rep.lhs == pytest.approx(0.5, abs=0.01)
    assert rep.rhs == pytest.approx(0.5, abs=3 * rep.rhs_stderr + 1e-3)
    assert rep.passed


def test_generic_skew_base():
    # a function of the base coordinate only: both sides reduce to the rotation
    x = SKEW.sample(1, 1)[0]
    rep = generic_point_check(SKEW, O.cos_char(2, 0), O.cos_char(1, 0), 1, 2, x, 10**5, 10_000, 0)
    assert rep.lhs == pytest.approx(0.5 * math.cos(2 * math.pi * x[0]), abs=0.01)
    assert rep.passed


def test_reports_serialise():
    import json
    rep = corollary_experiment(BERN, O.symbol(), O.symbol(), 1, 2, 500, 4, 0)
    d = json.loads(rep.to_json())
    assert d["samples"] == 4 and "mean_abs" in d
