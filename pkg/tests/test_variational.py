import math

import numpy as np
import pytest
from scipy import integrate

from mobilemedium import variational as va
from mobilemedium.exceptions import DegenerateProfileError, DomainError


def _quad_forms(prof: va.RadialProfile, p: float):
    # independent: adaptive quadrature of the interpolated profile per segment
    r, v = np.asarray(prof.nodes), np.asarray(prof.values)
    s = 2 * math.pi ** (prof.d / 2) / math.gamma(prof.d / 2)
    l2 = gr = wt = 0.0
    for i in range(r.size - 1):
        a, b = r[i], r[i + 1]
        slope = (v[i + 1] - v[i]) / (b - a)
        g = lambda x: v[i] + slope * (x - a)
        kw = dict(epsabs=0, epsrel=1e-12, limit=200)
        l2 += integrate.quad(lambda x: g(x) ** 2 * x ** (prof.d - 1), a, b, **kw)[0]
        gr += slope ** 2 * (b ** prof.d - a ** prof.d) / prof.d
        if a == 0:
            wt += integrate.quad(lambda x: g(x) ** 2, a, b, weight="alg",
                                 wvar=(prof.d - 1 - p, 0), **kw)[0]
        else:
            wt += integrate.quad(lambda x: g(x) ** 2 * x ** (prof.d - 1 - p), a, b, **kw)[0]
    return s * l2, s * gr, s * wt


@pytest.mark.parametrize("seed", range(5))
def test_gram_forms_against_quadrature(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    p = float(rng.uniform(0.2, min(2.0, d) - 0.05))
    prof = va.random_profile(rng, n=7, d=d)
    l2, gr, wt = _quad_forms(prof, p)
    assert prof.l2() == pytest.approx(l2, rel=1e-9)
    assert prof.grad2() == pytest.approx(gr, rel=1e-12)
    assert prof.weighted(p) == pytest.approx(wt, rel=1e-9)


def test_profile_validation_and_csv():
    with pytest.raises(DomainError):
        va.RadialProfile((0.0, 1.0), (1.0, 0.5))
    with pytest.raises(DomainError):
        va.RadialProfile((0.1, 1.0), (1.0, 0.0))
    prof = va.random_profile(np.random.default_rng(3))
    back = va.RadialProfile.from_csv(prof.to_csv())
    assert back == prof
    with pytest.raises(DegenerateProfileError):
        va.RadialProfile((0.0, 1.0), (0.0, 0.0)).normalized()


def test_scaling_laws():
    prof = va.random_profile(np.random.default_rng(4))
    a = 2.5
    s = prof.scaled(a)
    # the per-segment power differences lose a few digits to cancellation
    assert s.l2() == pytest.approx(prof.l2(), rel=1e-9)
    assert s.grad2() == pytest.approx(a * a * prof.grad2(), rel=1e-9)
    assert s.weighted(2.0) == pytest.approx(a * a * prof.weighted(2.0), rel=1e-9)
    assert prof.normalized().l2() == pytest.approx(1.0)


@pytest.mark.parametrize("M", [math.e, math.exp(3), 50.0])
def test_gM_closed_forms(M):
    g = va.GMProfile(M, scale=1.7, amplitude=0.6)
    gen = va.segment_integrals(g)
    assert g.l2() == pytest.approx(gen["l2"], rel=1e-11)
    assert g.grad2() == pytest.approx(gen["grad"], rel=1e-11)
    assert g.weighted(2.0) == pytest.approx(gen["weighted"], rel=1e-11)


def test_gM_ratio():
    assert va.gM_ratio_closed_form(math.exp(10)) == pytest.approx(2.909090909, abs=1e-9)
    Ms = [math.exp(k) for k in range(1, 41)]
    rs = [va.hardy_ratio(va.gM_profile(M)) for M in Ms]
    assert all(b > a for a, b in zip(rs, rs[1:]))
    assert all(r < 4 for r in rs)
    assert rs[-1] > 3.64
    for M, r in zip(Ms, rs):
        assert r == pytest.approx(va.gM_ratio_closed_form(M), rel=1e-12)


def test_hardy_bound_on_random_profiles():
    rng = np.random.default_rng(2024)
    worst = max(va.hardy_ratio(va.random_profile(rng, n=int(rng.integers(3, 20))))
                for _ in range(100))
    assert worst <= 4.0


def test_hardy_ratio_needs_d3():
    with pytest.raises(DomainError):
        va.hardy_ratio(va.random_profile(np.random.default_rng(0), d=2))


def test_objective_scales_quadratically():
    g = va.gM_profile(math.exp(12))
    base = va.hardy_objective(g, 0.2)
    assert va.hardy_objective(g.scaled(10.0), 0.2) == pytest.approx(100 * base, rel=1e-12)
    # amplitude does not matter after normalization
    assert va.hardy_objective(va.GMProfile(math.exp(12), amplitude=3.0), 0.2) == pytest.approx(base)


def test_dichotomy():
    hi = va.hardy_dichotomy(0.2)
    assert hi.base_objective > 0 and hi.max_objective > 1e3
    lo = va.hardy_dichotomy(0.125)
    assert lo.max_objective <= 1e-9


def test_gamma_estimate_small():
    est = va.estimate_gamma_dp(3, 1.7, restarts=2, n_nodes=8, levels=1, sweeps=5, seed=1)
    assert est.is_lower_bound and len(est.restarts) == 2
    assert est.value == pytest.approx(va.gamma_functional(est.profile, 1.7), rel=1e-9)
    assert est.history == sorted(est.history)
    with pytest.raises(DomainError):
        va.estimate_gamma_dp(3, 2.0)
    # the functional is invariant under dilation and amplitude
    prof = est.profile
    assert va.gamma_functional(prof.scaled(3.0, 0.2), 1.7) == pytest.approx(est.value, rel=1e-10)
