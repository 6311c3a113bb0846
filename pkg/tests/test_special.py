import math
import warnings

import numpy as np
import pytest

from mobilemedium import special as sp
from mobilemedium.exceptions import DomainError, OverflowSignal, RegimeError
from mobilemedium.params import ModelParams, Regime

# independent 30-digit values (mpmath: series, Gamma, quadrature in u = r^-p)
PSI_1E8 = 4.9999999833333362534567796694e-17
OMEGA_5 = 5.26378901391432459671172853327
RADIAL = {
    (1, 0.75): 8.12470763652894016261593429805,
    (3, 2.0): 14.8488746582178874980151511003,
    (3, 1.8): 16.8322672401045218248249068823,
    (5, 3.0): 21.152050841909004049263194769,
    (8, 5.0): 15.0047850642940005398394248415,
}
RHO3_5_3 = 27.9993065701731906565167039902
RHO4_3 = 142.172254021067719904508191682
C_3_2 = 31.0062766802998201754763150671
Q0_3_2 = 24.7394294511931480502283575868


def test_psi_values():
    assert sp.psi(0.0) == 0.0
    assert sp.psi(1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert sp.psi(1e-8) == pytest.approx(PSI_1E8, rel=1e-14)
    # both branches agree across the switch
    a = np.array([1e-4 * (1 - 1e-9), 1e-4 * (1 + 1e-9)])
    v = sp.psi(a)
    assert v[1] / v[0] == pytest.approx((a[1] / a[0]) ** 2, rel=1e-8)


def test_Psi_values():
    assert sp.Psi_big(0.0) == 0.0
    assert sp.Psi_big(1.0) == pytest.approx(math.e - 2, rel=1e-15)
    assert sp.Psi_big(1e-8) == pytest.approx(5.0000000166666671e-17, rel=1e-14)


def test_domain_and_overflow():
    with pytest.raises(DomainError):
        sp.psi(-1.0)
    with pytest.raises(DomainError):
        sp.Psi_big([0.1, -0.1])
    with pytest.warns(OverflowSignal):
        assert sp.Psi_big(1000.0) == math.inf


def test_psi_inequalities():
    a = np.concatenate([[0.0], np.geomspace(1e-9, 50, 400)])
    psi, Psi = sp.psi(a), sp.Psi_big(a)
    assert np.all(psi >= 0)
    assert np.all(psi <= np.minimum(a, a * a / 2) * (1 + 1e-15))
    assert np.all(Psi >= a * a / 2 * (1 - 1e-15))
    assert np.all(psi <= Psi)
    assert np.all(sp.psi(2 * a) <= 4 * psi * (1 + 1e-12))
    A, B = np.meshgrid(a[::8], a[::8])
    assert np.all(sp.psi(A + B) >= (sp.psi(A) + sp.psi(B)) * (1 - 1e-12))


def test_ball_volume():
    assert sp.unit_ball_volume(1) == pytest.approx(2.0, rel=1e-15)
    assert sp.unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert sp.unit_ball_volume(5) == pytest.approx(OMEGA_5, rel=1e-15)
    with pytest.raises(DomainError):
        sp.unit_ball_volume(9)


@pytest.mark.parametrize("dp", sorted(RADIAL))
def test_psi_radial_integral(dp):
    d, p = dp
    assert sp.psi_radial_integral(d, p) == pytest.approx(RADIAL[dp], rel=1e-10)


def test_psi_radial_random_crosscheck():
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = int(rng.integers(1, 9))
        p = float(rng.uniform(d / 2 + 0.02 * d, d - 0.02 * d))
        a, b = sp.psi_radial_integral(d, p), sp.psi_radial_quadrature(d, p)
        assert abs(a / b - 1) < 1e-6


def test_psi_radial_scaling():
    # int psi(c |x|^-p) dx = c^(d/p) int psi(|x|^-p) dx, checked by quadrature
    from scipy import integrate

    d, p, c = 3, 2.0, 2.7
    f = lambda r: float(sp.psi(c * r ** -p)) * r ** (d - 1)
    v = sp.sphere_area(d) * sum(integrate.quad(f, a, b, limit=200)[0]
                                for a, b in [(0, 1), (1, 100), (100, np.inf)])
    assert v == pytest.approx(c ** (d / p) * sp.psi_radial_integral(d, p), rel=1e-7)


def test_rho1():
    assert sp.rho1(1, 0.75, 1.0) == pytest.approx(RADIAL[(1, 0.75)], rel=1e-10)
    assert sp.rho1(3, 1.8, 2.0) == pytest.approx(2 ** (5 / 3) * sp.rho1(3, 1.8, 1.0), rel=1e-14)
    with pytest.raises(RegimeError):
        sp.rho1(3, 2.0, 1.0)


def test_rho2_bound():
    assert sp.rho2_upper_bound(1.0) == pytest.approx(RADIAL[(3, 2.0)], rel=1e-14)
    assert sp.rho2_upper_bound(4.0) == pytest.approx(8 * sp.rho2_upper_bound(1.0), rel=1e-14)


def test_rho3():
    assert sp.rho3(5, 3.0, 1.0, 1.0) == pytest.approx(RHO3_5_3, rel=1e-13)
    assert sp.rho3(5, 3.0, 3.0, 1.0) == pytest.approx(9 * RHO3_5_3, rel=1e-13)
    assert sp.rho3(5, 3.0, 1.0, 2.0) == pytest.approx(RHO3_5_3 / 2, rel=1e-13)
    with pytest.raises(RegimeError):
        sp.rho3(3, 2.5, 1.0, 1.0)


def test_rho4():
    assert sp.rho4(3, 1.0, 1.0) == pytest.approx(RHO4_3, rel=1e-14)
    assert sp.rho4(4, 1.0, 2.0) == pytest.approx(2 * math.pi ** 2, rel=1e-14)
    # d = 2 would need p = d, outside the admissible range
    with pytest.raises(ValueError):
        sp.rho4(2, 1.0, 1.0)


@pytest.mark.parametrize("d", [3, 4, 5, 7])
def test_rho4_second_moment_display_factor(d):
    # the theta^2 sigma^-2 C 2^(d-p-1) d omega_d (2 pi)^(-d/2) Gamma(d-p) display
    p = (d + 2) / 2
    th, sg = 0.7, 1.3
    disp = (th ** 2 / sg ** 2 * sp.convolution_constant(d, p) * 2 ** (d - p - 1)
            * sp.sphere_area(d) * (2 * math.pi) ** (-d / 2) * math.gamma(d - p))
    coef = sp.regime4_second_moment_coefficient(d, th, sg)
    assert disp == pytest.approx(coef, rel=1e-12)
    assert coef == pytest.approx(sp.rho4(d, th, sg) * 2 ** (-d / 2), rel=1e-12)


def test_convolution_constant():
    assert sp.convolution_constant(3, 2.0) == pytest.approx(C_3_2, rel=1e-14)
    with pytest.raises(DomainError):
        sp.convolution_constant(3, 1.5)


def test_q_limits():
    assert sp.q_limit_zero(3, 2.0) == pytest.approx(Q0_3_2, rel=1e-14)
    assert sp.q_limit_infinity(3, 2.0) == pytest.approx(4 * math.pi, rel=1e-15)


def test_catalytic():
    r1 = sp.catalytic_rate(3, 1.6, 1.0, 1.0, 0.8)
    assert sp.catalytic_rate(3, 1.6, 2.0, 1.0, 0.8) == pytest.approx(2 ** (2 / 0.4) * r1)
    assert sp.catalytic_rate(3, 1.6, 1.0, 2.0, 0.8) == pytest.approx(2 ** (-3.2 / 0.4) * r1)
    assert sp.catalytic_rate(3, 1.6, 1.0, 1.0, 0.9) > r1
    with pytest.raises(RegimeError):
        sp.catalytic_rate(3, 2.0, 1.0, 1.0, 1.0)
    assert sp.catalytic_threshold(1.0) == 0.125
    assert sp.catalytic_threshold(2.0) == 0.5
    assert sp.catalytic_threshold(1.0, kappa=1.0) == 1 / 16


def test_constants_report_round_trip():
    for d, p, reg in [(1, 0.75, Regime.I), (3, 2.0, Regime.II), (5, 3.0, Regime.III),
                      (3, 2.5, Regime.IV)]:
        rep = sp.constants_report(ModelParams(d, p, 1.0, 1.0))
        assert rep.regime is reg
        back = sp.ConstantsReport.from_dict(rep.to_dict())
        assert back.value == rep.value and back.formula_id == rep.formula_id
    rep = sp.constants_report(ModelParams(3, 2.0, 1.0, 1.0))
    assert rep.is_interval and rep.value[1] == pytest.approx(RADIAL[(3, 2.0)])
