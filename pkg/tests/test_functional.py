import math
import warnings

import numpy as np
import pytest

from mobilemedium import functional as fn
from mobilemedium.exceptions import DivergenceWarning, RegimeError
from mobilemedium.params import ModelParams
from mobilemedium.quadrature import QuadratureSpec
from mobilemedium.sampler import PathSample, SeedSpec, TimeGrid, sample_brownian

# mpmath radial integrals int_{|x|>r} F(theta t |x|^-p) dx
TAILS = {
    ("psi", 3, 2.0, 1.0, 2.0): 3.057485488398549,
    ("psi", 3, 2.0, 1.0, 1.0): 5.6765478390395872,
    ("Psi", 3, 2.0, 1.0, 2.0): 3.2322523845459943,
    ("psi", 1, 0.75, 2.0, 0.5): 8.010026044152023,
    ("Psi", 3, 2.5, 0.5, 1.0): 0.84861941134924106,
}
# mpmath: Gamma closed form of E int int |X(r)-X(s)|^-1 dr ds, d = 5, t = 1
PAIR_5 = 1.418461441427316

Q_SMALL = QuadratureSpec(n_steps=64, n_x=24)


@pytest.mark.parametrize("key", sorted(TAILS))
def test_static_tail(key):
    assert fn.static_tail(*key) == pytest.approx(TAILS[key], rel=1e-10)


def test_estimate_merge_is_exact_pooling():
    rng = np.random.default_rng(0)
    a, b = rng.normal(1, 2, 37), rng.normal(1.5, 1, 81)
    ea, eb = fn.EstimateCI.from_samples(a), fn.EstimateCI.from_samples(b)
    both = fn.EstimateCI.from_samples(np.concatenate([a, b]))
    m = ea.merge(eb)
    assert m.n == 118
    assert m.mean == pytest.approx(both.mean, rel=1e-13)
    assert m.stderr == pytest.approx(both.stderr, rel=1e-12)


def test_estimate_round_trip_and_z():
    e = fn.EstimateCI(2.0, 0.3, 10, SeedSpec(4, 1), "note", {"x": np.float64(1.5)})
    back = fn.EstimateCI.from_dict(e.to_dict())
    assert back.mean == 2.0 and back.seed == SeedSpec(4, 1) and back.extras["x"] == 1.5
    f = fn.EstimateCI(1.0, 0.4, 10)
    assert e.z_against(f) == pytest.approx(1.0 / 0.5)
    with pytest.raises(ValueError):
        fn.EstimateCI.from_samples([])


def test_log_helpers():
    v = np.full(10, 3.0)
    assert fn._jackknife_log_exp(v) == pytest.approx(3.0)
    lm, se = fn._log_mean_exp(np.log([1.0, 3.0]))
    assert lm == pytest.approx(math.log(2.0))
    # jackknife removes the Jensen bias of exp(mean): E exp(mean) > exp(mu)
    rng = np.random.default_rng(1)
    plug, jk = [], []
    for _ in range(2000):
        s = rng.normal(0.0, 1.0, 8)
        plug.append(math.exp(s.mean()))
        jk.append(math.exp(fn._jackknife_log_exp(s)))
    assert abs(np.mean(jk) - 1.0) < abs(np.mean(plug) - 1.0)


def test_psi_bar_below_jensen(regime2):
    est = fn.psi_bar(1.0, None, regime2, Q_SMALL, n_mc=32, seed=3)
    assert 0 < est.mean < fn.jensen_bound(1.0, regime2)
    assert est.extras["inner"] > 0 and est.extras["tail"] > 0
    assert est.mean == pytest.approx(est.extras["inner"] + est.extras["outer"] + est.extras["tail"])


def test_psi_bar_deterministic_and_worker_free(regime2):
    a = fn.psi_bar(1.0, None, regime2, Q_SMALL, n_mc=40, seed=9, workers=1)
    b = fn.psi_bar(1.0, None, regime2, Q_SMALL, n_mc=40, seed=9, workers=3)
    assert a.mean == b.mean and a.stderr == b.stderr


def test_regime2_exact_scaling(regime2):
    # space by sqrt(c), time by c: psi_bar scales as c^(3/2) on common paths
    grid = TimeGrid(1.0, 64)
    b = sample_brownian(grid, np.zeros(3), 1.0, SeedSpec(2), "test-path")
    one = fn.psi_bar(1.0, b, regime2, Q_SMALL, n_mc=16, seed=1)
    four = fn.psi_bar(4.0, b.scaled(2.0, 4.0), regime2, Q_SMALL, n_mc=16, seed=1)
    assert four.mean == pytest.approx(8.0 * one.mean, rel=1e-10)


def test_kernel_for_zero_psi():
    from mobilemedium.kernels import KernelSpec

    P = ModelParams(1, 0.75, 1.0, 1.0)
    est = fn.psi_bar(1.0, None, P, Q_SMALL, n_mc=4, seed=0, kernel=KernelSpec.indicator(0.0))
    assert est.mean == 0.0


def test_indicator_d1_exact_and_bounded():
    from mobilemedium.kernels import KernelSpec

    P = ModelParams(1, 0.75, 1.0, 1.0)
    k = KernelSpec.indicator(1.0, 1.0)
    est = fn.psi_bar(1.0, None, P, Q_SMALL, n_mc=64, seed=0, kernel=k)
    # psi(a) <= a, and int E int_0^t K(x+X) ds dx = t * int K = 2
    assert 0 < est.mean < 2.0


def test_Psi_warnings():
    with pytest.warns(DivergenceWarning):
        fn.Psi_bar(1.0, None, ModelParams(3, 2.0, 0.2, 1.0), Q_SMALL, n_mc=4, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", DivergenceWarning)
        est = fn.Psi_bar(1.0, None, ModelParams(3, 2.0, 0.1, 1.0), Q_SMALL, n_mc=8, seed=0)
    assert est.mean > 0
    assert est.mean == pytest.approx(est.extras["near"] + est.extras["far"])


def test_Psi_above_psi(regime2):
    P = regime2.with_(theta=0.1)
    a = fn.psi_bar(1.0, None, P, Q_SMALL, n_mc=16, seed=2)
    b = fn.Psi_bar(1.0, None, P, Q_SMALL, n_mc=16, seed=2)
    assert b.mean > a.mean


def test_convexity_far_piece_below_bound():
    P = ModelParams(3, 2.0, 0.1, 1.0)
    est, bound = fn.convexity_far_piece(1.0, P, Q_SMALL, n_mc=16, seed=0)
    assert 0 < est.mean <= bound * 1.0001
    assert bound == pytest.approx(fn.static_tail("Psi", 3, 2.0, 0.2, 1.0))


def test_classify_trend():
    assert fn.classify_trend([1, 1.01, 1.02], [0.01, 0.01], [0.001] * 2, [0.01] * 2) == "stabilizing"
    assert fn.classify_trend([1, 2, 3.5], [1.0, 1.5], [0.1] * 2, [0.2] * 2) == "diverging"
    assert fn.classify_trend([1, 2, 2.5], [1.0, 0.5], [0.1] * 2, [0.2] * 2) == "inconclusive"


def test_cap_sweep_mechanics():
    P = ModelParams(3, 2.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        fn.Psi_bar_cap_sweep(1.0, P, [0.01, 0.02], Q_SMALL, n_mc=4)
    sw = fn.Psi_bar_cap_sweep(1.0, P, [0.2, 0.1, 0.05], Q_SMALL, n_mc=8, seed=1)
    assert len(sw.estimates) == 3 and len(sw.increments) == 2
    # refining the cap can only raise the capped kernel
    assert all(i >= 0 for i in sw.increments)
    assert sw.verdict in ("stabilizing", "diverging", "inconclusive")
    assert set(sw.to_dict()) >= {"caps", "verdict", "increment_ratios"}


def test_pascal_with_lines(regime2):
    grid = TimeGrid(1.0, 64)
    paths = [PathSample.from_function(grid, lambda s, v=v: [v * s, 0.0, 0.0], 3)
             for v in (0.5, 2.0)]
    rep = fn.pascal_check(1.0, paths, regime2, Q_SMALL, n_mc=32, seed=4)
    assert rep.all_passed
    # a fast line leaves the obstacles behind: strictly smaller exponent
    assert rep.shifted[1].mean < rep.zero.mean


def test_standard_paths():
    paths, labels = fn.standard_test_paths(1.0, 3, 32, seed=0)
    assert len(paths) == 20 and len(set(labels)) == 20
    assert all(np.all(p.points[0] == 0) for p in paths)


def test_moment2_against_closed_form():
    P = ModelParams(5, 3.0, 1.0, 1.0)
    assert fn.pair_moment_closed_form(1.0, 5, 1.0) == pytest.approx(PAIR_5, rel=1e-13)
    est = fn.moment2_shifted(1.0, None, P, n=20000, seed=0)
    pm, ps = est.extras["pair_mean"], est.extras["pair_stderr"]
    assert abs(pm - PAIR_5) < 3 * ps
    assert est.mean == pytest.approx(est.extras["C"] * pm)
    assert fn.moment2_closed_form(1.0, P) == pytest.approx(est.extras["C"] * PAIR_5, rel=1e-12)


def test_pair_moment_raw_mc():
    # independent route: uniform lag on a sqrt scale, increments summed from
    # a 16-step walk on [s, s+u]; no Beta sampling of the lag
    rng = np.random.default_rng(123)
    n = 40000
    v = rng.random(n)
    u = v * v
    steps = rng.standard_normal((n, 16, 5)) * np.sqrt(u / 16)[:, None, None]
    inc = steps.sum(axis=1)
    # E int int f(|r-s|) = 2 int_0^1 (1-u) f(u) du, du = 2 v dv
    vals = 2 * (1 - u) * 2 * v / np.linalg.norm(inc, axis=1)
    m, se = vals.mean(), vals.std(ddof=1) / math.sqrt(n)
    assert abs(m - PAIR_5) < 3 * se


def test_moment2_shift_and_scaling():
    P = ModelParams(5, 3.0, 1.0, 1.0)
    base = fn.moment2_shifted(1.0, None, P, n=4000, seed=1)
    grid = TimeGrid(1.0, 32)
    line = PathSample.from_function(grid, lambda s: [3 * s, 0, 0, 0, 0], 5)
    shifted = fn.moment2_shifted(1.0, line, P, n=4000, seed=1)
    assert shifted.mean < base.mean
    four = fn.moment2_shifted(4.0, None, P, n=4000, seed=1)
    assert four.extras["pair_mean"] == pytest.approx(8 * base.extras["pair_mean"], rel=1e-12)
    with pytest.raises(RegimeError):
        fn.moment2_shifted(1.0, None, ModelParams(5, 4.5, 1.0, 1.0))


def test_exponential_moment_small():
    P = ModelParams(1, 0.75, 1.0, 1.0)
    q = QuadratureSpec(n_steps=32, n_x=16)
    est = fn.exponential_moment_via_identity(1.0, P, n_outer=12, n_mc=16, quad=q, seed=2)
    assert math.isfinite(est.mean) and est.n == 12
    bound = est.extras["pascal_bound"]
    # Pascal: the log moment sits below psi_bar(t, 0) up to noise
    assert est.mean < bound["mean"] + 4 * (bound["stderr"] + est.stderr)
    with pytest.raises(ValueError):
        fn.exponential_moment_via_identity(1.0, P, sign="up")


def test_psi_bar_monotone_in_theta(regime2):
    # psi is increasing, so on common random numbers every path increases
    vals = [fn.psi_bar(1.0, None, regime2.with_(theta=th), Q_SMALL, n_mc=8, seed=6).mean
            for th in (0.25, 0.5, 1.0, 2.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
