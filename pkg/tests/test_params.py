import math

import numpy as np
import pytest

from mobilemedium.exceptions import (
    DimensionError,
    ParameterError,
    PositivityError,
    ShapeExponentError,
)
from mobilemedium.params import ModelParams, Regime, canonicalize, classify_regime, validate


def test_validate_accepts_catalytic_case():
    p = validate({"d": 3, "p": 2, "theta": 0.1, "sigma": 1, "t": 1})
    assert p.regime is Regime.II
    assert p.kappa == 0.5


def test_validate_accepts_line_case():
    assert validate({"d": 1, "p": 0.75}).regime is Regime.I


@pytest.mark.parametrize("raw, exc", [
    ({"d": 3, "p": 1.4}, ShapeExponentError),
    ({"d": 3, "p": 3.0}, ShapeExponentError),
    ({"d": 0, "p": 0.1}, DimensionError),
    ({"d": 2.5, "p": 2.0}, DimensionError),
    ({"d": 9, "p": 6.0}, DimensionError),
    ({"d": 3, "p": 2.0, "theta": 0.0}, PositivityError),
    ({"d": 3, "p": 2.0, "sigma": -1}, PositivityError),
    ({"d": 3, "p": 2.0, "t": math.inf}, PositivityError),
    ({"d": 3, "p": 2.0, "kappa": math.nan}, PositivityError),
])
def test_validate_rejects(raw, exc):
    with pytest.raises(exc) as info:
        validate(raw)
    assert isinstance(info.value, ParameterError)
    assert info.value.invariant


@pytest.mark.parametrize("d, p, reg", [
    (3, 1.8, Regime.I),
    (3, 2.0, Regime.II),
    (3, 2.5, Regime.IV),
    (5, 3.0, Regime.III),
    (3, 2.8, Regime.V),
    (1, 0.75, Regime.I),
    (4, 3.0, Regime.IV),
    (8, 5.5, Regime.V),
])
def test_classify(d, p, reg):
    assert classify_regime(d, p) is reg


def test_boundary_tolerance():
    assert classify_regime(3, 2.0 + 1e-12) is Regime.II
    assert classify_regime(3, 2.5 * (1 - 1e-11)) is Regime.IV
    assert classify_regime(3, 2.0 + 1e-6) is Regime.III


@pytest.mark.parametrize("d", range(1, 9))
def test_regime_bands_contiguous(d):
    ps = np.arange(d / 2 + 1e-3, d, 1e-3)
    tags = [classify_regime(d, float(p)) for p in ps]
    changes = [(a, b) for a, b in zip(tags, tags[1:]) if a is not b]
    order = [Regime.I, Regime.II, Regime.III, Regime.IV, Regime.V]
    seen = [tags[0]] + [b for _, b in changes]
    assert len(seen) == len(set(seen)) <= 5
    assert [order.index(r) for r in seen] == sorted(order.index(r) for r in seen)


def test_canonicalize():
    unit = ModelParams(3, 2.0, 1.0, 1.0, 1.0, 0.5)
    assert canonicalize(unit) == unit
    c = canonicalize(ModelParams(3, 2.0, 1.0, 1.0, 1.0, 1.0))
    assert c.theta == pytest.approx(0.5)
    assert c.sigma ** 2 == pytest.approx(0.5)
    assert c.t == pytest.approx(2.0)
    assert c.kappa == 0.5
    assert canonicalize(c) == c
    assert c.regime is Regime.II


def test_round_trip_and_with():
    p = ModelParams(5, 3.0, 0.3, 2.0, 4.0, 0.25)
    assert validate(p.to_dict()) == p
    assert p.with_(theta=1.0).theta == 1.0
    with pytest.raises(ShapeExponentError):
        p.with_(p=2.0)
