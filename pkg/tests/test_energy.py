import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaegd.energy import (
    AEGD,
    ALEGD,
    DomainError,
    Logarithmic,
    Power,
    UnsupportedEnergyError,
    check_admissibility,
    parse_energy,
)

SHIPPED = [Power(p / 10) for p in range(1, 11)] + [Logarithmic()]
GRID_50 = np.geomspace(1e-6, 1e6, 50)

positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@pytest.mark.parametrize(
    "energy, s, expected",
    [(Power(0.5), 4.0, 2.0), (Power(0.2), 32.0, 2.0), (Logarithmic(), 1e-300, 0.0)],
)
def test_value_examples(energy, s, expected):
    assert energy.value(s) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "energy, s, expected",
    [(Power(0.5), 4.0, 0.25), (Logarithmic(), 1.0, 0.5), (Power(1.0), 7.0, 1.0)],
)
def test_derivative_examples(energy, s, expected):
    assert energy.derivative(s) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize(
    "energy, y, expected",
    [(Power(0.5), 3.0, 9.0), (Logarithmic(), math.log(3.0), 2.0), (Power(0.2), 2.0, 32.0)],
)
def test_inverse_examples(energy, y, expected):
    assert energy.inverse(y) == pytest.approx(expected, rel=1e-14)


def test_derivative_inverse_examples():
    assert Logarithmic().derivative_inverse(0.5) == pytest.approx(1.0)
    assert Power(0.5).derivative_inverse(0.25) == pytest.approx(4.0)
    with pytest.raises(UnsupportedEnergyError):
        Power(1.0).derivative_inverse(1.0)
    with pytest.raises(DomainError):
        Logarithmic().derivative_inverse(1.5)


def test_non_positive_argument_rejected():
    for e in SHIPPED:
        with pytest.raises(DomainError):
            e.value(0.0)
        with pytest.raises(DomainError):
            e.derivative(np.array([1.0, -1.0]))


def test_constructor_rejects_bad_exponents():
    for p in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            Power(p)
    with pytest.raises(ValueError):
        Power(1.5)
    assert Power(1.5, allow_convex=True).value(4.0) == pytest.approx(8.0)


@pytest.mark.parametrize("energy", SHIPPED, ids=str)
def test_round_trips_on_log_grid(energy):
    assert np.allclose(energy.inverse(energy.value(GRID_50)), GRID_50, rtol=1e-10, atol=0)
    if energy != Power(1.0):
        d = energy.derivative(GRID_50)
        assert np.allclose(energy.derivative_inverse(d), GRID_50, rtol=1e-10, atol=0)


@settings(max_examples=200)
@given(s1=positive, s2=positive)
def test_positive_increasing_concave(s1, s2):
    lo, hi = min(s1, s2), max(s1, s2)
    for e in SHIPPED:
        v, d = e.value(lo), e.derivative(lo)
        assert math.isfinite(v) and v > 0
        assert math.isfinite(d) and d > 0
        assert e.value(hi) >= v
        assert e.derivative(hi) <= d


@given(s=positive)
def test_inverse_of_value(s):
    for e in SHIPPED:
        assert e.inverse(e.value(s)) == pytest.approx(s, rel=1e-12)


@given(s=positive)
def test_sqrt_energy_value_times_derivative_is_half(s):
    assert AEGD.value(s) * AEGD.derivative(s) == pytest.approx(0.5, rel=1e-14)


def test_array_and_scalar_paths_agree():
    s = np.array([0.3, 2.0, 50.0])
    for e in SHIPPED:
        vec = e.value(s)
        assert np.allclose(vec, [e.value(float(v)) for v in s], rtol=1e-15, atol=0)
        assert isinstance(e.value(np.float64(2.0)), float)


@pytest.mark.parametrize("energy", [Logarithmic(), Power(0.5)], ids=str)
def test_admissible_energies_pass(energy):
    rep = check_admissibility(energy, [0.1, 1.0, 10.0, 100.0])
    assert rep.admissible and rep.monotone_increasing and rep.concave


def test_convex_power_fails_concavity():
    rep = check_admissibility(Power(1.5, allow_convex=True), [0.1, 1.0, 10.0, 100.0])
    assert rep.monotone_increasing and not rep.concave and not rep.admissible


def test_admissibility_flags():
    assert check_admissibility(Power(1.0), [1.0, 2.0, 3.0]).admissible
    assert not Power(1.0).strictly_concave
    rep = check_admissibility(ALEGD, [1.0, 2.0, 3.0])
    assert rep.strictly_concave and rep.derivative_vanishes and rep.unbounded


def test_admissibility_grid_validation():
    with pytest.raises(ValueError):
        check_admissibility(AEGD, [1.0, 2.0])
    with pytest.raises(ValueError):
        check_admissibility(AEGD, [1.0, 3.0, 2.0])


def test_parse_energy():
    assert parse_energy("aegd") == Power(0.5)
    assert parse_energy("power:0.3") == Power(0.3)
    assert isinstance(parse_energy("ALEGD"), Logarithmic)
    assert parse_energy(ALEGD) is ALEGD
    for bad in ("cubic", "power:x", "power:2"):
        with pytest.raises(ValueError):
            parse_energy(bad)
