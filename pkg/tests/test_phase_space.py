import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscowave.coefficients import make_builtin
from viscowave.errors import NoCrossingError, RegimeMismatchError
from viscowave.phase_space import LABEL_CODES, ZoneConstants, ZoneLabel, classify, \
    classify_many, curve_specs, indicator, separating_line, separating_lines, zone_grid

FIGURES = {"A": ("exp3", []), "B": ("exp_neg", []), "D": ("power", [-0.5]),
           "E": ("power", [0.5])}


def test_regime_A_origin_is_pseudo_differential():
    c = make_builtin("exp3")
    for r in (1e-3, 1.0, 1e3):
        assert classify("A", c, 0.0, r) == ZoneLabel.PSEUDO_DIFFERENTIAL


def test_regime_A_boundary_small_N():
    c = make_builtin("exp3")
    k = ZoneConstants(N=1.0)
    t = separating_line("A", c, "t_xi", 1.0, k)
    assert math.isclose(t, math.log(5.0 / 3.0), rel_tol=1e-12)
    assert classify("A", c, 1.0, 1.0, k) == ZoneLabel.ELLIPTIC
    assert classify("A", c, 0.5, 1.0, k) == ZoneLabel.PSEUDO_DIFFERENTIAL


def test_regime_D_hyperbolic_at_origin():
    c = make_builtin("power", [-0.5])
    assert math.isclose(float(c.h(0.0)), 1.25, rel_tol=1e-15)
    assert classify("D", c, 0.0, 1.0) == ZoneLabel.HYPERBOLIC
    # the hyperbolic threshold at t=0 sits at r = sqrt(15)/2
    rs = math.sqrt(15) / 2
    assert math.isclose(float(indicator("D", c, 0.0, rs)), 0.25, rel_tol=1e-14)
    assert classify("D", c, 0.0, rs * (1 + 1e-9)) == ZoneLabel.REDUCED


def test_regime_D_small_frequencies_start_hyperbolic():
    c = make_builtin("power", [-0.5])
    assert separating_line("D", c, "t_xi2", 0.1) == 0.0


def test_regime_B_closed_form():
    c = make_builtin("exp_neg")
    t = separating_line("B", c, "t_xi2", 1.0, ZoneConstants(eps=0.1))
    assert math.isclose(t, math.log(10.0), rel_tol=1e-12)


def test_no_crossing_is_distinct():
    c = make_builtin("exp3")
    with pytest.raises(NoCrossingError):
        separating_line("A", c, "t_xi", 1e-3, t_max=1.0)


def test_regime_mismatch():
    with pytest.raises(RegimeMismatchError):
        classify("A", make_builtin("power", [-0.5]), 1.0, 1.0)
    with pytest.raises(KeyError):
        separating_line("D", make_builtin("power", [-0.5]), "t_xi3", 1.0)


def test_constants_validation():
    with pytest.raises(ValueError):
        ZoneConstants(eps=1.5)
    with pytest.raises(ValueError):
        ZoneConstants(N=0.1)


@pytest.mark.parametrize("tag", sorted(FIGURES))
def test_boundary_residuals_and_neighbours(tag):
    c = make_builtin(*FIGURES[tag])
    k = ZoneConstants(N=4.0)
    for spec in curve_specs(tag, k):
        for r in np.geomspace(0.05, 30.0, 15):
            try:
                t = separating_line(tag, c, spec.name, float(r), k, t_max=1e4)
            except NoCrossingError:
                continue
            if t == 0.0:
                continue
            res = abs(float(indicator(tag, c, t, r)) - spec.level) / max(1.0, abs(spec.level))
            assert res <= 1e-10
            d = 1e-6 * max(1.0, t)
            lo, hi = classify_many(tag, c, [t - d, t + d], [r, r], k)
            assert lo == LABEL_CODES[spec.earlier] and hi == LABEL_CODES[spec.later]


@pytest.mark.parametrize("tag", sorted(FIGURES))
def test_monotone_in_frequency(tag):
    c = make_builtin(*FIGURES[tag])
    k = ZoneConstants(N=4.0)
    lines = separating_lines(tag, c, k)
    for name in lines.names():
        ts = []
        for r in np.geomspace(0.05, 50.0, 50):
            try:
                ts.append(lines(name, float(r), t_max=1e4))
            except NoCrossingError:
                ts.append(np.nan)
        ts = np.array(ts)
        ts = ts[np.isfinite(ts) & (ts > 0)]
        if ts.size < 2:
            continue
        steps = np.diff(ts)
        if tag == "A" or tag == "E":
            assert np.all(steps <= 1e-12 * ts[1:])
        else:
            assert np.all(steps >= -1e-12 * ts[1:])


@pytest.mark.parametrize("tag", sorted(FIGURES))
def test_partition_on_standard_grid(tag):
    c = make_builtin(*FIGURES[tag])
    codes = zone_grid(tag, c, np.linspace(0, 50, 100), np.geomspace(0.01, 100, 100))
    assert codes.shape == (100, 100)
    assert np.isin(codes, list(LABEL_CODES.values())).all()


def test_tie_goes_elliptic_ward():
    c = make_builtin("exp3")
    k = ZoneConstants(N=1.0)
    t = separating_line("A", c, "t_xi", 1.0, k)
    # at the exact root float the indicator may land on either side by one ulp;
    # construct an exact tie instead
    r = math.sqrt(1.0 / float(c.G_half(1.0)))
    x = float(indicator("A", c, 1.0, r))
    if x == 1.0:
        assert classify("A", c, 1.0, r, k) == ZoneLabel.ELLIPTIC
    assert t > 0


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.0, 200.0), lr=st.floats(-2.0, 2.5))
def test_regime_E_bands_are_nested(t, lr):
    c = make_builtin("power", [0.5])
    r = 10 ** lr
    x = float(indicator("E", c, t, r))
    lab = classify("E", c, t, r)
    if x > 0.25:
        assert lab == ZoneLabel.HYPERBOLIC
    elif x > -0.25:
        assert lab == ZoneLabel.REDUCED
    elif x > -100:
        assert lab == ZoneLabel.PSEUDO_DIFFERENTIAL
    else:
        assert lab == ZoneLabel.ELLIPTIC
