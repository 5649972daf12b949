import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscowave.coefficients import make_builtin
from viscowave.decay_fit import Abscissa, Verdict, default_abscissa, fit_rate, \
    parabolic_effect, window_from_G
from viscowave.energy import DataProfile, EnergyCurve, energy_curves, time_grid
from viscowave.errors import FitError


def _power_curve(beta, rate, t=None, scale=1.0):
    t = np.linspace(0.0, 50.0, 40) if t is None else t
    G = 1.0 + t
    e = scale * G ** rate
    return EnergyCurve(beta, t, e, e, G=G)


def test_exact_power_slope():
    assert fit_rate(_power_curve(2.0, -1.0), "log_G_one").slope == pytest.approx(-1.0, abs=1e-10)


def test_constant_curve_has_zero_slope():
    assert abs(fit_rate(_power_curve(2.0, 0.0), "log_t").slope) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(1e-8, 1e8), rate=st.floats(-3.0, 0.5))
def test_slope_is_scale_invariant(scale, rate):
    a = fit_rate(_power_curve(1.0, rate), "log_G_one").slope
    b = fit_rate(_power_curve(1.0, rate, scale=scale), "log_G_one").slope
    assert abs(a - b) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(lo=st.floats(0.0, 20.0), width=st.floats(15.0, 30.0))
def test_slope_is_window_independent(lo, width):
    cu = _power_curve(2.0, -0.75, t=np.linspace(0.0, 60.0, 121))
    s = fit_rate(cu, "log_G_one", window=(lo, lo + width)).slope
    assert abs(s + 0.75) <= 1e-10


def test_fit_errors():
    cu = _power_curve(2.0, -1.0)
    with pytest.raises(FitError):
        fit_rate(cu, "log_t", window=(0.0, 5.0))  # too few samples
    z = EnergyCurve(2.0, cu.times, np.zeros(40), np.zeros(40), G=cu.G)
    with pytest.raises(FitError):
        fit_rate(z, "log_t")
    flat_t = EnergyCurve(1.0, np.linspace(0, 1e-14, 12), np.ones(12), np.ones(12),
                         G=np.ones(12))
    with pytest.raises(FitError):
        fit_rate(flat_t, "log_G_one")
    with pytest.raises(FitError):
        Abscissa.parse("sqrt")
    with pytest.raises(FitError):
        fit_rate(EnergyCurve(1.0, cu.times, cu.e_u, cu.e_ut), "log_G_one")


def test_fit_reports_r2_and_window():
    f = fit_rate(_power_curve(2.0, -1.0), "log_G_one", window=(5.0, 40.0))
    assert 0.0 <= f.r2 <= 1.0 and f.window == (5.0, 40.0)
    assert f.samples >= 10


def test_default_abscissa():
    assert default_abscissa("D") == Abscissa.LOG_G_ONE
    assert default_abscissa("A") == Abscissa.LOG_T


def test_verdicts_on_synthetic_curves():
    par = [_power_curve(b, -b / 2) for b in (1.0, 2.0, 3.0)]
    assert parabolic_effect(par, "log_G_one").verdict == Verdict.PARABOLIC
    flat = [_power_curve(b, -0.3) for b in (2.0, 3.0)]
    assert parabolic_effect(flat, "log_G_one").verdict == Verdict.NON_PARABOLIC
    mixed = [_power_curve(1.0, -0.5), _power_curve(2.0, -1.0), _power_curve(3.0, -1.0)]
    assert parabolic_effect(mixed, "log_G_one").verdict == Verdict.INCONCLUSIVE


@settings(max_examples=20, deadline=None)
@given(perm=st.permutations([0, 1, 2]), noise=st.integers(0, 2**16))
def test_verdict_is_symmetric(perm, noise):
    rng = np.random.default_rng(noise)
    t = np.linspace(0, 50, 40)
    curves = []
    for b in (1.0, 2.0, 3.0):
        e = (1 + t) ** (-b / 2) * np.exp(0.01 * rng.normal(size=t.size))
        curves.append(EnergyCurve(b, t, e, e, G=1 + t))
    ref = parabolic_effect(curves, "log_G_one").verdict
    assert parabolic_effect([curves[i] for i in perm], "log_G_one").verdict == ref


def test_parabolic_errors():
    with pytest.raises(FitError):
        parabolic_effect([_power_curve(1.0, -1.0)])
    with pytest.raises(FitError):
        parabolic_effect([_power_curve(1.0, -1.0), _power_curve(1.0, -1.0)])


def test_window_from_G():
    cu = _power_curve(2.0, -1.0)
    lo, hi = window_from_G(cu, 10.0, 30.0)
    assert 9.0 <= lo and hi <= 29.0
    with pytest.raises(FitError):
        window_from_G(cu, 1e3, 1e4)


def test_regime_D_gaussian_example_slope():
    # beta = 2, window G_one in [10, 300]: slope -beta/2 in log G_one
    c = make_builtin("power", [-0.5])
    t = time_grid(3e4, 50)
    cu = energy_curves(c, DataProfile("gaussian"), [2.0], t)[0]
    f = fit_rate(cu, "log_G_one", window=window_from_G(cu, 10.0, 300.0))
    assert f.slope == pytest.approx(-1.0, rel=0.15)
