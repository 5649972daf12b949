import math
from dataclasses import replace

import numpy as np
import pytest

from viscowave.bounds import Theorem, burn_in_time, make_envelope, s_r_profile, verify
from viscowave.coefficients import make_builtin
from viscowave.energy import DataProfile, EnergyCurve, energy_curves, sobolev_norm, time_grid
from viscowave.errors import ParameterRangeError, RegimeMismatchError


def _synthetic(c, beta, t, rate, scale=1.0):
    G = np.asarray(c.G_one(t), dtype=float)
    e = scale * G ** (-0.5 * rate)
    return EnergyCurve(beta, t, e, e, G=G)


def test_T_D_example_rate():
    c = make_builtin("power", [-0.5])
    env = make_envelope(Theorem.T_D, c, 2.0, DataProfile("gaussian"))
    t = np.geomspace(1e2, 1e6, 30)
    bu = env.power_branch(t, 2.0)
    # (1 + int g)^(-beta/2) with int g = 2 (sqrt(1+t) - 1) ~ (1+t)^(1/2)
    slope = np.polyfit(np.log1p(t), np.log(bu), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.02)


def test_T_D_iterated_log_example():
    c = make_builtin("inv_t_loglog")
    env = make_envelope(Theorem.T_D, c, 2.0, DataProfile("gaussian"))
    t = np.geomspace(1e3, 1e12, 20)
    ref = np.log(np.log(math.e ** 2 + t)) ** -1.0
    ratio = env.power_branch(t, 2.0) / ref
    assert ratio.max() / ratio.min() < 3.0


def test_T_E_integral_example():
    c = make_builtin("t_over_log")
    t = np.array([1e3, 1e4, 1e5])
    approx = (math.e + t) ** 2 / np.log(math.e + t)
    ratio = np.asarray(c.int_g(t)) / approx
    assert np.all((ratio > 0.4) & (ratio < 0.7))  # -> 1/2
    make_envelope(Theorem.T_E, c, 2.0, DataProfile("gaussian"))


def test_envelope_norm_types():
    p = DataProfile("bump", a1=1.0)
    eA = make_envelope(Theorem.T_A, make_builtin("exp3"), 2.0, p)
    assert set(eA.norms) == {"u0:Hdot^2", "u1:Hdot^0"}
    eD = make_envelope(Theorem.T_D, make_builtin("power", [-0.5]), 2.0, p)
    assert eD.norms["u0:H^2"] == pytest.approx(sobolev_norm(p, "u0", 2.0, False))
    eC = make_envelope(Theorem.T_C, make_builtin("exp_neg"), 1.0, p,
                       kappa=0.1, check_regime=False)
    assert "u0:Hdot^2.1" in eC.norms


def test_envelope_errors():
    p = DataProfile("bump")
    with pytest.raises(RegimeMismatchError):
        make_envelope(Theorem.T_A, make_builtin("power", [-0.5]), 2.0, p)
    with pytest.raises(ParameterRangeError):
        make_envelope(Theorem.T_A, make_builtin("exp3"), 1.0, p)
    with pytest.raises(ParameterRangeError):
        make_envelope(Theorem.T_C, make_builtin("exp_neg"), 1.0, p, kappa=0.0,
                      check_regime=False)
    with pytest.raises(ParameterRangeError):
        Theorem.parse("T_Z")


def test_T_A_and_T_SI_shapes():
    p = DataProfile("bump", a1=1.0)
    c = make_builtin("exp3")
    env = make_envelope(Theorem.T_A, c, 2.0, p)
    t = np.array([0.0, 1.0, 2.0])
    bu, but = env(t)
    assert np.allclose(bu, bu[0]) and np.allclose(but / bu, c.g(t))
    env = make_envelope(Theorem.T_SI, make_builtin("mu_linear", [3.0]), 1.0, p)
    bu, but = env(t)
    assert np.allclose(but / bu, 1 + t)


def test_T_D_envelope_monotone_and_ordered():
    c = make_builtin("power", [-0.5])
    p = DataProfile("gaussian", a1=0.3)
    t = np.geomspace(1.0, 1e5, 60)
    envs = {b: make_envelope(Theorem.T_D, c, b, p) for b in (1.0, 2.0, 3.0)}
    for e in envs.values():
        assert np.all(np.diff(e(t)[0]) < 0)
    G = np.asarray(c.G_one(t))
    unit = {b: replace(e, norms={k: 1.0 for k in e.norms})(t)[0] for b, e in envs.items()}
    assert np.all(unit[3.0] < unit[2.0]) and np.all(unit[2.0] < unit[1.0])
    r = envs[2.0].power_branch(t, 3.0) / envs[2.0].power_branch(t, 2.0)
    assert np.allclose(r, G ** -0.5, rtol=1e-12)


def test_T_E_is_max_of_branches_with_one_crossover():
    c = make_builtin("power", [0.5])
    env = make_envelope(Theorem.T_E, c, 2.0, DataProfile("gaussian"))
    t = np.geomspace(1e-2, 1e6, 400)
    e = env.exp_branch(t)
    pw = env.power_branch(t, 2.0)
    a0, a1 = env.norms["u0:H^2"], env.norms["u1:H^1"]
    bu, _ = env(t)
    assert np.allclose(bu, np.maximum(pw, e) * a0 + np.maximum(env.power_branch(t, 1.0), e) * a1)
    assert env.branch_crossings(t).size <= 1


def test_verify_zero_data_passes():
    c = make_builtin("power", [-0.5])
    p = DataProfile("gaussian", a0=0.0)
    env = make_envelope(Theorem.T_D, c, 2.0, p)
    t = time_grid(1e3, 30)
    z = np.zeros_like(t)
    rep = verify(EnergyCurve(2.0, t, z, z, G=np.asarray(c.G_one(t))), env)
    assert rep.passed and rep.sup_ratio == 0.0


def test_verify_synthetic_pass_and_growth_fail():
    c = make_builtin("power", [-0.5])
    t = time_grid(1e5, 60)
    env = make_envelope(Theorem.T_D, c, 2.0, DataProfile("gaussian"))
    bu, but = env(t)
    G = np.asarray(c.G_one(t))
    assert verify(EnergyCurve(2.0, t, 0.5 * bu, 0.5 * but, G=G), env).passed
    # one half power of G too slow in u
    rep = verify(EnergyCurve(2.0, t, bu * G ** 0.5, 0.5 * but, G=G), env)
    assert not rep.passed and rep.slope > 0.05


def test_verify_pipeline_and_negative_control():
    c = make_builtin("power", [-0.5])
    p = DataProfile("gaussian")
    t = time_grid(1e4, 40)
    cu2, cu3 = energy_curves(c, p, [2.0, 3.0], t)
    env = make_envelope(Theorem.T_D, c, 2.0, p)
    rep = verify(cu2, env, ut_curve=cu2)
    assert rep.passed and math.isfinite(rep.sup_ratio)
    # order-2 data checked against the faster order-4 envelope
    wrong = make_envelope(Theorem.T_D, c, 4.0, p)
    neg = verify(replace(cu2, beta=4.0), wrong)
    assert not neg.passed and neg.slope > 0.05


def test_verify_rejects_mismatched_orders():
    c = make_builtin("power", [-0.5])
    t = time_grid(10.0, 12)
    env = make_envelope(Theorem.T_D, c, 2.0, DataProfile("gaussian"))
    with pytest.raises(ValueError):
        verify(_synthetic(c, 3.0, t, 3.0), env)


def test_burn_in():
    c = make_builtin("power", [-0.5])
    b = burn_in_time(c)
    assert float(c.G_one(b)) == pytest.approx(4.0, rel=1e-10)
    assert burn_in_time(make_builtin("exp_neg")) == 0.0  # G_one stays below 2


def test_s_r_zero_order_at_most_one():
    c = make_builtin("power", [0.5])
    for t in (1e-3, 10.0, 1e3, 1e5):
        assert s_r_profile(c, 0.0, t) <= 1.0


def test_s_r_small_time_is_finite():
    c = make_builtin("power", [0.5])
    assert math.isfinite(s_r_profile(c, 2.0, 1e-6))


@pytest.mark.parametrize("r_exp", [1.0, 2.0])
def test_s_r_ratio_band(r_exp):
    c = make_builtin("power", [0.5])
    vals = [s_r_profile(c, r_exp, t) for t in (10.0, 1e2, 1e3, 1e4)]
    assert max(vals) / min(vals) <= 10.0


def test_s_r_errors():
    with pytest.raises(RegimeMismatchError):
        s_r_profile(make_builtin("power", [-0.5]), 1.0, 10.0)
    with pytest.raises(ParameterRangeError):
        s_r_profile(make_builtin("power", [0.5]), -1.0, 10.0)
