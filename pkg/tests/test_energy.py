import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from viscowave.coefficients import Coefficient, make_builtin
from viscowave.energy import DataProfile, RadialGrid, energy_curve, energy_curves, \
    grid_convergence, grid_for_profile, parse_profile, solve_modes, sobolev_norm, \
    sphere_area, time_grid, total_energy
from viscowave.errors import ConfigError, DivergentNormError, ParameterRangeError


def test_gaussian_first_order_norm():
    # 4 pi int r^4 exp(-2 r^2) dr = 4 pi (3/32) sqrt(pi/2)
    exact = 4 * math.pi * 3 / 32 * math.sqrt(math.pi / 2)
    got = sobolev_norm(DataProfile("gaussian"), "u0", 1.0) ** 2
    assert math.isclose(got, exact, rel_tol=1e-10)
    assert round(got, 6) == 1.476526


def test_order_zero_norms_agree():
    p = DataProfile("gaussian")
    assert math.isclose(sobolev_norm(p, "u0", 0.0, True), sobolev_norm(p, "u0", 0.0, False),
                        rel_tol=1e-14)


def test_bump_negative_order_is_finite():
    p = DataProfile("bump")
    assert math.isfinite(sobolev_norm(p, "u0", -1.0))


def test_independent_quadrature_of_inhomogeneous_norm():
    p = DataProfile("gaussian", {"a": 0.7})
    f = lambda r: (1 + r * r) ** 1.5 * r * r * math.exp(-1.4 * r * r)
    ref = math.sqrt(4 * math.pi * integrate.quad(f, 0, math.inf, epsrel=1e-13)[0])
    assert math.isclose(sobolev_norm(p, "u0", 1.5, homogeneous=False), ref, rel_tol=1e-9)


def test_divergent_norm_at_origin():
    with pytest.raises(DivergentNormError):
        sobolev_norm(DataProfile("gaussian"), "u0", -1.5)
    with pytest.raises(DivergentNormError):
        sobolev_norm(DataProfile("powerlowcut", {"s0": -1.45}), "u0", -0.1)


def test_zero_amplitude_norm():
    assert sobolev_norm(DataProfile("gaussian"), "u1", 1.0) == 0.0


def test_sphere_areas():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_profile_parsing_and_errors():
    p = parse_profile("bump:1.5,0.5,u1=1")
    assert p.kind == "bump" and p.a1 == 1.0 and p.params == {"r0": 1.5, "w": 0.5}
    with pytest.raises(ConfigError):
        parse_profile("triangle:1")
    with pytest.raises(ConfigError):
        parse_profile("gaussian:1,2")
    with pytest.raises(ParameterRangeError):
        DataProfile("bump", {"r0": 0.2, "w": 0.5})


@pytest.mark.parametrize("kind", ["gaussian", "bump", "powerlowcut"])
def test_parseval_at_initial_time(kind):
    c = make_builtin("power", [-0.5])
    p = DataProfile(kind)
    betas = [0.0, 1.0, 2.0, 3.0]
    curves = energy_curves(c, p, betas, [0.0, 0.5], grid_for_profile(p, betas))
    for cu in curves:
        ref = sobolev_norm(p, "u0", cu.beta)
        assert abs(cu.e_u[0] - ref) <= 1e-6 * ref


def test_free_wave_conserves_mode_energy():
    zero = lambda t: 0.0 * np.asarray(t, float)
    free = Coefficient.custom("zero", zero, zero, zero)
    p = DataProfile("gaussian")
    field_ = solve_modes(free, p, np.linspace(0, 5, 6), RadialGrid.log_panels(1e-3, 12, 12, 16))
    E = total_energy(field_)
    assert np.allclose(E, E[0], rtol=1e-9)


def test_total_energy_is_nonincreasing():
    c = make_builtin("power", [-0.5])
    p = DataProfile("gaussian", a1=0.5)
    field_ = solve_modes(c, p, time_grid(50.0, 25), RadialGrid.log_panels(1e-3, 12, 12, 16))
    E = total_energy(field_)
    assert np.all(np.diff(E) <= 1e-9 * E[0])


def test_grid_convergence():
    c = make_builtin("power", [0.5])
    p = DataProfile("bump")
    cu, grid, change = grid_convergence(c, p, 2.0, [0.0, 1.0, 5.0])
    assert change < 1e-4
    assert np.all(cu.e_u >= 0)


def test_energy_predicted_decade_ratio():
    # predicted (1 + int g)^(-beta/2) with beta = 2 for the decade t = 10 -> 100
    c = make_builtin("power", [-0.5])
    cu = energy_curve(c, DataProfile("gaussian"), 2.0, [0.0, 10.0, 100.0])
    G = np.asarray(c.G_one(np.array([10.0, 100.0])))
    predicted = G[0] / G[1]
    assert abs(cu.e_u[2] / cu.e_u[1] - predicted) <= 0.3 * predicted


def test_deterministic_across_thread_counts():
    c = make_builtin("power", [0.5])
    p = DataProfile("gaussian")
    grid = RadialGrid.log_panels(1e-3, 12, 8, 16)
    t = [0.0, 1.0, 10.0]
    a = solve_modes(c, p, t, grid, threads=1, chunk=16)
    b = solve_modes(c, p, t, grid, threads=4, chunk=16)
    assert np.array_equal(a.w, b.w) and np.array_equal(a.sigma, b.sigma)


def test_time_grid():
    t = time_grid(100.0, 5)
    assert t[0] == 0.0 and t[-1] == 100.0 and t.size == 6
    with pytest.raises(ConfigError):
        time_grid(-1.0)
    with pytest.raises(ConfigError):
        time_grid(1.0, spacing="cubic")


def test_negative_order_rejected():
    c = make_builtin("const", [1.0])
    with pytest.raises(ParameterRangeError):
        energy_curve(c, DataProfile("bump"), -1.0, [0.0, 1.0])


@settings(max_examples=15, deadline=None)
@given(s=st.floats(0.0, 3.0), a=st.floats(0.3, 3.0))
def test_gaussian_moments_closed_form(s, a):
    # int r^(2s+2) exp(-2a r^2) dr = Gamma(s + 3/2) / (2 (2a)^(s + 3/2))
    p = DataProfile("gaussian", {"a": a})
    exact = 4 * math.pi * math.gamma(s + 1.5) / (2 * (2 * a) ** (s + 1.5))
    assert math.isclose(sobolev_norm(p, "u0", s) ** 2, exact, rel_tol=1e-9)


def test_higher_order_weights_more_high_frequencies():
    p = DataProfile("bump")  # supported in [1, 2]
    norms = [sobolev_norm(p, "u0", b) for b in (0.0, 1.0, 2.0, 3.0)]
    assert np.all(np.diff(norms) > 0)
