"""Fast invariant suites run by ``viscowave selftest``.

Every suite returns ``(passed, details)``; :func:`run_all` collects them
into a JSON-ready summary.  The suites are quick versions of the property
tests in the test tree.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Callable

import numpy as np

from .bounds import Theorem, make_envelope, s_r_profile
from .coefficients import make_builtin
from .decay_fit import fit_rate, parabolic_effect
from .energy import DataProfile, EnergyCurve, RadialGrid, energy_curves, sobolev_norm
from .mode_solver import SolverConfig, dissipation_residual, integrate_mode, \
    integrate_transformed, transformed_initial_data
from .phase_space import ZoneConstants, classify_many, curve_specs, indicator, \
    separating_line, LABEL_CODES
from .errors import NoCrossingError
from .wkb import eigen, sample_zone, symbol_constant


def closed_form_mode(g: float, r: float, u0: complex, u1: complex, t):
    """Constant coefficient oracle from the characteristic roots."""
    t = np.asarray(t, dtype=float)
    b, c = g * r * r, r * r
    s = np.sqrt(complex(b * b / 4.0 - c))
    if abs(s) < 1e-12:
        lam = -b / 2.0
        u = (u0 + (u1 - lam * u0) * t) * np.exp(lam * t)
        ut = (lam * u0 + (u1 - lam * u0) * (1 + lam * t)) * np.exp(lam * t)
        return u, ut
    l1, l2 = -b / 2.0 + s, -b / 2.0 - s
    A = (u1 - l2 * u0) / (l1 - l2)
    B = (l1 * u0 - u1) / (l1 - l2)
    return (A * np.exp(l1 * t) + B * np.exp(l2 * t),
            A * l1 * np.exp(l1 * t) + B * l2 * np.exp(l2 * t))


def suite_oracle():
    t = np.linspace(0.0, 10.0, 41)
    worst = 0.0
    for g in (0.5, 1.0, 2.0):
        c = make_builtin("const", [g])
        for r in (0.1, 1.0, 3.0, 10.0):
            tr = integrate_mode(c, r, 1.0, 0.5, SolverConfig(), times=t)
            u, ut = closed_form_mode(g, r, 1.0, 0.5, t)
            scale = np.maximum(np.hypot(np.abs(u) * max(r, 1.0), np.abs(ut)), 1e-300)
            err = np.hypot(np.abs(tr.u - u) * max(r, 1.0), np.abs(tr.ut - ut)) / scale
            worst = max(worst, float(err[np.abs(u) > 1e-200].max()))
    return worst <= 1e-7, {"max_rel_error": worst, "tol": 1e-7}


def suite_transform():
    t = np.linspace(0.0, 10.0, 41)
    c = make_builtin("power", [-0.5])
    worst = 0.0
    for r in (0.5, 2.0):
        d = integrate_mode(c, r, 1.0, 0.3, times=t)
        v0, v1 = transformed_initial_data(c, r, 1.0, 0.3)
        b = integrate_transformed(c, r, v0, v1, times=t).to_direct(c)
        amp = np.hypot(np.abs(d.u), np.abs(d.ut) / r)
        worst = max(worst, float(np.max(np.abs(b.u - d.u) / amp)))
    return worst <= 1e-6, {"max_rel_error": worst, "tol": 1e-6}


def suite_dissipation():
    rng = np.random.default_rng(7)
    ids = [("power", [-0.5]), ("power", [0.5]), ("exp3", []), ("const", [1.0])]
    worst = 0.0
    t = np.linspace(0.0, 5.0, 201)
    for k in range(4):
        cid, par = ids[k % len(ids)]
        c = make_builtin(cid, par)
        r = float(10 ** rng.uniform(-1, 0.7))
        u0, u1 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        tr = integrate_mode(c, r, u0, u1, SolverConfig(), times=t)
        worst = max(worst, dissipation_residual(tr, c))
    return worst <= 1e-6, {"max_residual": worst, "tol": 1e-6}


def suite_eigen():
    out, ok = {}, True
    for cid, par in (("power", [-0.5]), ("power", [0.5])):
        c = make_builtin(cid, par)
        t, r = sample_zone(c, 10_000, seed=1, t_range=(0.0, 100.0))
        e = eigen(c, t, r)
        err = e.identity_errors()
        sw = e.sandwich()
        good = (err["sum"].max() <= 1e-12 and err["product"].max() <= 1e-12
                and all(v.all() for v in sw.values()))
        ok &= bool(good)
        out[c.label] = {"sum": float(err["sum"].max()), "product": float(err["product"].max()),
                        "sandwich": bool(all(v.all() for v in sw.values()))}
    return ok, out


def suite_zones():
    consts = ZoneConstants(N=4.0)
    cases = {"A": ("exp3", []), "B": ("power", [-2.0]), "D": ("power", [-0.5]),
             "E": ("power", [0.5])}
    worst, ok = 0.0, True
    for tag, (cid, par) in cases.items():
        c = make_builtin(cid, par)
        specs = curve_specs(tag, consts)
        for r in np.geomspace(0.05, 20.0, 12):
            last = 0.0
            for s in specs:
                try:
                    tc = separating_line(tag, c, s.name, float(r), consts, t_max=1e4)
                except NoCrossingError:
                    continue
                if tc > 0:
                    res = abs(float(indicator(tag, c, tc, r)) - s.level) / max(1.0, abs(s.level))
                    worst = max(worst, res)
                    # labels on both sides of the crossing
                    lo, hi = classify_many(tag, c, [tc * (1 - 1e-6), tc * (1 + 1e-6)], [r, r], consts)
                    ok &= bool(lo == LABEL_CODES[s.earlier] and hi == LABEL_CODES[s.later])
                ok &= tc >= last
                last = max(last, tc)
        codes = classify_many(tag, c, *np.meshgrid(np.linspace(0, 50, 40),
                                                   np.geomspace(0.01, 50, 40)), consts)
        ok &= bool(np.isin(codes, list(LABEL_CODES.values())).all())
    return ok and worst <= 1e-10, {"max_boundary_residual": worst}


def suite_parseval():
    c = make_builtin("const", [1.0])
    worst = 0.0
    for p in (DataProfile("gaussian"), DataProfile("bump")):
        grid = RadialGrid.log_panels(1e-3, p.support()[1], 24, 16)
        curves = energy_curves(c, p, [0.0, 1.0, 2.0, 3.0], [0.0, 0.1], grid)
        for cu in curves:
            ref = sobolev_norm(p, "u0", cu.beta)
            worst = max(worst, abs(cu.e_u[0] - ref) / ref)
    return worst <= 1e-6, {"max_rel_error": worst}


def suite_fit():
    t = np.linspace(0.0, 50.0, 40)
    G = 1.0 + t
    cu = EnergyCurve(2.0, t, 1.0 / G, 1.0 / G, G=G)
    s = fit_rate(cu, "log_G_one").slope
    s2 = fit_rate(EnergyCurve(2.0, t, 7.0 / G, 1.0 / G, G=G), "log_G_one").slope
    curves = [EnergyCurve(b, t, G ** (-b / 2), G ** (-b / 2), G=G) for b in (1.0, 2.0, 3.0)]
    v1 = parabolic_effect(curves, "log_G_one").verdict
    v2 = parabolic_effect(curves[::-1], "log_G_one").verdict
    ok = abs(s + 1) <= 1e-10 and abs(s - s2) <= 1e-12 and v1 == v2
    return ok, {"slope": s, "verdict": v1.value}


def suite_envelopes():
    c = make_builtin("power", [-0.5])
    p = DataProfile("gaussian")
    t = np.geomspace(1.0, 1e4, 40)
    e2 = make_envelope(Theorem.T_D, c, 2.0, p)
    e3 = make_envelope(Theorem.T_D, c, 3.0, p)
    mono = bool(np.all(np.diff(e2(t)[0]) < 0))
    G = np.asarray(c.G_one(t))
    # with unit norms the orders compare through the time factors alone
    unit = {k: 1.0 for k in e2.norms}
    b2 = replace(e2, norms=unit)(t)[0]
    b3 = replace(e3, norms={k: 1.0 for k in e3.norms})(t)[0]
    ratio = e2.power_branch(t, 3.0) / e2.power_branch(t, 2.0)
    ordered = bool(np.all((b3 < b2) | (G <= 1))) and bool(np.allclose(ratio, G ** -0.5, rtol=1e-12))
    ce = make_builtin("power", [0.5])
    s0 = max(s_r_profile(ce, 0.0, tt) for tt in (10.0, 100.0, 1000.0))
    return mono and ordered and s0 <= 1.0, {"monotone": mono, "ordered": ordered,
                                           "s_r0_max": s0}


def suite_symbols():
    c = make_builtin("exp3")
    t, r = np.meshgrid(np.linspace(0.5, 5.0, 30), np.geomspace(1.0, 100.0, 30))
    k0 = symbol_constant(c, "gamma", 1.0, 0.0, 0, (t, r), weight="A")
    cd = make_builtin("power", [-0.5])
    km = symbol_constant(cd, "m", 2.0, 1.0, 0,
                         (np.linspace(0.0, 50, 40)[:, None], np.geomspace(5, 50, 20)[None, :]),
                         weight="D", m3=1.0, zone=None)
    ok = abs(k0 - 0.5) <= 1e-12 and km <= 0.25 * (1 + 1e-9)
    return ok, {"gamma_constant": k0, "m_constant": km}


SUITES: dict[str, Callable] = {
    "oracle_constant_g": suite_oracle,
    "transform_equivalence": suite_transform,
    "dissipation_identity": suite_dissipation,
    "eigen_identities": suite_eigen,
    "zone_geometry": suite_zones,
    "parseval_t0": suite_parseval,
    "fit_synthetic": suite_fit,
    "envelopes": suite_envelopes,
    "symbol_constants": suite_symbols,
}


def run_all(names=None) -> dict:
    """Run the selected suites; exceptions count as failures."""
    names = list(SUITES) if names is None else list(names)
    results = {}
    for name in names:
        try:
            ok, details = SUITES[name]()
            err = None
        except Exception as exc:  # reported, not raised
            ok, details, err = False, {}, f"{type(exc).__name__}: {exc}"
        results[name] = {"pass": bool(ok), "details": details, "error": err}
    return {"suites": results, "pass": all(v["pass"] for v in results.values()),
            "count": len(results)}


__all__ = ["SUITES", "run_all", "closed_form_mode"]
