"""Command-line front end.

Every subcommand reads an optional config file (INI with flat sections, or
JSON), applies command-line overrides, and writes its artifacts as
``<subcommand>-<hash>.<ext>`` in the output directory, where ``<hash>`` is
derived from the effective configuration.  A JSON summary goes to stdout.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 numerical failure.  ``VISCOWAVE_THREADS`` sets the worker count of
energy sweeps.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .artifacts import config_hash, json_text, new_figure, write_csv, write_json, write_svg
from .bounds import Theorem, make_envelope, theorem_for_regime, verify
from .coefficients import Regime, catalog, parse_coefficient
from .decay_fit import Abscissa, default_abscissa, parabolic_effect
from .energy import RadialGrid, energy_curves, grid_for_profile, parse_profile, time_grid
from .errors import ConfigError, FitError, NoCrossingError, NumericalError, ViscowaveError, \
    ZoneViolationError
from .mode_solver import Method, SolverConfig
from .phase_space import CODE_LABELS, ZoneConstants, curve_specs, separating_line, zone_grid

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt_float(text):
    return None if text in (None, "") else float(text)


def _pos(conv):
    def check(text):
        x = conv(text)
        if not x > 0:
            raise ValueError(f"must be positive, got {text!r}")
        return x
    return check


# (section, key) -> (converter, default)
SCHEMA = {
    ("experiment", "coefficient"): (str, "power:-0.5"),
    ("experiment", "regime"): (str, ""),
    ("experiment", "profile"): (str, "gaussian"),
    ("experiment", "betas"): (_floats, "2"),
    ("experiment", "theorem"): (str, ""),
    ("experiment", "seed"): (int, "0"),
    ("time", "t_max"): (_pos(float), "1000"),
    ("time", "points"): (_pos(int), "60"),
    ("time", "spacing"): (str, "log"),
    ("time", "t_min"): (_pos(float), "0.01"),
    ("rgrid", "adaptive"): (_bool, "true"),
    ("rgrid", "r_min"): (_pos(float), "0.001"),
    ("rgrid", "r_max"): (_opt_float, ""),
    ("rgrid", "panels"): (_pos(int), "24"),
    ("rgrid", "nodes"): (_pos(int), "16"),
    ("solver", "rel_tol"): (_pos(float), "1e-9"),
    ("solver", "method"): (str, "FrozenExponential"),
    ("solver", "extinction"): (float, "1e-40"),
    ("zones", "N"): (float, "100"),
    ("zones", "eps"): (float, "0.1"),
    ("zones", "rmin"): (_pos(float), "0.01"),
    ("zones", "rmax"): (_pos(float), "100"),
    ("zones", "grid"): (_pos(int), "200"),
    ("verify", "C_cal"): (_pos(float), "0.25"),
    ("verify", "kappa"): (float, "0.05"),
    ("verify", "R_max"): (_pos(float), "10"),
    ("verify", "slope_max"): (float, "0.05"),
    ("verify", "burn_in"): (_opt_float, ""),
    ("fit", "abscissa"): (str, ""),
    ("fit", "window"): (_floats, ""),
    ("fit", "min_gap"): (float, "0.02"),
    ("wkb", "r"): (_pos(float), "0.1"),
    ("wkb", "window"): (_floats, "0,50"),
    ("wkb", "kind"): (str, "hyperbolic"),
    ("wkb", "points"): (_pos(int), "51"),
    ("wkb", "u0"): (float, "1"),
    ("wkb", "u1"): (float, "0"),
    ("output", "dir"): (str, "viscowave-out"),
}

# keys that identify the output location rather than the experiment
_NOT_HASHED = {("output", "dir")}


@dataclass
class ExperimentConfig:
    """Validated settings; ``values[(section, key)]`` holds typed values."""

    values: dict
    sources: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def hashed(self, keys=None) -> dict:
        keys = keys or self.values
        return {f"{s}.{k}": self.values[(s, k)] for (s, k) in sorted(keys)
                if (s, k) not in _NOT_HASHED}

    @property
    def out_dir(self) -> Path:
        return Path(self.values[("output", "dir")])

    def zone_constants(self) -> ZoneConstants:
        return ZoneConstants(N=self[("zones", "N")], eps=self[("zones", "eps")])

    def solver(self) -> SolverConfig:
        return SolverConfig(rel_tol=self[("solver", "rel_tol")],
                            method=Method.parse(self[("solver", "method")]),
                            extinction=self[("solver", "extinction")])

    def coefficient(self):
        reg = self[("experiment", "regime")] or None
        return parse_coefficient(self[("experiment", "coefficient")], regime=reg)

    def profile(self):
        return parse_profile(self[("experiment", "profile")])

    def times(self):
        return time_grid(self[("time", "t_max")], self[("time", "points")],
                         self[("time", "spacing")], self[("time", "t_min")])

    def rgrid(self, p, betas) -> RadialGrid:
        if self[("rgrid", "adaptive")]:
            return grid_for_profile(p, betas, r_min=self[("rgrid", "r_min")],
                                    panels=self[("rgrid", "panels")],
                                    nodes=self[("rgrid", "nodes")])
        hi = self[("rgrid", "r_max")] or p.support()[1]
        q0 = p.origin_power()
        alpha = 2.0 * q0 + p.n - 1 if q0 < math.inf else None
        return RadialGrid.log_panels(self[("rgrid", "r_min")], hi, self[("rgrid", "panels")],
                                     self[("rgrid", "nodes")], origin_alpha=alpha)


def _scan_lines(text: str) -> dict:
    """Line numbers of ``key = value`` entries per section (INI files)."""
    where, sec = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip()
        elif sec and s and not s.startswith(("#", ";")):
            for sep in ("=", ":"):
                if sep in s:
                    where[(sec, s.split(sep, 1)[0].strip())] = i
                    break
    return where


def read_config_file(path) -> tuple:
    """Raw ``{(section, key): text}`` and a ``{(section, key): origin}`` map."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw, origin = {}, {}
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        for sec, body in doc.items():
            if isinstance(body, dict):
                for k, v in body.items():
                    raw[(sec, k)] = v
                    origin[(sec, k)] = f"{path}: field '{sec}.{k}'"
            elif "." in sec:
                s, k = sec.split(".", 1)
                raw[(s, k)] = body
                origin[(s, k)] = f"{path}: field '{sec}'"
            else:
                raise ConfigError(f"{path}: field '{sec}' must be a section object")
        return raw, origin
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}".replace("\n", " ")) from None
    lines = _scan_lines(text)
    for sec in cp.sections():
        for k, v in cp.items(sec):
            raw[(sec, k)] = v
            origin[(sec, k)] = f"{path}:{lines.get((sec, k), '?')}: field '{sec}.{k}'"
    return raw, origin


def build_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Merge defaults, file entries and overrides, then type-check."""
    raw = {k: v[1] for k, v in SCHEMA.items()}
    origin = {k: f"default '{k[0]}.{k[1]}'" for k in SCHEMA}
    if path is not None:
        r, o = read_config_file(path)
        for key in r:
            if key not in SCHEMA:
                raise ConfigError(f"{o[key]}: unknown field")
        raw.update(r)
        origin.update(o)
    for key, v in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown field '{key[0]}.{key[1]}'")
        raw[key] = v
        origin[key] = f"command line: field '{key[0]}.{key[1]}'"
    values = {}
    for key, (conv, _) in SCHEMA.items():
        try:
            values[key] = conv(raw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{origin[key]}: {exc}") from None
    return ExperimentConfig(values, origin)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, *groups):
    p.add_argument("--config", help="INI or JSON config file")
    p.add_argument("--out", dest="output.dir", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config field")
    if "coef" in groups:
        p.add_argument("--coeff", dest="experiment.coefficient", help="coefficient, e.g. power:-0.5")
        p.add_argument("--regime", dest="experiment.regime", help="override the regime tag")
    if "data" in groups:
        p.add_argument("--profile", dest="experiment.profile", help="data profile, e.g. gaussian:1")
        p.add_argument("--beta", dest="experiment.betas", help="order(s), comma separated")
        p.add_argument("--tmax", dest="time.t_max")
        p.add_argument("--points", dest="time.points")
        p.add_argument("--spacing", dest="time.spacing", choices=["log", "linear"])
        p.add_argument("--rel-tol", dest="solver.rel_tol")
        p.add_argument("--rmin", dest="rgrid.r_min")
        p.add_argument("--rmax", dest="rgrid.r_max")
    if "zones" in groups:
        p.add_argument("--N", dest="zones.N")
        p.add_argument("--eps", dest="zones.eps")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="viscowave", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"viscowave {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("coeffs", help="list the coefficient catalog", formatter_class=fmt,
                       description="Catalog of damping coefficients.\n\n"
                                   "JSON artifact: list of {id, formula, regime, params, "
                                   "defaults, ranges}.")
    p.add_argument("action", choices=["list"])
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    _common(p)

    p = sub.add_parser("zones", help="zone map of the extended phase space", formatter_class=fmt,
                       description="Classify a (t, r) grid into zones.\n\n"
                                   "CSV columns: t, r, label.  SVG: zone map with boundaries.")
    _common(p, "coef", "zones")
    p.add_argument("--tmax", dest="time.t_max")
    p.add_argument("--rmin", dest="zones.rmin")
    p.add_argument("--rmax", dest="zones.rmax")
    p.add_argument("--grid", dest="zones.grid", help="points per axis")

    p = sub.add_parser("simulate", help="energy curves", formatter_class=fmt,
                       description="Higher-order energies || |D|^beta u(t) ||.\n\n"
                                   "CSV columns: t, beta, e_u, e_ut (e_u = |||D|^beta u||_L2, "
                                   "e_ut = |||D|^beta u_t||_L2).  JSON: metadata.")
    _common(p, "coef", "data")

    p = sub.add_parser("verify", help="compare energies with a decay estimate",
                       formatter_class=fmt,
                       description="Ratio of measured energies to an estimate.\n\n"
                                   "CSV columns: t, beta, e_u, e_ut, bound_u, bound_ut, R_u, R_ut "
                                   "(R = measured / bound, blank before burn-in).\n"
                                   "JSON: {sup_ratio, slope, pass, curve_csv_path, reports}.\n"
                                   "Exit status 1 when the check fails.")
    _common(p, "coef", "data")
    p.add_argument("--theorem", dest="experiment.theorem", help="T_A, T_B, T_C, T_D, T_E or T_SI")
    p.add_argument("--C", dest="verify.C_cal", help="constant in exp(-C int 1/g)")
    p.add_argument("--R-max", dest="verify.R_max")
    p.add_argument("--burn-in", dest="verify.burn_in")

    p = sub.add_parser("fit", help="decay rates and the parabolic verdict", formatter_class=fmt,
                       description="Least-squares decay rates per order.\n\n"
                                   "CSV columns: t, beta, e_u, e_ut, bound_u.  JSON: {slopes, "
                                   "stderrs, verdict, ...}.  SVG: log-log overlay of curves "
                                   "and envelopes.")
    _common(p, "coef", "data")
    p.add_argument("--abscissa", dest="fit.abscissa", choices=[a.value for a in Abscissa])
    p.add_argument("--window", dest="fit.window", help="t_lo,t_hi")

    p = sub.add_parser("wkb-compare", help="WKB surrogate against direct integration",
                       formatter_class=fmt,
                       description="Direct solution versus a WKB surrogate.\n\n"
                                   "CSV columns: t, direct, surrogate, ratio (micro-energy "
                                   "sizes, ratio = direct / surrogate).")
    _common(p, "coef", "zones")
    p.add_argument("--r", dest="wkb.r")
    p.add_argument("--window", dest="wkb.window", help="s,t")
    p.add_argument("--kind", dest="wkb.kind", choices=["hyperbolic", "elliptic_sec3"])
    p.add_argument("--points", dest="wkb.points")

    p = sub.add_parser("selftest", help="run the invariant suites", formatter_class=fmt,
                       description="Run every invariant suite.\n\n"
                                   "JSON: {suites: {name: {pass, details, error}}, pass, count}.\n"
                                   "Exit status 1 when a suite fails.")
    _common(p)
    p.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    return ap


def _overrides(ns: argparse.Namespace) -> dict:
    out = {}
    for name, val in vars(ns).items():
        if "." in name and val is not None:
            s, k = name.split(".", 1)
            out[(s, k)] = val
    for item in ns.set or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        lhs, val = item.split("=", 1)
        s, k = lhs.strip().split(".", 1)
        out[(s, k)] = val.strip()
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _artifact(cfg: ExperimentConfig, command: str, keys, ext: str, extra=None) -> Path:
    h = config_hash({"command": command, "config": cfg.hashed(keys), "extra": extra})
    return cfg.out_dir / f"{command}-{h}.{ext}"


def _keys(*sections):
    return [k for k in SCHEMA if k[0] in sections]


_DATA_KEYS = ("experiment", "time", "rgrid", "solver")


def cmd_coeffs(cfg, ns) -> tuple:
    rows = [e.to_dict() for e in catalog()]
    path = _artifact(cfg, "coeffs", [], "json")
    write_json(path, rows)
    if ns.json:
        sys.stdout.write(json_text(rows))
    else:
        table = [(r["id"], r["formula"], r["regime"], ",".join(r["params"]) or "-",
                  r["ranges"]) for r in rows]
        head = ("id", "formula", "regime", "params", "ranges")
        widths = [max(len(x[i]) for x in table + [head]) for i in range(4)]
        for line in [head] + table:
            cells = [line[i].ljust(widths[i]) for i in range(4)] + [line[4]]
            sys.stdout.write("  ".join(cells).rstrip() + "\n")
    return EXIT_OK, {"json_path": str(path)}


def cmd_zones(cfg, ns) -> tuple:
    c = cfg.coefficient()
    reg = c.regime
    consts = cfg.zone_constants()
    n = cfg[("zones", "grid")]
    tmax = cfg[("time", "t_max")]
    t = np.linspace(0.0, tmax, n)
    r = np.geomspace(cfg[("zones", "rmin")], cfg[("zones", "rmax")], n)
    codes = zone_grid(reg, c, t, r, consts)
    keys = _keys("experiment", "zones") + [("time", "t_max")]
    csv_path = _artifact(cfg, "zones", keys, "csv")
    svg_path = csv_path.with_suffix(".svg")
    rows = ((t[i], r[j], CODE_LABELS[int(codes[i, j])].value)
            for i in range(n) for j in range(n))
    meta = {"coefficient": c.label, "regime": reg.value, "N": consts.N, "eps": consts.eps}
    write_csv(csv_path, ["t", "r", "label"], rows, meta)

    fig, ax = new_figure()
    from matplotlib.colors import ListedColormap
    cmap = ListedColormap(["#d9ecff", "#fff2cc", "#e2f0d9", "#f4cccc"])
    ax.pcolormesh(r, t, codes, cmap=cmap, vmin=-0.5, vmax=3.5, shading="auto")
    ax.set_xscale("log")
    curves = {}
    for spec in curve_specs(reg, consts):
        pts = []
        for rr in r[:: max(1, n // 100)]:
            try:
                tc = separating_line(reg, c, spec.name, float(rr), consts, t_max=tmax)
            except NoCrossingError:
                continue
            if 0 < tc <= tmax:
                pts.append((rr, tc))
        if pts:
            a = np.array(pts)
            ax.plot(a[:, 0], a[:, 1], lw=1.2, label=spec.name)
        curves[spec.name] = len(pts)
    ax.set_xlabel("r = |xi|")
    ax.set_ylabel("t")
    ax.set_title(f"zones for {c.label} (regime {reg.value})")
    if curves:
        ax.legend(loc="best", fontsize=8)
    write_svg(svg_path, fig)
    counts = {CODE_LABELS[k].value: int((codes == k).sum()) for k in CODE_LABELS}
    return EXIT_OK, {"csv_path": str(csv_path), "svg_path": str(svg_path), "counts": counts}


def _curves(cfg, betas):
    c = cfg.coefficient()
    p = cfg.profile()
    times = cfg.times()
    grid = cfg.rgrid(p, betas)
    curves = energy_curves(c, p, betas, times, grid, cfg.solver())
    return c, p, times, grid, curves


def _meta(cfg, c, p, grid):
    return {"coefficient": c.label, "regime": c.regime.value, "profile": p.to_dict(),
            "rgrid": {"nodes": int(grid.size), "r_min": float(grid.r.min()),
                      "r_max": float(grid.r.max()), "panels": int(grid.edges.size - 1)},
            "solver": cfg.solver().to_dict(),
            "time": {"t_max": cfg[("time", "t_max")], "points": cfg[("time", "points")],
                     "spacing": cfg[("time", "spacing")]}}


def cmd_simulate(cfg, ns) -> tuple:
    betas = cfg[("experiment", "betas")]
    if not betas:
        raise ConfigError("field 'experiment.betas': need at least one order")
    c, p, times, grid, curves = _curves(cfg, betas)
    keys = _keys(*_DATA_KEYS)
    csv_path = _artifact(cfg, "simulate", keys, "csv")
    json_path = csv_path.with_suffix(".json")
    rows = [row for cu in curves for row in cu.to_rows()]
    write_csv(csv_path, ["t", "beta", "e_u", "e_ut"], rows)
    meta = _meta(cfg, c, p, grid)
    meta["csv_path"] = csv_path.name
    write_json(json_path, meta)
    return EXIT_OK, {"csv_path": str(csv_path), "json_path": str(json_path)}


def cmd_verify(cfg, ns) -> tuple:
    c = cfg.coefficient()
    tag = cfg[("experiment", "theorem")]
    th = Theorem.parse(tag) if tag else theorem_for_regime(c.regime)
    betas = cfg[("experiment", "betas")]
    p = cfg.profile()
    envs = [make_envelope(th, c, b, p, C_cal=cfg[("verify", "C_cal")],
                          kappa=cfg[("verify", "kappa")]) for b in betas]
    orders = sorted(set(betas) | {e.ut_order for e in envs})
    c, p, times, grid, curves = _curves(cfg, orders)
    by = {cu.beta: cu for cu in curves}
    reports, rows = [], []
    for env in envs:
        rep = verify(by[env.beta], env, cfg[("verify", "burn_in")], by[env.ut_order],
                     cfg[("verify", "R_max")], cfg[("verify", "slope_max")])
        reports.append(rep)
        bu, but = env(times)
        cu, cut = by[env.beta], by[env.ut_order]
        for i, tt in enumerate(times):
            after = tt >= rep.burn_in
            ru = cu.e_u[i] / bu[i] if after and bu[i] > 0 else ""
            rt = cut.e_ut[i] / but[i] if after and but[i] > 0 else ""
            rows.append((tt, env.beta, cu.e_u[i], cut.e_ut[i], bu[i], but[i], ru, rt))
    keys = _keys(*_DATA_KEYS, "verify")
    csv_path = _artifact(cfg, "verify", keys, "csv", th.value)
    json_path = csv_path.with_suffix(".json")
    write_csv(csv_path, ["t", "beta", "e_u", "e_ut", "bound_u", "bound_ut", "R_u", "R_ut"], rows)
    ok = all(r.passed for r in reports)
    doc = {"theorem": th.value, "sup_ratio": max(r.sup_ratio for r in reports),
           "slope": max(r.slope for r in reports), "pass": ok,
           "curve_csv_path": csv_path.name, "reports": [r.to_dict() for r in reports],
           "envelopes": [e.to_dict() for e in envs], **_meta(cfg, c, p, grid)}
    write_json(json_path, doc)
    return (EXIT_OK if ok else EXIT_FAIL), {"json_path": str(json_path),
                                             "csv_path": str(csv_path), "pass": ok,
                                             "sup_ratio": doc["sup_ratio"], "slope": doc["slope"]}


def cmd_fit(cfg, ns) -> tuple:
    if ("experiment", "betas") not in _explicit(cfg):
        cfg.values[("experiment", "betas")] = [1.0, 2.0, 3.0]
    betas = cfg[("experiment", "betas")]
    c, p, times, grid, curves = _curves(cfg, betas)
    absc = Abscissa.parse(cfg[("fit", "abscissa")]) if cfg[("fit", "abscissa")] \
        else default_abscissa(c.regime)
    win = cfg[("fit", "window")] or None
    if win is not None and len(win) != 2:
        raise ConfigError("field 'fit.window': expected t_lo,t_hi")
    rep = parabolic_effect(curves, absc, win, cfg[("fit", "min_gap")])
    envs = {}
    try:
        th = Theorem.parse(cfg[("experiment", "theorem")]) if cfg[("experiment", "theorem")] \
            else theorem_for_regime(c.regime)
        for b in betas:
            try:
                envs[b] = make_envelope(th, c, b, p)
            except ViscowaveError:
                pass
    except ViscowaveError:
        th = None
    keys = _keys(*_DATA_KEYS, "fit")
    json_path = _artifact(cfg, "fit", keys, "json")
    csv_path, svg_path = json_path.with_suffix(".csv"), json_path.with_suffix(".svg")
    rows = []
    for cu in curves:
        bu = envs[cu.beta](times)[0] if cu.beta in envs else np.full(times.size, np.nan)
        rows += [(tt, cu.beta, cu.e_u[i], cu.e_ut[i], bu[i]) for i, tt in enumerate(times)]
    write_csv(csv_path, ["t", "beta", "e_u", "e_ut", "bound_u"], rows)
    fig, ax = new_figure()
    m = times > 0
    for k, cu in enumerate(curves):
        col = f"C{k}"
        ax.loglog(times[m], cu.e_u[m], color=col, label=f"beta={cu.beta:g}")
        if cu.beta in envs:
            ax.loglog(times[m], envs[cu.beta](times[m])[0], color=col, ls="--", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("|| |D|^beta u(t) ||")
    ax.set_title(f"{c.label}: {rep.verdict.value}"
                 + (f" (dashed: {th.value} envelope)" if envs else ""))
    ax.legend(fontsize=8)
    write_svg(svg_path, fig)
    doc = {**rep.to_dict(), "abscissa": absc.value, "window": win,
           "fits": [f.to_dict() for f in rep.fits], "csv_path": csv_path.name,
           "svg_path": svg_path.name, **_meta(cfg, c, p, grid)}
    write_json(json_path, doc)
    return EXIT_OK, {"json_path": str(json_path), "svg_path": str(svg_path),
                     "slopes": rep.slopes, "stderrs": rep.stderrs, "verdict": rep.verdict.value}


def _explicit(cfg) -> set:
    return {k for k, o in cfg.sources.items() if not o.startswith("default")}


def cmd_wkb(cfg, ns) -> tuple:
    from .wkb import compare_surrogate
    c = cfg.coefficient()
    win = cfg[("wkb", "window")]
    if len(win) != 2 or not win[0] < win[1] or win[0] < 0:
        raise ConfigError("field 'wkb.window': expected 0 <= s < t as s,t")
    s, t = win
    times = np.linspace(s, t, cfg[("wkb", "points")])
    cmp_ = compare_surrogate(c, cfg[("wkb", "r")], s, times, cfg[("wkb", "kind")],
                             cfg[("wkb", "u0")], cfg[("wkb", "u1")], cfg.zone_constants())
    keys = _keys("experiment", "zones", "wkb")
    csv_path = _artifact(cfg, "wkb-compare", keys, "csv")
    write_csv(csv_path, ["t", "direct", "surrogate", "ratio"], cmp_.rows(),
              {"coefficient": c.label, "kind": cmp_.kind, "r": cmp_.r})
    return EXIT_OK, {"csv_path": str(csv_path), "ratio_min": float(cmp_.ratio.min()),
                     "ratio_max": float(cmp_.ratio.max())}


def cmd_selftest(cfg, ns) -> tuple:
    from .selftest import SUITES, run_all
    names = ns.suite or None
    if names:
        bad = [n for n in names if n not in SUITES]
        if bad:
            raise ConfigError(f"unknown suite(s) {bad}; available: {sorted(SUITES)}")
    summary = run_all(names)
    path = _artifact(cfg, "selftest", [], "json", names)
    write_json(path, summary)
    sys.stdout.write(json_text(summary))
    return (EXIT_OK if summary["pass"] else EXIT_FAIL), {"json_path": str(path),
                                                         "pass": summary["pass"]}


COMMANDS = {"coeffs": cmd_coeffs, "zones": cmd_zones, "simulate": cmd_simulate,
            "verify": cmd_verify, "fit": cmd_fit, "wkb-compare": cmd_wkb,
            "selftest": cmd_selftest}


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand and return its exit status."""
    parser = make_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = build_config(ns.config, _overrides(ns))
        status, info = COMMANDS[ns.command](cfg, ns)
    except (ConfigError, ZoneViolationError) as exc:
        sys.stderr.write(f"viscowave {ns.command}: error: {exc}\n")
        return EXIT_USAGE
    except (NumericalError, FitError, NoCrossingError) as exc:
        sys.stderr.write(f"viscowave {ns.command}: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    if ns.command not in ("coeffs", "selftest"):
        sys.stdout.write(json_text(info))
    else:
        sys.stderr.write(json_text(info))
    return status


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
