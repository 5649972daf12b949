"""Energy norms of radial solutions assembled from Fourier modes.

Data are radial, so ``|D|^beta u(t)`` has Fourier transform
``r^beta u_hat(t, r)`` and

    || |D|^beta u(t) ||^2 = omega_{n-1} int_0^inf r^(2 beta + n - 1) |u_hat(t, r)|^2 dr

with ``omega_{n-1}`` the area of the unit sphere.  Each ``u_hat(., r)`` is
one mode of :mod:`viscowave.mode_solver`; the radial integral is a
composite Gauss-Legendre rule.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn, logsumexp, roots_jacobi

from .coefficients import Coefficient
from .errors import ConfigError, DivergentNormError, NumericalError, ParameterRangeError
from .mode_solver import Method, SolverConfig, integrate_batch, _check_times


def sphere_area(n: int) -> float:
    """Area of the unit sphere in ``R^n`` (``2`` for ``n = 1``)."""
    return 2.0 * math.pi ** (n / 2) / gamma_fn(n / 2)


# ---------------------------------------------------------------------------
# data profiles
# ---------------------------------------------------------------------------

_KINDS = ("gaussian", "bump", "powerlowcut")
_DEFAULTS = {"gaussian": {"a": 1.0},
             "bump": {"r0": 1.5, "w": 0.5},
             "powerlowcut": {"s0": -1.45, "p": 2.0}}


@dataclass(frozen=True)
class DataProfile:
    """Radial Fourier data ``(u0_hat, u1_hat) = (a0 * f, a1 * f)``.

    Parameters
    ----------
    kind : str
        ``"gaussian"``: ``f = exp(-a r^2)``.
        ``"bump"``: ``f = exp(-1 / (1 - ((r - r0)/w)^2))`` on ``|r - r0| < w``.
        ``"powerlowcut"``: ``f = r^s0 exp(-r^p)``, a power law at low
        frequencies with a smooth high-frequency cut.
    params : dict
        Shape parameters of the kind (defaults filled in).
    n : int
        Space dimension.
    a0, a1 : float
        Amplitudes of the position and velocity data.
    """

    kind: str = "gaussian"
    params: dict = field(default_factory=dict)
    n: int = 3
    a0: float = 1.0
    a1: float = 0.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in _KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}; expected one of {_KINDS}")
        merged = dict(_DEFAULTS[kind])
        for k, v in dict(self.params).items():
            if k not in merged:
                raise ConfigError(f"profile {kind} has no parameter {k!r}")
            merged[k] = float(v)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", merged)
        if int(self.n) != self.n or self.n < 1:
            raise ParameterRangeError("dimension n must be a positive integer")
        q = merged
        if kind == "gaussian" and not q["a"] > 0:
            raise ParameterRangeError("gaussian width a must be positive")
        if kind == "bump" and not (q["w"] > 0 and q["r0"] - q["w"] >= 0):
            raise ParameterRangeError("bump needs w > 0 and r0 >= w")
        if kind == "powerlowcut" and not q["p"] > 0:
            raise ParameterRangeError("powerlowcut exponent p must be positive")

    @property
    def id(self) -> str:
        body = ",".join(f"{v:g}" for v in self.params.values())
        amp = "" if (self.a0, self.a1) == (1.0, 0.0) else f",u0={self.a0:g},u1={self.a1:g}"
        return f"{self.kind}:{body}{amp}"

    def shape(self, r):
        r = np.asarray(r, dtype=float)
        q = self.params
        if self.kind == "gaussian":
            return np.exp(-q["a"] * r * r)
        if self.kind == "bump":
            z = (r - q["r0"]) / q["w"]
            inside = np.abs(z) < 1
            zz = np.where(inside, z, 0.0)
            return np.where(inside, np.exp(-1.0 / (1.0 - zz * zz)), 0.0)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, r ** q["s0"] * np.exp(-r ** q["p"]), 0.0 if q["s0"] > 0 else np.inf)

    def u0_hat(self, r):
        return self.a0 * self.shape(r)

    def u1_hat(self, r):
        return self.a1 * self.shape(r)

    def support(self) -> tuple:
        """Interval outside of which the data are negligible (``< e^-40``)."""
        q = self.params
        if self.kind == "gaussian":
            return 0.0, 12.0 / math.sqrt(q["a"])
        if self.kind == "bump":
            return q["r0"] - q["w"], q["r0"] + q["w"]
        return 0.0, 60.0 ** (1.0 / q["p"])

    def origin_power(self) -> float:
        """Leading power of ``|f|`` at ``r = 0`` (``inf`` when it vanishes)."""
        if self.kind == "gaussian":
            return 0.0
        if self.kind == "bump":
            return math.inf
        return self.params["s0"]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "n": self.n,
                "a0": self.a0, "a1": self.a1}


def parse_profile(text: str, n: int = 3) -> DataProfile:
    """Parse ``"kind:p1,p2,...,u0=..,u1=.."``, e.g. ``"bump:1.5,0.5,u1=1"``."""
    text = text.strip()
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind not in _KINDS:
        raise ConfigError(f"unknown profile kind {kind!r}; expected one of {_KINDS}")
    names = list(_DEFAULTS[kind])
    params, a0, a1 = {}, 1.0, 0.0
    pos = 0
    for item in filter(None, (s.strip() for s in rest.split(","))):
        try:
            if "=" in item:
                k, v = (s.strip() for s in item.split("=", 1))
                if k == "u0":
                    a0 = float(v)
                elif k == "u1":
                    a1 = float(v)
                elif k == "n":
                    n = int(v)
                else:
                    params[k] = float(v)
            else:
                if pos >= len(names):
                    raise ConfigError(f"too many parameters for profile {kind}")
                params[names[pos]] = float(item)
                pos += 1
        except ValueError as exc:
            raise ConfigError(f"bad profile parameter {item!r}: {exc}") from None
    return DataProfile(kind, params, n=n, a0=a0, a1=a1)


def sobolev_norm(p: DataProfile, which: str, s: float, homogeneous: bool = True) -> float:
    """Norm of ``u0`` or ``u1`` in ``H^s`` (inhomogeneous) or ``Hdot^s``.

    Raises
    ------
    DivergentNormError
        When the integral diverges at the origin (homogeneous norms of data
        not vanishing fast enough at ``r = 0``) or fails to converge.

    Examples
    --------
    >>> round(sobolev_norm(DataProfile("gaussian"), "u0", 1.0) ** 2, 6)
    1.476526
    """
    if which not in ("u0", "u1"):
        raise ValueError("which must be 'u0' or 'u1'")
    amp = p.a0 if which == "u0" else p.a1
    if amp == 0:
        return 0.0
    n = p.n
    q0 = p.origin_power()
    if homogeneous and q0 < math.inf and 2.0 * (s + q0) + n <= 0:
        raise DivergentNormError(
            f"{'Hdot' if homogeneous else 'H'}^{s:g} norm of {which} diverges at r = 0 "
            f"for profile {p.id}")
    if not homogeneous and q0 < math.inf and 2.0 * q0 + n <= 0:
        raise DivergentNormError(f"norm of {which} diverges at r = 0 for profile {p.id}")

    def integrand(r):
        f = p.shape(r)
        w = r ** (2 * s) if homogeneous else (1.0 + r * r) ** s
        return w * r ** (n - 1) * f * f

    lo, hi = p.support()
    pts = [lo] + ([1.0] if lo < 1.0 < hi else []) + [hi]
    total = err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for a, b in zip(pts[:-1], pts[1:]):
                v, e = integrate.quad(integrand, a, b, limit=400, epsabs=0.0, epsrel=1e-12)
                total += v
                err += e
            if p.kind != "bump":
                tail, e = integrate.quad(integrand, hi, np.inf, limit=200, epsabs=0.0, epsrel=1e-10)
                if not tail <= 1e-10 * max(total, 1e-300):
                    raise DivergentNormError(f"tail of the {which} norm beyond r = {hi:g} "
                                             f"is not negligible for profile {p.id}")
                total += tail
        except integrate.IntegrationWarning as exc:
            raise DivergentNormError(f"norm integral of {which} did not converge: {exc}") from None
    if not math.isfinite(total):
        raise DivergentNormError(f"norm of {which} is not finite for profile {p.id}")
    return abs(amp) * math.sqrt(sphere_area(n) * total)


# ---------------------------------------------------------------------------
# radial grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Composite Gauss-Legendre rule given by panel edges.

    Attributes
    ----------
    edges : ndarray
        Increasing panel boundaries.
    nodes_per_panel : int
    r, w : ndarray
        Nodes and weights of the composite rule.
    """

    edges: np.ndarray
    nodes_per_panel: int = 16
    origin_alpha: Optional[float] = None
    r: np.ndarray = field(init=False, repr=False)
    w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0) or e[0] < 0:
            raise ValueError("panel edges must be increasing and nonnegative")
        x, wx = np.polynomial.legendre.leggauss(self.nodes_per_panel)
        a, b = e[:-1, None], e[1:, None]
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        w = 0.5 * (b - a) * wx
        al = self.origin_alpha
        if al is not None and e[0] == 0.0 and -1.0 < al < 0.0:
            # integrands ~ r^alpha near 0: Gauss-Jacobi nodes on the first
            # panel, with the weight divided back out
            xj, wj = roots_jacobi(self.nodes_per_panel, 0.0, al)
            h = e[1]
            rj = 0.5 * h * (1.0 + xj)
            r[0] = rj
            w[0] = wj * (0.5 * h) ** (1.0 + al) / rj ** al
        r, w = r.ravel(), w.ravel()
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "w", w)

    @property
    def size(self) -> int:
        return self.r.size

    @classmethod
    def log_panels(cls, r_min=1e-3, r_max=12.0, panels=24, nodes=16, origin=True,
                   origin_alpha=None):
        """Log-spaced panels on ``[r_min, r_max]``, plus ``[0, r_min]``."""
        e = np.geomspace(r_min, r_max, panels + 1)
        if origin:
            e = np.concatenate([[0.0], e])
        return cls(e, nodes, origin_alpha)

    @classmethod
    def uniform(cls, r_min, r_max, panels=8, nodes=16):
        return cls(np.linspace(r_min, r_max, panels + 1), nodes)

    def refined(self) -> "RadialGrid":
        """Every panel split in two (log midpoint where possible)."""
        a, b = self.edges[:-1], self.edges[1:]
        mid = np.where(a > 0, np.sqrt(a * np.where(a > 0, b, 1.0)), 0.5 * (a + b))
        e = np.empty(2 * a.size + 1)
        e[0::2] = self.edges
        e[1::2] = mid
        return RadialGrid(e, self.nodes_per_panel, self.origin_alpha)

    def split(self, which) -> "RadialGrid":
        """Split the panels flagged in the boolean array ``which``."""
        a, b = self.edges[:-1], self.edges[1:]
        mids = np.where(a > 0, np.sqrt(a * b), 0.5 * (a + b))[np.asarray(which, bool)]
        return RadialGrid(np.sort(np.concatenate([self.edges, mids])), self.nodes_per_panel,
                          self.origin_alpha)

    def integrate(self, values) -> float:
        return float(np.dot(self.w, values))

    def to_dict(self) -> dict:
        return {"panels": int(self.edges.size - 1), "nodes_per_panel": self.nodes_per_panel,
                "origin_alpha": self.origin_alpha,
                "r_min": float(self.edges[0]), "r_max": float(self.edges[-1]),
                "modes": int(self.size)}


def grid_for_profile(p: DataProfile, betas: Sequence[float] = (0.0,), tol: float = 1e-4,
                     max_nodes: int = 4000, r_min: float = 1e-3, panels: int = 24,
                     nodes: int = 16) -> RadialGrid:
    """Default grid for ``p``, split adaptively until the data integrals
    ``int r^(2 beta + n - 1) |u_hat|^2`` converge to ``tol`` per panel.
    """
    lo, hi = p.support()
    if p.kind == "bump":
        grid = RadialGrid.uniform(lo, hi, panels=max(8, panels // 3), nodes=nodes)
    else:
        q0 = p.origin_power()
        alpha = 2.0 * q0 + p.n - 1 if q0 < math.inf else None
        grid = RadialGrid.log_panels(r_min, hi, panels=panels, nodes=nodes,
                                     origin_alpha=alpha)
    betas = list(betas) or [0.0]
    for _ in range(20):
        bad = np.zeros(grid.edges.size - 1, dtype=bool)
        fine = grid.refined()
        for beta in betas:
            coarse_p = _panel_sums(grid, p, beta)
            fine_p = _panel_sums(fine, p, beta).reshape(-1, 2).sum(axis=1)
            total = max(fine_p.sum(), 1e-300)
            bad |= np.abs(fine_p - coarse_p) > tol * total / max(np.sqrt(bad.size), 1.0)
        if not bad.any():
            return grid
        if grid.size + bad.sum() * nodes > max_nodes:
            raise NumericalError(f"radial grid refinement exceeded {max_nodes} nodes "
                                 f"for profile {p.id}")
        grid = grid.split(bad)
    return grid


def _panel_sums(grid: RadialGrid, p: DataProfile, beta: float) -> np.ndarray:
    r = grid.r
    f = np.abs(p.u0_hat(r)) ** 2 + np.abs(p.u1_hat(r)) ** 2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = np.where(f > 0, r ** (2 * beta + p.n - 1) * f, 0.0)
    return (grid.w * v).reshape(-1, grid.nodes_per_panel).sum(axis=1)


# ---------------------------------------------------------------------------
# mode field and energy curves
# ---------------------------------------------------------------------------

def default_energy_config() -> SolverConfig:
    """Solver settings for energy sweeps.

    The frozen exponential step is exact for constant coefficients, so its
    step size follows the variation of ``g`` rather than the oscillation
    period; extinct modes are dropped once they are 1e-40 below their
    initial energy.
    """
    return SolverConfig(rel_tol=1e-9, method=Method.EXPONENTIAL, extinction=1e-40)


def thread_count() -> int:
    """Worker count from ``VISCOWAVE_THREADS`` (default 1)."""
    raw = os.environ.get("VISCOWAVE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"VISCOWAVE_THREADS must be an integer, got {raw!r}") from None


@dataclass(eq=False)
class ModeField:
    """All modes of one datum on a radial grid, as ``exp(sigma) * w``."""

    coefficient: Coefficient
    profile: DataProfile
    grid: RadialGrid
    times: np.ndarray
    w: np.ndarray
    wt: np.ndarray
    sigma: np.ndarray
    steps: np.ndarray

    def log_abs2(self, which: str = "u") -> np.ndarray:
        a = np.abs(self.w if which == "u" else self.wt)
        with np.errstate(divide="ignore"):
            return 2.0 * (np.log(a) + self.sigma)

    def u_hat(self) -> np.ndarray:
        with np.errstate(under="ignore", over="ignore"):
            return self.w * np.exp(self.sigma)

    def ut_hat(self) -> np.ndarray:
        with np.errstate(under="ignore", over="ignore"):
            return self.wt * np.exp(self.sigma)


def extinction_scales(grid: RadialGrid, u0, u1, beta_max: float = 3.0) -> np.ndarray:
    """Per-mode extinction factors ``max_j rho_j / rho_i``.

    ``rho_i`` bounds the initial contribution of mode ``i`` to any energy of
    order up to ``beta_max``; a mode is then dropped once it sits below
    ``extinction`` times the largest initial contribution.
    """
    wr = np.maximum(grid.r, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        rho = grid.w * (np.abs(u0) ** 2 * wr * wr + np.abs(u1) ** 2) * wr ** (2 * beta_max)
        top = rho.max() if rho.size else 0.0
        return np.where(rho > 0, top / np.where(rho > 0, rho, 1.0), 1.0)


def solve_modes(c: Coefficient, p: DataProfile, times, grid: Optional[RadialGrid] = None,
                cfg: Optional[SolverConfig] = None, chunk: int = 64,
                threads: Optional[int] = None, beta_max: Optional[float] = 3.0) -> ModeField:
    """Integrate every grid mode of the datum ``p``.

    Modes are processed in chunks, optionally on a thread pool; results are
    placed by grid index so the outcome does not depend on scheduling.
    With ``cfg.extinction > 0`` and ``beta_max`` set, the extinction level
    of each mode is scaled by :func:`extinction_scales`; ``beta_max=None``
    keeps the plain per-mode level.
    """
    times = _check_times(times)
    grid = grid or grid_for_profile(p)
    cfg = cfg or default_energy_config()
    r = grid.r
    u0 = p.u0_hat(r).astype(complex)
    u1 = p.u1_hat(r).astype(complex)
    n, nt = r.size, times.size
    W = np.zeros((n, nt), dtype=complex)
    WT = np.zeros((n, nt), dtype=complex)
    SIG = np.zeros((n, nt))
    steps = np.zeros(n, dtype=np.int64)
    live = np.nonzero((np.abs(u0) + np.abs(u1)) > 0)[0]
    scales = (extinction_scales(grid, u0, u1, beta_max) if beta_max is not None
              else np.ones(n))
    blocks = [live[i:i + chunk] for i in range(0, live.size, chunk)]

    def run(idx):
        try:
            return idx, integrate_batch(c, r[idx], u0[idx], u1[idx], times, cfg,
                                        extinction_scale=scales[idx])
        except NumericalError as exc:
            raise type(exc)(f"energy sweep for {c.label} with profile {p.id}: {exc}") from exc

    nthreads = threads if threads is not None else thread_count()
    if nthreads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            results = list(ex.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    for idx, res in results:
        W[idx], WT[idx], SIG[idx], steps[idx] = res.w, res.wt, res.sigma, res.steps
    return ModeField(c, p, grid, times, W, WT, SIG, steps)


@dataclass(eq=False)
class EnergyCurve:
    """``e_u(t) = || |D|^beta u(t) ||`` and ``e_ut(t) = || |D|^beta u_t(t) ||``.

    ``log_e_u``/``log_e_ut`` hold the natural logarithms (``-inf`` for exact
    zeros), which stay meaningful when the values underflow.  ``G`` is
    ``1 + int_0^t g`` at the output times.
    """

    beta: float
    times: np.ndarray
    e_u: np.ndarray
    e_ut: np.ndarray
    meta: dict = field(default_factory=dict)
    log_e_u: Optional[np.ndarray] = None
    log_e_ut: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.e_u = np.asarray(self.e_u, dtype=float)
        self.e_ut = np.asarray(self.e_ut, dtype=float)
        if self.log_e_u is None:
            with np.errstate(divide="ignore"):
                self.log_e_u = np.log(self.e_u)
                self.log_e_ut = np.log(self.e_ut)
        if np.any(self.e_u < 0) or np.any(self.e_ut < 0) or not (
                np.all(np.isfinite(self.e_u)) and np.all(np.isfinite(self.e_ut))):
            raise NumericalError("energy curve values must be finite and nonnegative")

    def scaled(self, factor: float) -> "EnergyCurve":
        lf = math.log(factor)
        return EnergyCurve(self.beta, self.times, self.e_u * factor, self.e_ut * factor,
                           dict(self.meta), self.log_e_u + lf, self.log_e_ut + lf, self.G)

    def to_rows(self):
        for i, t in enumerate(self.times):
            yield float(t), self.beta, float(self.e_u[i]), float(self.e_ut[i])


def _log_norm(field_: ModeField, beta: float, which: str) -> np.ndarray:
    r, w = field_.grid.r, field_.grid.w
    n = field_.profile.n
    with np.errstate(divide="ignore"):
        base = np.log(w) + (2.0 * beta + n - 1) * np.log(r) + math.log(sphere_area(n))
    la = field_.log_abs2(which)
    x = base[:, None] + la
    x = np.where(np.isfinite(x), x, -np.inf)
    out = logsumexp(x, axis=0)
    return 0.5 * out


def curve_from_modes(field_: ModeField, beta: float) -> EnergyCurve:
    """Quadrature of a solved mode field with weight ``r^(2 beta)``."""
    if beta < 0:
        raise ParameterRangeError("beta must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        lu = _log_norm(field_, beta, "u")
        lut = _log_norm(field_, beta, "ut")
    c = field_.coefficient
    meta = {"coefficient": c.label, "regime": c.regime.value, "profile": field_.profile.id,
            "n": field_.profile.n, "grid": field_.grid.to_dict()}
    return EnergyCurve(beta, field_.times, np.exp(lu), np.exp(lut), meta, lu, lut,
                       np.asarray(c.G_one(field_.times), dtype=float))


def energy_curves(c: Coefficient, p: DataProfile, betas: Sequence[float], times,
                  rgrid: Optional[RadialGrid] = None, cfg: Optional[SolverConfig] = None):
    """Curves for several orders from one set of mode integrations."""
    betas = [float(b) for b in betas]
    grid = rgrid or grid_for_profile(p, betas)
    field_ = solve_modes(c, p, times, grid, cfg, beta_max=max(betas + [1.0]))
    return [curve_from_modes(field_, b) for b in betas]


def energy_curve(c: Coefficient, p: DataProfile, beta: float, times,
                 rgrid: Optional[RadialGrid] = None,
                 cfg: Optional[SolverConfig] = None) -> EnergyCurve:
    """``|| |D|^beta u(t) ||`` and ``|| |D|^beta u_t(t) ||`` on ``times``."""
    return energy_curves(c, p, [beta], times, rgrid, cfg)[0]


def total_energy(field_: ModeField) -> np.ndarray:
    """``1/2 ||grad u||^2 + 1/2 ||u_t||^2`` at the output times."""
    a = curve_from_modes(field_, 1.0).e_u
    b = curve_from_modes(field_, 0.0).e_ut
    return 0.5 * (a * a + b * b)


def grid_convergence(c: Coefficient, p: DataProfile, beta: float, times,
                     grid: Optional[RadialGrid] = None, cfg: Optional[SolverConfig] = None,
                     tol: float = 1e-4, max_levels: int = 3):
    """Refine the grid until doubling its density changes ``e_u`` by less
    than ``tol`` (relative, at every time).

    Returns
    -------
    (EnergyCurve, RadialGrid, float)
        Curve on the accepted grid, the grid, and the last relative change.
    """
    grid = grid or grid_for_profile(p, [beta])
    cur = energy_curve(c, p, beta, times, grid, cfg)
    change = math.inf
    for _ in range(max_levels):
        fine = grid.refined()
        nxt = energy_curve(c, p, beta, times, fine, cfg)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(nxt.e_u - cur.e_u) / np.maximum(nxt.e_u, 1e-300)
        change = float(np.nanmax(np.where(nxt.e_u > 0, rel, 0.0)))
        grid, cur = fine, nxt
        if change < tol:
            break
    return cur, grid, change


def time_grid(t_max: float, points: int = 60, spacing: str = "log",
              t_min: float = 1e-2) -> np.ndarray:
    """Output times starting at 0: ``points`` further times up to ``t_max``."""
    if not t_max > 0:
        raise ConfigError("t_max must be positive")
    if points < 1:
        raise ConfigError("need at least one output time")
    if spacing == "log":
        t_min = min(t_min, t_max)
        rest = np.geomspace(t_min, t_max, points) if points > 1 else np.array([t_max])
    elif spacing == "linear":
        rest = np.linspace(t_max / points, t_max, points)
    else:
        raise ConfigError(f"unknown time spacing {spacing!r}")
    return np.concatenate([[0.0], rest])
