"""WKB building blocks for the mode equation.

Roots of the first-order system, zone-wise phase and amplitude weights,
Liouville-Green surrogates and empirical symbol-class constants.  The
objects here are evaluated pointwise; comparisons with direct integration
live in :func:`compare_surrogate`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from .coefficients import Coefficient
from .errors import NegativeDiscriminantError, WeightZeroError, ZoneViolationError
from .mode_solver import SolverConfig, integrate_mode, integrate_transformed, \
    transformed_initial_data
from .phase_space import DEFAULT_CONSTS, ZoneConstants, ZoneLabel, classify_many, \
    LABEL_CODES


def _disc(g, r):
    """``g^2 r^4 - 4 r^2`` written as ``r^2 (g r - 2)(g r + 2)``."""
    return r * r * (g * r - 2.0) * (g * r + 2.0)


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenPair:
    """Purely imaginary roots ``lambda_k = i (g r^2 +- sqrt(D)) / 2``."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    g: np.ndarray
    r: np.ndarray

    @property
    def im1(self):
        return np.imag(self.lambda1)

    @property
    def im2(self):
        return np.imag(self.lambda2)

    def identity_errors(self) -> dict:
        """Relative errors of the sum and product identities."""
        gr2 = self.g * self.r ** 2
        r2 = self.r ** 2
        return {"sum": np.abs(self.im1 + self.im2 - gr2) / gr2,
                "product": np.abs(self.im1 * self.im2 - r2) / r2}

    def sandwich(self, N: float = DEFAULT_CONSTS.N, rtol: float = 1e-9) -> dict:
        """Boolean arrays for the ordering and two-sided bounds.

        The bounds on ``Im lambda1`` and ``Im lambda2`` are only asserted
        where ``g^2 r^2 >= 4 (N + 1)``; elsewhere they read ``True``.
        """
        g, r = self.g, self.r
        i1, i2 = self.im1, self.im2
        big = g * g * r * r >= 4.0 * (N + 1.0)
        s = 1.0 + rtol
        ordering = (i1 * s >= i2) & (i2 >= 0)
        b1 = (0.5 * g * r * r <= i1 * s) & (i1 <= g * r * r * s)
        b2 = (1.0 / g <= i2 * s) & (i2 <= 2.0 / g * s)
        return {"ordering": ordering, "lambda1_bounds": b1 | ~big, "lambda2_bounds": b2 | ~big}


def eigen(c: Coefficient, t, r) -> EigenPair:
    """Roots of the elliptic-side first-order system at ``(t, r)``.

    Raises
    ------
    NegativeDiscriminantError
        If ``g^2 r^4 < 4 r^2`` somewhere: the point is on the hyperbolic
        side, where the phase weight ``p`` applies instead.

    Examples
    --------
    >>> from viscowave.coefficients import make_builtin
    >>> e = eigen(make_builtin("const", [1.0]), 0.0, 3.0)
    >>> round(float(e.im1 + e.im2), 12), round(float(e.im1 * e.im2), 12)
    (9.0, 9.0)
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    t, r = np.broadcast_arrays(t, r)
    g = np.asarray(c.g(t), dtype=float)
    D = _disc(g, r)
    if np.any(D < 0):
        k = np.flatnonzero(D < 0)[0]
        raise NegativeDiscriminantError(
            f"g^2 r^4 < 4 r^2 at t={t.flat[k]:g}, r={r.flat[k]:g}: hyperbolic side, "
            "use the HyperbolicP weight")
    sq = np.sqrt(D)
    gr2 = g * r * r
    im1 = 0.5 * (gr2 + sq)
    # the small root without cancellation
    with np.errstate(divide="ignore", invalid="ignore"):
        im2 = np.where(gr2 + sq > 0, 2.0 * r * r / (gr2 + sq), 0.0)
    return EigenPair(1j * im1, 1j * im2, g, r)


# ---------------------------------------------------------------------------
# phase and amplitude weights
# ---------------------------------------------------------------------------

class WeightKind(str, Enum):
    ELLIPTIC_BETA = "EllipticBeta"
    ELLIPTIC_D = "EllipticD"
    HYPERBOLIC_P = "HyperbolicP"
    GAMMA_HALF_G = "GammaHalfG"


@dataclass(frozen=True)
class PhaseWeight:
    """A real weight ``(t, r) -> value`` of the given kind."""

    kind: WeightKind
    coefficient: Coefficient

    def __call__(self, t, r):
        c = self.coefficient
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        g = np.asarray(c.g(t), dtype=float)
        k = WeightKind(self.kind)
        if k == WeightKind.GAMMA_HALF_G:
            return 0.5 * g * r * r
        if k == WeightKind.HYPERBOLIC_P:
            p2 = q_transformed(c, t, r)
            if np.any(p2 <= 0):
                raise ZoneViolationError("p^2 <= 0: point is not on the hyperbolic side")
            return np.sqrt(p2)
        D = _disc(g, r)
        if np.any(D < 0):
            raise NegativeDiscriminantError("g^2 r^4 < 4 r^2: point is not on the elliptic side")
        if k == WeightKind.ELLIPTIC_D:
            return 0.5 * np.sqrt(D)
        return beta_weight(c, t, r)


def q_transformed(c: Coefficient, t, r):
    """``Q = r^2 (1 - g'/2) - g^2 r^4 / 4``, the potential of the ``v``
    equation; ``p = sqrt(Q)`` on the hyperbolic side."""
    g = np.asarray(c.g(t), dtype=float)
    g1 = np.asarray(c.g1(t), dtype=float)
    r = np.asarray(r, dtype=float)
    return r * r * (1.0 - 0.5 * g1) - 0.25 * g * g * r ** 4


def beta_weight(c: Coefficient, t, r):
    """Elliptic amplitude rate
    ``(1/2)(1 + g' r^2 / D)(sqrt(D) - g r^2)`` with ``D = g^2 r^4 - 4 r^2``.

    The second factor is evaluated as ``-4 r^2 / (sqrt(D) + g r^2)``.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    g = np.asarray(c.g(t), dtype=float)
    g1 = np.asarray(c.g1(t), dtype=float)
    D = _disc(g, r)
    if np.any(D <= 0):
        raise NegativeDiscriminantError("beta weight needs g^2 r^4 > 4 r^2")
    sq = np.sqrt(D)
    return 0.5 * (1.0 + g1 * r * r / D) * (-4.0 * r * r / (sq + g * r * r))


# ---------------------------------------------------------------------------
# zone checks
# ---------------------------------------------------------------------------

def require_zone(c: Coefficient, r: float, s: float, t: float, label: ZoneLabel,
                 consts: ZoneConstants = DEFAULT_CONSTS, samples: int = 65) -> None:
    """Raise :class:`ZoneViolationError` unless ``[s, t] x {r}`` lies in
    the zone ``label`` (checked on ``samples`` equispaced points)."""
    ts = np.linspace(s, t, samples) if t > s else np.array([s])
    codes = classify_many(None, c, ts, np.full_like(ts, float(r)), consts)
    bad = codes != LABEL_CODES[label]
    if np.any(bad):
        tb = ts[np.flatnonzero(bad)[0]]
        raise ZoneViolationError(
            f"interval [{s:g}, {t:g}] at r={r:g} leaves the {label.value} zone (t={tb:g})")


# ---------------------------------------------------------------------------
# elliptic amplitude and surrogates
# ---------------------------------------------------------------------------

def elliptic_amplitude(c: Coefficient, r: float, s: float, t: float,
                       consts: ZoneConstants = DEFAULT_CONSTS, check: bool = True) -> float:
    """``exp(int_s^t beta(tau, r) dtau)`` for ``[s, t]`` inside the
    elliptic zone.

    Examples
    --------
    >>> from viscowave.coefficients import make_builtin
    >>> elliptic_amplitude(make_builtin("const", [2.0]), 10.0, 1.0, 1.0)
    1.0
    """
    if t < s:
        raise ValueError("need s <= t")
    if check:
        require_zone(c, r, s, t, ZoneLabel.ELLIPTIC, consts)
    if t == s:
        return 1.0
    val, _ = integrate.quad(lambda x: float(beta_weight(c, x, r)), s, t,
                            epsabs=1e-10, epsrel=1e-12, limit=200)
    return math.exp(val)


@dataclass
class Surrogate:
    """Surrogate values on a time grid.

    For the hyperbolic kind ``v``/``vt`` hold the Liouville-Green pair; for
    ``elliptic_sec3`` only ``growth`` is set.
    """

    kind: str
    r: float
    t: np.ndarray
    v: Optional[np.ndarray] = None
    vt: Optional[np.ndarray] = None
    growth: Optional[np.ndarray] = None
    phase: Optional[np.ndarray] = None


def _cumulative(f, t):
    out = np.zeros(t.size)
    for i in range(1, t.size):
        val, _ = integrate.quad(f, t[i - 1], t[i], epsabs=1e-13, epsrel=1e-12, limit=200)
        out[i] = out[i - 1] + val
    return out


def lg_surrogate(c: Coefficient, r: float, s: float, t, kind: str = "hyperbolic",
                 v0: complex = 1.0, vt0: complex = 0.0,
                 consts: ZoneConstants = DEFAULT_CONSTS, check: bool = True) -> Surrogate:
    """Liouville-Green surrogate on ``[s, max(t)]``.

    ``hyperbolic``: ``v ~ p^(-1/2) (A cos Phi + B sin Phi)`` with
    ``Phi = int_s^t p`` and ``A, B`` fitted to ``(v0, vt0)`` at ``s``.

    ``elliptic_sec3``: the growth factor ``(d(t)/d(s)) exp(int_s^t d)``
    of the micro-energy in the elliptic zone, ``d = sqrt(g^2 r^4/4 - r^2)``.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < s) or np.any(np.diff(ts) < 0):
        raise ValueError("times must be increasing and not before s")
    grid = np.concatenate([[s], ts])
    if kind == "hyperbolic":
        if check:
            require_zone(c, r, s, float(grid[-1]), ZoneLabel.HYPERBOLIC, consts)
        pw = PhaseWeight(WeightKind.HYPERBOLIC_P, c)
        p = lambda x: float(pw(x, r))

        def dp(x):
            g, g1, g2 = float(c.g(x)), float(c.g1(x)), float(c.g2(x))
            dq = -0.5 * g2 * r * r - 0.5 * g * g1 * r ** 4
            return dq / (2.0 * p(x))

        phi = _cumulative(p, grid)[1:]
        ps, dps = p(s), dp(s)
        A = complex(v0) * math.sqrt(ps)
        B = (complex(vt0) + 0.5 * dps / ps ** 1.5 * A) / math.sqrt(ps)
        pt = np.array([p(x) for x in ts])
        dpt = np.array([dp(x) for x in ts])
        cs, sn = np.cos(phi), np.sin(phi)
        v = pt ** -0.5 * (A * cs + B * sn)
        vt = -0.5 * pt ** -1.5 * dpt * (A * cs + B * sn) + pt ** 0.5 * (-A * sn + B * cs)
        return Surrogate(kind, float(r), ts, v, vt, phase=phi)
    if kind == "elliptic_sec3":
        if check:
            require_zone(c, r, s, float(grid[-1]), ZoneLabel.ELLIPTIC, consts)
        dw = PhaseWeight(WeightKind.ELLIPTIC_D, c)
        d = lambda x: float(dw(x, r))
        integral = _cumulative(d, grid)[1:]
        dt_ = np.array([d(x) for x in ts])
        return Surrogate(kind, float(r), ts, growth=dt_ / d(s) * np.exp(integral))
    raise ValueError(f"unknown surrogate kind {kind!r}")


@dataclass
class Comparison:
    """Direct solution against a surrogate; ``ratio = direct / surrogate``."""

    kind: str
    r: float
    t: np.ndarray
    direct: np.ndarray
    surrogate: np.ndarray
    ratio: np.ndarray

    def rows(self):
        for i in range(self.t.size):
            yield float(self.t[i]), float(self.direct[i]), float(self.surrogate[i]), \
                float(self.ratio[i])


def compare_surrogate(c: Coefficient, r: float, s: float, t, kind: str = "hyperbolic",
                      u0: complex = 1.0, u1: complex = 0.0,
                      consts: ZoneConstants = DEFAULT_CONSTS,
                      cfg: Optional[SolverConfig] = None) -> Comparison:
    """Integrate ``v`` from data ``(u0, u1)`` at time 0 and compare with
    the surrogate started from the numerical state at ``s``.

    Sizes are micro-energy norms: ``sqrt(p^2 |v|^2 + |v_t|^2)`` for the
    hyperbolic kind and ``sqrt(d^2 |v|^2 + |v_t|^2)`` relative to its value
    at ``s`` for ``elliptic_sec3``.
    """
    cfg = cfg or SolverConfig()
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    grid = np.unique(np.concatenate([[0.0, s], ts]))
    v0, v1 = transformed_initial_data(c, r, u0, u1)
    tr = integrate_transformed(c, r, v0, v1, cfg, times=grid)
    i_s = int(np.searchsorted(grid, s))
    sel = np.searchsorted(grid, ts)
    sig = tr.sigma
    w, wt = tr.w, tr.wt
    if kind == "hyperbolic":
        sur = lg_surrogate(c, r, s, ts, kind, complex(w[i_s]), complex(wt[i_s]), consts)
        p = np.asarray(PhaseWeight(WeightKind.HYPERBOLIC_P, c)(ts, r), dtype=float)
        scale = np.exp(sig[sel] - sig[i_s])
        direct = np.sqrt(p ** 2 * np.abs(w[sel]) ** 2 + np.abs(wt[sel]) ** 2) * scale
        surv = np.sqrt(p ** 2 * np.abs(sur.v) ** 2 + np.abs(sur.vt) ** 2)
        return Comparison(kind, float(r), ts, direct, surv, direct / surv)
    if kind == "elliptic_sec3":
        sur = lg_surrogate(c, r, s, ts, kind, consts=consts)
        dw = PhaseWeight(WeightKind.ELLIPTIC_D, c)
        d_s = float(dw(s, r))
        d_t = np.asarray(dw(ts, r), dtype=float)
        n_s = math.hypot(d_s * abs(w[i_s]), abs(wt[i_s]))
        n_t = np.hypot(d_t * np.abs(w[sel]), np.abs(wt[sel]))
        direct = n_t / n_s * np.exp(sig[sel] - sig[i_s])
        return Comparison(kind, float(r), ts, direct, sur.growth, direct / sur.growth)
    raise ValueError(f"unknown surrogate kind {kind!r}")


def slow_decay_ratio(c: Coefficient, r: float, pairs, consts: ZoneConstants = DEFAULT_CONSTS,
                     cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """``(|u(t)|/|u(s)|) / elliptic_amplitude(s, t)`` along the slow solution.

    The mode starts on the slow eigenvector at ``t = 0``; each ``(s, t)``
    pair must lie in the elliptic zone.
    """
    pairs = [(float(a), float(b)) for a, b in pairs]
    mu_slow = -float(eigen(c, 0.0, r).im2)
    times = np.unique(np.concatenate([[0.0], np.ravel(pairs)]))
    tr = integrate_mode(c, r, 1.0, mu_slow, cfg or SolverConfig(), times=times)
    amp = np.abs(tr.u)
    out = []
    for a, b in pairs:
        ia, ib = np.searchsorted(times, a), np.searchsorted(times, b)
        out.append(amp[ib] / amp[ia] / elliptic_amplitude(c, r, a, b, consts))
    return np.array(out)


# ---------------------------------------------------------------------------
# symbol-class constants
# ---------------------------------------------------------------------------

def _symbol_function(c: Coefficient, name: str) -> Callable:
    def gamma(t, r):
        return 0.5 * np.asarray(c.g(t)) * r * r

    def d(t, r):
        g = np.asarray(c.g(t))
        return np.sqrt(np.maximum(0.25 * g * g * r ** 4 - r * r, 0.0))

    def m(t, r):
        return 0.5 * np.asarray(c.g1(t)) * r * r

    def f0_11(t, r):
        return np.abs(1.0 - np.asarray(c.g1(t))) / (2.0 * np.asarray(c.g(t))) + 0.0 * r

    def f0_22(t, r):
        return 1.0 / (2.0 * np.asarray(c.g(t))) + 0.0 * r

    def f0(t, r):
        return np.maximum(f0_11(t, r), f0_22(t, r))

    table = {"gamma": gamma, "d": d, "m": m, "F0": f0, "F0_11": f0_11, "F0_22": f0_22}
    if name not in table:
        raise ValueError(f"unknown symbol {name!r}; choose from {sorted(table)}")
    return table[name]


def _fd(f, t, r, k, h):
    """Fourth-order differences in ``t`` (one-sided where ``t < 2h``)."""
    if k == 0:
        return f(t, r)
    central = t >= 2 * h
    tc = np.where(central, t, 2 * h)
    if k == 1:
        c_ = (-f(tc + 2 * h, r) + 8 * f(tc + h, r) - 8 * f(tc - h, r) + f(tc - 2 * h, r)) / (12 * h)
        fw = (-25 * f(t, r) + 48 * f(t + h, r) - 36 * f(t + 2 * h, r) + 16 * f(t + 3 * h, r)
              - 3 * f(t + 4 * h, r)) / (12 * h)
    elif k == 2:
        c_ = (-f(tc + 2 * h, r) + 16 * f(tc + h, r) - 30 * f(tc, r) + 16 * f(tc - h, r)
              - f(tc - 2 * h, r)) / (12 * h * h)
        fw = (45 * f(t, r) - 154 * f(t + h, r) + 214 * f(t + 2 * h, r) - 156 * f(t + 3 * h, r)
              + 61 * f(t + 4 * h, r) - 10 * f(t + 5 * h, r)) / (12 * h * h)
    else:
        raise ValueError("derivative order k must be 0, 1 or 2")
    return np.where(central, c_, fw)


def symbol_weight(c: Coefficient, kind: str, t, r, m1, m2, k, m3=0.0):
    """Weights of the two elliptic symbol classes.

    ``"A"``: ``(r^2 g)^m1 (g / G_half)^(m2 + k)``;
    ``"D"``: ``r^m1 g^m2 (1/(1 + t))^(m3 + k)``.
    """
    g = np.asarray(c.g(t), dtype=float)
    if kind == "A":
        with np.errstate(divide="ignore"):
            G = np.asarray(c.G_half(t), dtype=float)
            return (r * r * g) ** m1 * (g / G) ** (m2 + k)
    if kind == "D":
        return r ** m1 * g ** m2 * (1.0 / (1.0 + t)) ** (m3 + k)
    raise ValueError("weight kind must be 'A', 'D' or a callable")


def symbol_constant(c: Coefficient, f: Union[str, Callable], m1: float, m2: float, k: int,
                    samples, weight: Union[str, Callable] = "A", m3: float = 0.0,
                    zone: Optional[ZoneLabel] = ZoneLabel.ELLIPTIC,
                    consts: ZoneConstants = DEFAULT_CONSTS) -> float:
    """Largest ratio ``|d^k f / dt^k| / weight`` over the sampled zone.

    Parameters
    ----------
    f : str or callable
        ``"gamma"``, ``"d"``, ``"m"``, ``"F0"`` (diagonal remainder) or a
        function ``f(t, r)``.
    samples : (t, r) arrays
        Candidate points; those outside ``zone`` are discarded.
    weight : {"A", "D"} or callable
        Class weight, or ``weight(t, r, k)``.

    Raises
    ------
    WeightZeroError
        If the weight vanishes at a retained sample.
    """
    fn = _symbol_function(c, f) if isinstance(f, str) else f
    t, r = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in samples))
    t, r = t.ravel(), r.ravel()
    if zone is not None:
        keep = classify_many(None, c, t, r, consts) == LABEL_CODES[zone]
        t, r = t[keep], r[keep]
    if t.size == 0:
        raise ZoneViolationError("no sample point lies in the requested zone")
    h = 1e-4 * np.maximum(1.0, t)
    val = np.abs(_fd(fn, t, r, k, h))
    w = weight(t, r, k) if callable(weight) else symbol_weight(c, weight, t, r, m1, m2, k, m3)
    w = np.abs(np.asarray(w, dtype=float))
    if np.any(w == 0):
        raise WeightZeroError("symbol weight vanishes at a sample point")
    return float(np.max(val / w))


def diagonalizer_margin(c: Coefficient, t, r):
    """``|N1 - I|`` of the second diagonalisation step for regime A:
    the off-diagonal entries ``(g' - 1)/(2 g) / |g r^2 + (g' - 2)/g|``."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(c.g(t), dtype=float)
    g1 = np.asarray(c.g1(t), dtype=float)
    delta = np.abs(g * r * r + (g1 - 2.0) / g)
    return np.abs(g1 - 1.0) / (2.0 * g) / delta


def sample_zone(c: Coefficient, n: int, label: ZoneLabel = ZoneLabel.ELLIPTIC,
                t_range=(0.0, 50.0), log_r_range=(-2.0, 3.0), seed: int = 0,
                consts: ZoneConstants = DEFAULT_CONSTS, max_rounds: int = 200):
    """``n`` random points of a zone by rejection from a box."""
    rng = np.random.default_rng(seed)
    ts, rs = [], []
    got = 0
    for _ in range(max_rounds):
        m = max(4 * n, 1000)
        t = rng.uniform(*t_range, m)
        r = 10.0 ** rng.uniform(*log_r_range, m)
        keep = classify_many(None, c, t, r, consts) == LABEL_CODES[label]
        ts.append(t[keep])
        rs.append(r[keep])
        got += int(keep.sum())
        if got >= n:
            break
    t, r = np.concatenate(ts)[:n], np.concatenate(rs)[:n]
    if t.size < n:
        raise ZoneViolationError(f"found only {t.size} of {n} points in the {label.value} zone")
    return t, r
