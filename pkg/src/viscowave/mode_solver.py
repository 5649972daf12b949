"""Time integration of single Fourier modes.

Each frequency ``r`` obeys

    u'' + r^2 u + g(t) r^2 u' = 0,

and after the substitution ``u = exp(-r^2/2 int_0^t g) v``

    v'' + Q(t) v = 0,   Q = r^2 (1 - g^2 r^2 / 4 - g'/2).

Two one-step methods are available and may be mixed per step:

* an embedded Dormand-Prince 5(4) pair for non-stiff steps, and
* a frozen-coefficient exponential step: ``g`` is frozen at the step
  midpoint and the exact constant-coefficient 2x2 propagator is applied.
  The method is time-symmetric, so step doubling yields an error estimate
  and a fourth-order Richardson-extrapolated result.

The integrator is vectorised over a batch of modes, each with its own time
and step size; every mode lands exactly on each requested output time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .coefficients import Coefficient
from .errors import NumericalError, StepSizeUnderflowError


class Method(str, Enum):
    EXPLICIT = "AdaptiveExplicit"
    EXPONENTIAL = "FrozenExponential"
    AUTO = "Auto"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, Method):
            return value
        key = str(value).strip().lower()
        for m in cls:
            if key in (m.value.lower(), m.name.lower()):
                return m
        aliases = {"explicit": cls.EXPLICIT, "rk": cls.EXPLICIT, "dopri": cls.EXPLICIT,
                   "exp": cls.EXPONENTIAL, "exponential": cls.EXPONENTIAL}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown method {value!r}")


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Integrator settings.

    Parameters
    ----------
    rel_tol, abs_tol : float
        Local error tolerances.  ``abs_tol`` is measured relative to the
        size of the initial state, so it sets the floor below which a
        decaying mode is no longer resolved in relative terms.
    t_grid : array_like, optional
        Output times (increasing, starting at 0).
    method : Method
    max_step, min_step : float
        Step bounds.
    extinction : float
        A mode whose energy falls below ``extinction`` times its initial
        energy is set to zero from then on (energy is nonincreasing, so it
        stays below the threshold).  ``0`` disables the cut.
    max_steps : int
        Per-mode step budget.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-30
    t_grid: Optional[np.ndarray] = None
    method: Method = Method.AUTO
    max_step: float = math.inf
    min_step: float = 1e-13
    extinction: float = 0.0
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.min_step <= self.max_step:
            raise ValueError("need 0 < min_step <= max_step")
        object.__setattr__(self, "method", Method.parse(self.method))
        if self.t_grid is not None:
            object.__setattr__(self, "t_grid", _check_times(self.t_grid))

    def replace(self, **kw) -> "SolverConfig":
        from dataclasses import replace
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "method": self.method.value, "max_step": _jf(self.max_step),
                "min_step": self.min_step, "extinction": self.extinction}


def _jf(x):
    return x if math.isfinite(x) else str(x)


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0 or t[0] != 0.0:
        raise ValueError("output times must start at 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("output times must be strictly increasing")
    if not np.all(np.isfinite(t)):
        raise ValueError("output times must be finite")
    return t


@dataclass(frozen=True)
class ModeState:
    r: float
    t: float
    u_hat: complex
    u_hat_t: complex


@dataclass(eq=False)
class ModeTrajectory:
    """States of one mode at the output times.

    For a transformed trajectory (``kind == "v"``) the state is stored as
    ``v = exp(sigma) * w`` so that exponentially large values stay finite;
    ``u``/``ut`` then hold ``exp(sigma) * w`` where representable.
    """

    r: float
    t: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    kind: str = "u"
    w: Optional[np.ndarray] = None
    wt: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    steps: int = 0
    rejected: int = 0
    source: Optional[dict] = field(default=None, repr=False)

    def __len__(self):
        return self.t.size

    def state(self, i: int) -> ModeState:
        return ModeState(self.r, float(self.t[i]), complex(self.u[i]), complex(self.ut[i]))

    @property
    def states(self) -> list:
        return [self.state(i) for i in range(self.t.size)]

    def energy(self) -> np.ndarray:
        """``0.5 (r^2 |u|^2 + |u_t|^2)`` at the output times."""
        return 0.5 * (self.r ** 2 * np.abs(self.u) ** 2 + np.abs(self.ut) ** 2)

    def interpolate(self, tq, c: Coefficient):
        """Cubic Hermite dense output of ``(u, u_t)`` at times ``tq``.

        The second derivative needed for ``u_t`` is taken from the ODE.
        """
        if self.kind != "u":
            raise ValueError("interpolation is provided for u-trajectories")
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        if np.any(tq < self.t[0]) or np.any(tq > self.t[-1]):
            raise ValueError("interpolation outside the trajectory")
        r2 = self.r ** 2
        utt = -r2 * self.u - c.g(self.t) * r2 * self.ut
        i = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, self.t.size - 2)
        t0, t1 = self.t[i], self.t[i + 1]
        h = t1 - t0
        s = (tq - t0) / h

        def herm(y0, y1, d0, d1):
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s * s * (3 - 2 * s)
            h11 = s * s * (s - 1)
            return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1

        u = herm(self.u[i], self.u[i + 1], self.ut[i], self.ut[i + 1])
        ut = herm(self.ut[i], self.ut[i + 1], utt[i], utt[i + 1])
        return u, ut

    def to_direct(self, c: Coefficient) -> "ModeTrajectory":
        """Apply the backward map ``u = exp(-r^2/2 int g) v``.

        Magnitudes are combined in the exponent, so neither factor needs to
        be representable on its own.
        """
        if self.kind != "v":
            return self
        r2 = self.r ** 2
        expo = self.sigma - 0.5 * r2 * np.asarray(c.int_g(self.t), dtype=float)
        scale = np.exp(expo)
        u = scale * self.w
        ut = scale * (self.wt - 0.5 * np.asarray(c.g(self.t)) * r2 * self.w)
        return ModeTrajectory(self.r, self.t.copy(), u, ut, kind="u",
                              steps=self.steps, rejected=self.rejected)


# ---------------------------------------------------------------------------
# constant-coefficient propagator
# ---------------------------------------------------------------------------

def propagator(b, c, h):
    """Exact propagator of ``y'' + b y' + c y = 0`` over a step ``h``.

    Returns ``(p11, p12, p21, p22, ell)`` with the true matrix equal to
    ``exp(ell) * [[p11, p12], [p21, p22]]`` acting on ``(y, y')``.  The
    scale ``ell > 0`` only occurs for growing solutions (``c < 0``).

    Parameters
    ----------
    b : array_like
        Damping coefficient ``>= 0``.
    c : array_like
        Stiffness coefficient (any sign).
    h : array_like
        Step sizes ``> 0``.

    Notes
    -----
    Three branches are used: a Taylor series in ``x = (c - b^2/4) h^2`` for
    ``|x| < 1e-3`` (covering the double root), trigonometric functions in
    the underdamped case and, in the overdamped case, the two real
    exponentials written so that no difference of close numbers occurs.
    """
    b, c, h = np.broadcast_arrays(np.asarray(b, float), np.asarray(c, float),
                                  np.asarray(h, float))
    mu = -0.5 * b
    sq = np.sqrt(np.abs(c))
    # b^2/4 - c without cancellation near the double root
    disc = np.where(c >= 0, (0.5 * b - sq) * (0.5 * b + sq), 0.25 * b * b - c)
    x = -disc * h * h
    p11 = np.empty_like(b)
    p12 = np.empty_like(b)
    p21 = np.empty_like(b)
    p22 = np.empty_like(b)
    ell = np.zeros_like(b)

    ser = np.abs(x) < 1e-3
    osc = (~ser) & (x > 0)
    od = (~ser) & (x < 0)
    od_small = od & (np.sqrt(np.maximum(-x, 0.0)) < 0.5)
    od_big = od & ~od_small

    def fill(m, C, S, damp):
        # Phi = damp * [[C - mu S, S], [-c S, C + mu S]]
        mm, cm = mu[m], c[m]
        p11[m] = damp * (C - mm * S)
        p12[m] = damp * S
        p21[m] = -damp * cm * S
        p22[m] = damp * (C + mm * S)

    if np.any(ser):
        xs, hs = x[ser], h[ser]
        C = 1 - xs / 2 * (1 - xs / 12 * (1 - xs / 30))
        S = hs * (1 - xs / 6 * (1 - xs / 20 * (1 - xs / 42)))
        fill(ser, C, S, np.exp(mu[ser] * hs))
    if np.any(osc):
        w = np.sqrt(x[osc]) / h[osc]
        wh = w * h[osc]
        fill(osc, np.cos(wh), np.sin(wh) / w, np.exp(mu[osc] * h[osc]))
    if np.any(od_small):
        k = np.sqrt(disc[od_small])
        kh = k * h[od_small]
        fill(od_small, np.cosh(kh), np.sinh(kh) / k, np.exp(mu[od_small] * h[od_small]))
    if np.any(od_big):
        m = od_big
        k = np.sqrt(disc[m])
        bm, cm, hm = b[m], c[m], h[m]
        lam_p = -cm / (0.5 * bm + k)          # the slow / growing root
        lam_m = -0.5 * bm - k
        e_ = np.maximum(lam_p * hm, 0.0)
        Ep = np.exp(lam_p * hm - e_)
        Em = np.exp(lam_m * hm - e_)
        bk = bm + 2.0 * k
        p11[m] = Ep * bk / (4.0 * k) - Em * cm / (k * bk)
        p22[m] = -Ep * cm / (k * bk) + Em * bk / (4.0 * k)
        S = (Ep - Em) / (2.0 * k)
        p12[m] = S
        p21[m] = -cm * S
        ell[m] = e_
    return p11, p12, p21, p22, ell


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
                  22 / 525, -1 / 40])


class _System:
    """Coefficients ``(b, c)`` of ``y'' + b y' + c y = 0`` for a batch."""

    def __init__(self, coef: Coefficient, r: np.ndarray, transformed: bool):
        self.coef = coef
        self.r2 = r * r
        self.transformed = transformed

    def bc(self, t, idx):
        r2 = self.r2[idx]
        g = self.coef.g(t)
        if not np.all(np.isfinite(g)):
            raise NumericalError("coefficient overflow: g(t) is not finite "
                                 f"at t={float(np.max(t)):g}")
        if self.transformed:
            g1 = self.coef.g1(t)
            return np.zeros_like(r2), r2 * (1.0 - 0.25 * g * g * r2 - 0.5 * g1)
        return g * r2, r2 + 0.0 * g

    def q(self, t, idx):
        return self.bc(t, idx)[1]

    def stiffness(self, t, idx):
        return self.coef.g(t) * self.r2[idx]


def _dopri_step(sys, t, y, yp, h, idx):
    ks_y = []
    ks_p = []
    for i in range(7):
        yi = y.copy()
        pi = yp.copy()
        for j, a in enumerate(_DP_A[i]):
            if a:
                yi = yi + (h * a) * ks_y[j]
                pi = pi + (h * a) * ks_p[j]
        b, c = sys.bc(t + _DP_C[i] * h, idx)
        ks_y.append(pi)
        ks_p.append(-c * yi - b * pi)
    ny = y + h * sum(bb * k for bb, k in zip(_DP_B, ks_y) if bb)
    np_ = yp + h * sum(bb * k for bb, k in zip(_DP_B, ks_p) if bb)
    ey = h * sum(e * k for e, k in zip(_DP_E, ks_y) if e)
    ep = h * sum(e * k for e, k in zip(_DP_E, ks_p) if e)
    z = np.zeros_like(h)
    return ny, np_, ey, ep, z, z, z


def _expo_step(sys, t, y, yp, h, idx):
    """Exponential midpoint step with step doubling.

    Returns the extrapolated state, the error estimate of the half-step
    solution, the log scale of the result and the frozen roots of the full
    step (used to project the error in stiff steps).
    """
    m = t.size
    # the three frozen propagators of one doubled step in a single call
    tt = np.concatenate([t + 0.5 * h, t + 0.25 * h, t + 0.75 * h])
    ii = np.concatenate([idx, idx, idx])
    hh = np.concatenate([h, 0.5 * h, 0.5 * h])
    b, c = sys.bc(tt, ii)
    p11, p12, p21, p22, ell = propagator(b, c, hh)
    fy = p11[:m] * y + p12[:m] * yp
    fp = p21[:m] * y + p22[:m] * yp
    sl = slice(m, 2 * m)
    my = p11[sl] * y + p12[sl] * yp
    mp = p21[sl] * y + p22[sl] * yp
    sl = slice(2 * m, 3 * m)
    hy = p11[sl] * my + p12[sl] * mp
    hp = p21[sl] * my + p22[sl] * mp
    lh = ell[m:2 * m] + ell[2 * m:]
    # bring the full step onto the scale of the two half steps
    s = np.exp(ell[:m] - lh)
    fy, fp = fy * s, fp * s
    dy, dp = (hy - fy) / 3.0, (hp - fp) / 3.0
    return hy + dy, hp + dp, dy, dp, lh, b[:m], c[:m]


_GAUSS = math.sqrt(3.0) / 6.0
_MAG = math.sqrt(3.0) / 12.0


def magnus_propagator(q1, q2, h):
    """Fourth-order Magnus propagator of ``v'' + Q(t) v = 0``.

    ``q1, q2`` are ``Q`` at the two Gauss points of the step.  With
    ``A = [[0, 1], [-Q, 0]]`` the commutator of the two samples is
    ``(q2 - q1) diag(1, -1)``, so the exponent is traceless and
    ``exp(Omega) = C I + S Omega`` with ``C, S`` from the scalar
    propagator of ``y'' - theta^2 y = 0`` over unit time.

    Returns ``(p11, p12, p21, p22, ell)`` as :func:`propagator`.
    """
    q1, q2, h = np.broadcast_arrays(np.asarray(q1, float), np.asarray(q2, float),
                                    np.asarray(h, float))
    qm = 0.5 * (q1 + q2)
    dl = _MAG * h * h * (q2 - q1)
    th2 = dl * dl - h * h * qm
    C, S, _, _, ell = propagator(np.zeros_like(th2), -th2, np.ones_like(th2))
    return C + S * dl, S * h, -S * h * qm, C - S * dl, ell


_S15 = math.sqrt(15.0)
_GAUSS3 = (0.5 - _S15 / 10.0, 0.5, 0.5 + _S15 / 10.0)


def _mul(X, Y):
    a, b, c, d = X
    e, f, g, h = Y
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def _comm(X, Y):
    P, Q = _mul(X, Y), _mul(Y, X)
    return tuple(p - q for p, q in zip(P, Q))


def _comb(*terms):
    """Linear combination of 2x2 matrices stored as 4-tuples."""
    k, X = terms[0]
    out = [k * x for x in X]
    for k, X in terms[1:]:
        out = [o + k * x for o, x in zip(out, X)]
    return tuple(out)


def _magnus6_exponent(q1, q2, q3, h):
    zero, one = 0.0 * q1, 0.0 * q1 + 1.0
    A1, A2, A3 = ((zero, one, -q, zero) for q in (q1, q2, q3))
    a1 = _comb((h, A2))
    a2 = _comb((_S15 * h / 3.0, A3), (-_S15 * h / 3.0, A1))
    a3 = _comb((10.0 * h / 3.0, A3), (-20.0 * h / 3.0, A2), (10.0 * h / 3.0, A1))
    c1 = _comm(a1, a2)
    c2 = _comb((-1.0 / 60.0, _comm(a1, _comb((2.0, a3), (1.0, c1)))))
    return _comb((1.0, a1), (1.0 / 12.0, a3),
                 (1.0 / 240.0, _comm(_comb((-20.0, a1), (-1.0, a3), (1.0, c1)),
                                     _comb((1.0, a2), (1.0, c2)))))


def magnus6_propagator(q1, q2, q3, h):
    """Sixth-order Magnus propagator of ``v'' + Q(t) v = 0``.

    ``q1, q2, q3`` are ``Q`` at the three Gauss points of the step.  The
    exponent ``Omega`` is traceless, so ``exp(Omega) = C I + S Omega`` with
    ``Omega^2 = theta^2 I``.

    Returns ``(p11, p12, p21, p22, ell)`` as :func:`propagator`.
    """
    q1, q2, q3, h = np.broadcast_arrays(*(np.asarray(x, float) for x in (q1, q2, q3, h)))
    p, q, r, _ = _magnus6_exponent(q1, q2, q3, h)
    th2 = p * p + q * r
    C, S, _, _, ell = propagator(np.zeros_like(th2), -th2, np.ones_like(th2))
    return C + S * p, S * q, S * r, C - S * p, ell


def _magnus_step(sys, t, y, yp, h, idx):
    """Sixth-order Magnus step with step doubling (``v`` equation)."""
    m = t.size
    a = np.concatenate([t, t, t + 0.5 * h])
    hh = np.concatenate([h, 0.5 * h, 0.5 * h])
    ii = np.concatenate([idx, idx, idx])
    q = [sys.q(a + c * hh, ii) for c in _GAUSS3]
    p11, p12, p21, p22, ell = magnus6_propagator(*q, hh)
    fy = p11[:m] * y + p12[:m] * yp
    fp = p21[:m] * y + p22[:m] * yp
    sl = slice(m, 2 * m)
    my = p11[sl] * y + p12[sl] * yp
    mp = p21[sl] * y + p22[sl] * yp
    sl = slice(2 * m, 3 * m)
    hy = p11[sl] * my + p12[sl] * mp
    hp = p21[sl] * my + p22[sl] * mp
    lh = ell[m:2 * m] + ell[2 * m:]
    s = np.exp(ell[:m] - lh)
    fy, fp = fy * s, fp * s
    dy, dp = (hy - fy) / 63.0, (hp - fp) / 63.0
    return hy + dy, hp + dp, dy, dp, lh, np.zeros(m), q[1][:m]


def _roots(b, c):
    """Frozen roots ``lam_plus >= lam_minus`` when real, and the gap."""
    sq = np.sqrt(np.abs(c))
    disc = np.where(c >= 0, (0.5 * b - sq) * (0.5 * b + sq), 0.25 * b * b - c)
    k = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_p = np.where(k > 0, -c / (0.5 * b + k), -0.5 * b)
    lam_m = -0.5 * b - k
    return lam_p, lam_m, 2.0 * k


# a step is treated as stiff when the subdominant solution is damped by at
# least exp(-STIFF_GAP) relative to the dominant one
STIFF_GAP = 40.0


def _norm(y, yp, wr):
    return np.maximum(np.abs(y) * wr, np.abs(yp))


@dataclass
class BatchResult:
    t: np.ndarray
    w: np.ndarray      # (n, nt)
    wt: np.ndarray
    sigma: np.ndarray  # (n, nt)
    steps: np.ndarray
    rejected: np.ndarray


def integrate_batch(coef: Coefficient, r, y0, y1, times, cfg: SolverConfig,
                    transformed: bool = False, extinction_scale=None) -> BatchResult:
    """Integrate many modes at once.

    Parameters
    ----------
    coef : Coefficient
    r : array_like, shape (n,)
        Frequencies ``>= 0``.
    y0, y1 : array_like, shape (n,)
        Initial value and velocity (of ``u``, or of ``v`` when
        ``transformed``).
    times : array_like
        Output times, starting at 0.
    cfg : SolverConfig
    transformed : bool
        Integrate the equation for ``v`` instead of ``u``.
    extinction_scale : array_like, shape (n,), optional
        Per-mode factors (``>= 1``) multiplying ``cfg.extinction``; lets a
        caller drop modes whose contribution to a sum is already small.

    Returns
    -------
    BatchResult
        States as ``exp(sigma) * w`` at every output time.
    """
    times = _check_times(times)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    n = r.size
    y = np.array(np.broadcast_to(np.asarray(y0, dtype=complex), (n,)))
    yp = np.array(np.broadcast_to(np.asarray(y1, dtype=complex), (n,)))
    if np.any(r < 0):
        raise ValueError("frequencies must be nonnegative")
    nt = times.size
    W = np.zeros((n, nt), dtype=complex)
    WT = np.zeros((n, nt), dtype=complex)
    SIG = np.zeros((n, nt))
    W[:, 0], WT[:, 0] = y, yp
    steps = np.zeros(n, dtype=np.int64)
    rejected = np.zeros(n, dtype=np.int64)

    # r = 0: exact free motion u = u0 + t u1 (identical for v)
    zero = r == 0
    if np.any(zero):
        W[zero] = y[zero, None] + times[None, :] * yp[zero, None]
        WT[zero] = yp[zero, None]
    wr = np.maximum(r, 1.0)
    norm0 = _norm(y, yp, wr)
    active = (~zero) & (norm0 > 0)
    if nt == 1:
        return BatchResult(times, W, WT, SIG, steps, rejected)
    if extinction_scale is None:
        ext_shift = np.zeros(n)
    else:
        ext_shift = np.log(np.clip(np.broadcast_to(np.asarray(extinction_scale, float), (n,)),
                                   1.0, 1.0 / max(cfg.extinction, 1e-300)))
    # the equation is linear: integrate unit-size data and carry the size in
    # sigma, so tiny data (e.g. at the edge of a compact support) stay
    # representable
    log_n0 = np.log(np.where(norm0 > 0, norm0, 1.0))
    unit = np.where(active, norm0, 1.0)
    # real division per component: complex division squares the divisor
    y = (y.real / unit) + 1j * (y.imag / unit)
    yp = (yp.real / unit) + 1j * (yp.imag / unit)
    sig0 = np.where(active, log_n0, 0.0)
    if n == 1 and active[0]:
        st, rj = _integrate_one(coef, float(r[0]), complex(y[0]), complex(yp[0]),
                                times, cfg, transformed, W, WT, SIG, float(ext_shift[0]),
                                float(sig0[0]))
        steps[0], rejected[0] = st, rj
        return BatchResult(times, W, WT, SIG, steps, rejected)
    sys_ = _System(coef, r, transformed)
    t = np.zeros(n)
    sig = sig0.copy()
    k = np.ones(n, dtype=np.int64)
    b0, _ = sys_.bc(np.zeros(n), np.arange(n))
    scale = np.maximum(r, np.abs(b0))
    h = np.minimum(0.2 * cfg.rel_tol ** 0.2 / np.maximum(scale, 1e-300), times[1])
    h = np.clip(h, cfg.min_step, cfg.max_step)
    log_ext = math.log(cfg.extinction) if cfg.extinction > 0 else -math.inf
    method = cfg.method
    split = np.zeros(n)  # root gap of the last step (0 when not stiff)

    while True:
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        ta = t[idx]
        target = times[k[idx]]
        gap = target - ta
        hh = np.minimum(h[idx], cfg.max_step)
        land = hh >= gap * (1 - 1e-14)
        hh = np.where(land, gap, hh)
        # before landing with a stiff step, stop short so that a final short
        # step relaxes the subdominant lag of the frozen propagator
        relax = STIFF_GAP / np.maximum(split[idx], 1e-300)
        short = land & (split[idx] * hh > 2.0 * STIFF_GAP) & (gap > 2.0 * relax)
        if np.any(short):
            hh = np.where(short, gap - relax, hh)
            land = land & ~short
        ya, pa = y[idx], yp[idx]
        if method == Method.EXPONENTIAL:
            use_exp = np.ones(idx.size, dtype=bool)
        elif method == Method.EXPLICIT:
            use_exp = np.zeros(idx.size, dtype=bool)
        elif transformed:
            # Magnus is exact for frozen Q; explicit steps on v are limited
            # by accuracy (h sqrt|Q| small) and would never hand over
            use_exp = np.ones(idx.size, dtype=bool)
        else:
            use_exp = sys_.stiffness(ta, idx) * hh >= 1.0
        ny = np.empty_like(ya)
        npp = np.empty_like(pa)
        ey = np.empty_like(ya)
        ep = np.empty_like(pa)
        ell = np.zeros(idx.size)
        bf = np.zeros(idx.size)
        cf = np.zeros(idx.size)
        order = np.where(use_exp, 7.0 if transformed else 3.0, 5.0)
        exp_step = _magnus_step if transformed else _expo_step
        for sel, stepper in ((use_exp, exp_step), (~use_exp, _dopri_step)):
            if np.any(sel):
                out = stepper(sys_, ta[sel], ya[sel], pa[sel], hh[sel], idx[sel])
                ny[sel], npp[sel], ey[sel], ep[sel], ell[sel], bf[sel], cf[sel] = out
        lam_p, lam_m, gap_r = _roots(bf, cf)
        gap_r = np.where(use_exp, gap_r, 0.0)
        # stiff steps: the subdominant part of the error is damped by at
        # least exp(-STIFF_GAP) within the next step, so only the part along
        # the dominant direction is controlled
        stiff = gap_r * hh >= STIFF_GAP
        if np.any(stiff):
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                alpha = (lam_m * ey - ep) / (lam_m - lam_p)
            alpha = np.where(np.isfinite(alpha), alpha, np.inf)
            ey = np.where(stiff, alpha, ey)
            ep = np.where(stiff, alpha * lam_p, ep)
        split[idx] = gap_r
        wra = wr[idx]
        sc = np.maximum(_norm(ya, pa, wra) * np.exp(-ell), _norm(ny, npp, wra))
        with np.errstate(over="ignore", invalid="ignore"):
            err = _norm(ey, ep, wra) / (cfg.abs_tol * np.exp(log_n0[idx] - sig[idx] - ell)
                                        + cfg.rel_tol * sc)
        err = np.where(np.isfinite(err), err, np.inf)
        ok = err <= 1.0
        # step size update
        with np.errstate(divide="ignore"):
            fac = 0.9 * np.where(err > 0, err, 1e-10) ** (-1.0 / order)
        fac = np.clip(fac, 0.2, 5.0)
        fac = np.where(ok, fac, np.minimum(fac, 0.9))
        hnew = hh * fac
        # a step shortened to land on an output time should not shrink h
        hnew = np.where(ok & land, np.maximum(hnew, h[idx]), hnew)
        steps[idx] += 1
        rejected[idx] += ~ok
        bad = (~ok) & (hnew < cfg.min_step)
        if np.any(bad):
            j = idx[np.nonzero(bad)[0][0]]
            raise StepSizeUnderflowError(
                f"step size underflow at t={t[j]:.6g} for r={r[j]:.6g}",
                t_reached=float(t[j]), r=float(r[j]))
        h[idx] = np.clip(hnew, cfg.min_step, cfg.max_step)
        acc = idx[ok]
        if acc.size:
            ya_ok, pa_ok = ny[ok], npp[ok]
            sig_ok = sig[acc] + ell[ok]
            # renormalise the carried magnitude
            nrm = _norm(ya_ok, pa_ok, wr[acc])
            ren = (nrm > 1e6) | ((nrm < 1e-6) & (nrm > 0))
            if np.any(ren):
                f = np.where(ren, nrm, 1.0)
                ya_ok = ya_ok / f
                pa_ok = pa_ok / f
                sig_ok = sig_ok + np.log(f)
            y[acc], yp[acc], sig[acc] = ya_ok, pa_ok, sig_ok
            t_new = np.where(land[ok], target[ok], ta[ok] + hh[ok])
            t[acc] = t_new
            landed = acc[land[ok]]
            if landed.size:
                kk = k[landed]
                W[landed, kk] = y[landed]
                WT[landed, kk] = yp[landed]
                SIG[landed, kk] = sig[landed]
                k[landed] += 1
                done = landed[k[landed] >= nt]
                active[done] = False
            if log_ext > -math.inf and not transformed:
                lg = sig[acc] + np.log(np.maximum(_norm(y[acc], yp[acc], wr[acc]), 1e-300)) - log_n0[acc]
                ext = acc[(2.0 * lg < log_ext + ext_shift[acc]) & active[acc]]
                if ext.size:
                    for j in ext:
                        W[j, k[j]:] = 0.0
                        WT[j, k[j]:] = 0.0
                    active[ext] = False
        over = idx[steps[idx] >= cfg.max_steps]
        if over.size:
            j = over[0]
            raise NumericalError(f"step budget exhausted at t={t[j]:.6g} for r={r[j]:.6g}")
    return BatchResult(times, W, WT, SIG, steps, rejected)


# ---------------------------------------------------------------------------
# scalar path for a single mode
# ---------------------------------------------------------------------------
# The same algorithm as ``integrate_batch`` written with Python scalars: numpy
# call overhead dominates for batches of one, which is the common case for
# trajectory-level work (comparisons, surrogates, residual checks).

def _propagator1(b, c, h):
    mu = -0.5 * b
    sq = math.sqrt(abs(c))
    disc = (0.5 * b - sq) * (0.5 * b + sq) if c >= 0 else 0.25 * b * b - c
    x = -disc * h * h
    if abs(x) < 1e-3:
        C = 1 - x / 2 * (1 - x / 12 * (1 - x / 30))
        S = h * (1 - x / 6 * (1 - x / 20 * (1 - x / 42)))
    elif x > 0:
        w = math.sqrt(x) / h
        C, S = math.cos(w * h), math.sin(w * h) / w
    else:
        k = math.sqrt(disc)
        kh = k * h
        if kh < 0.5:
            C, S = math.cosh(kh), math.sinh(kh) / k
        else:
            lam_p = -c / (0.5 * b + k)
            lam_m = -0.5 * b - k
            e_ = max(lam_p * h, 0.0)
            Ep = math.exp(lam_p * h - e_)
            Em = math.exp(lam_m * h - e_)
            bk = b + 2.0 * k
            S = (Ep - Em) / (2.0 * k)
            return (Ep * bk / (4.0 * k) - Em * c / (k * bk), S, -c * S,
                    -Ep * c / (k * bk) + Em * bk / (4.0 * k), e_)
    d = math.exp(mu * h)
    return d * (C - mu * S), d * S, -d * c * S, d * (C + mu * S), 0.0


class _System1:
    def __init__(self, coef: Coefficient, r: float, transformed: bool):
        self.g = coef.g
        self.g1 = coef.g1
        self.r2 = r * r
        self.transformed = transformed

    def bc(self, t):
        g = float(self.g(t))
        if not math.isfinite(g):
            raise NumericalError(f"coefficient overflow: g(t) is not finite at t={t:g}")
        r2 = self.r2
        if self.transformed:
            return 0.0, r2 * (1.0 - 0.25 * g * g * r2 - 0.5 * float(self.g1(t)))
        return g * r2, r2


_DP_A1 = [[float(a) for a in row] for row in _DP_A]
_DP_C1 = [float(v) for v in _DP_C]
_DP_B1 = [float(v) for v in _DP_B]
_DP_E1 = [float(v) for v in _DP_E]


def _dopri1(sys, t, y, yp, h):
    ky, kp = [], []
    for i in range(7):
        yi, pi = y, yp
        for j, a in enumerate(_DP_A1[i]):
            if a:
                yi += h * a * ky[j]
                pi += h * a * kp[j]
        b, c = sys.bc(t + _DP_C1[i] * h)
        ky.append(pi)
        kp.append(-c * yi - b * pi)
    ny = y + h * sum(bb * k for bb, k in zip(_DP_B1, ky))
    np_ = yp + h * sum(bb * k for bb, k in zip(_DP_B1, kp))
    ey = h * sum(e * k for e, k in zip(_DP_E1, ky))
    ep = h * sum(e * k for e, k in zip(_DP_E1, kp))
    return ny, np_, ey, ep, 0.0, 0.0, 0.0


def _expo1(sys, t, y, yp, h):
    b, c = sys.bc(t + 0.5 * h)
    f11, f12, f21, f22, lf = _propagator1(b, c, h)
    a11, a12, a21, a22, la = _propagator1(*sys.bc(t + 0.25 * h), 0.5 * h)
    m11, m12, m21, m22, lb = _propagator1(*sys.bc(t + 0.75 * h), 0.5 * h)
    my, mp = a11 * y + a12 * yp, a21 * y + a22 * yp
    hy, hp = m11 * my + m12 * mp, m21 * my + m22 * mp
    lh = la + lb
    s = math.exp(lf - lh)
    fy, fp = (f11 * y + f12 * yp) * s, (f21 * y + f22 * yp) * s
    dy, dp = (hy - fy) / 3.0, (hp - fp) / 3.0
    return hy + dy, hp + dp, dy, dp, lh, b, c


def _magnus1(q1, q2, q3, h):
    p, q, r, _ = _magnus6_exponent(q1, q2, q3, h)
    C, S, _, _, ell = _propagator1(0.0, -(p * p + q * r), 1.0)
    return C + S * p, S * q, S * r, C - S * p, ell


def _magnus_step1(sys, t, y, yp, h):
    def prop(a, hh):
        return _magnus1(*(sys.bc(a + c * hh)[1] for c in _GAUSS3), hh)
    f11, f12, f21, f22, lf = prop(t, h)
    a11, a12, a21, a22, la = prop(t, 0.5 * h)
    m11, m12, m21, m22, lb = prop(t + 0.5 * h, 0.5 * h)
    my, mp = a11 * y + a12 * yp, a21 * y + a22 * yp
    hy, hp = m11 * my + m12 * mp, m21 * my + m22 * mp
    lh = la + lb
    s = math.exp(lf - lh)
    fy, fp = (f11 * y + f12 * yp) * s, (f21 * y + f22 * yp) * s
    dy, dp = (hy - fy) / 63.0, (hp - fp) / 63.0
    qm = sys.bc(t + 0.5 * h)[1]
    return hy + dy, hp + dp, dy, dp, lh, 0.0, qm


def _roots1(b, c):
    sq = math.sqrt(abs(c))
    disc = (0.5 * b - sq) * (0.5 * b + sq) if c >= 0 else 0.25 * b * b - c
    k = math.sqrt(max(disc, 0.0))
    lam_p = -c / (0.5 * b + k) if k > 0 else -0.5 * b
    return lam_p, -0.5 * b - k, 2.0 * k


def _integrate_one(coef, r, y, yp, times, cfg, transformed, W, WT, SIG, ext_shift=0.0,
                   sig0=0.0):
    """Single-mode version of the batch loop; fills row 0 of W, WT, SIG.

    The state is ``exp(sig0) * (y, yp)`` at ``t = 0``.
    """
    nt = times.size
    wr = max(r, 1.0)
    log_n0 = sig0 + math.log(max(abs(y) * wr, abs(yp)))
    sys_ = _System1(coef, r, transformed)
    b0, _ = sys_.bc(0.0)
    scale = max(r, abs(b0))
    h = min(0.2 * cfg.rel_tol ** 0.2 / max(scale, 1e-300), float(times[1]))
    h = min(max(h, cfg.min_step), cfg.max_step)
    log_ext = math.log(cfg.extinction) + ext_shift if cfg.extinction > 0 else -math.inf
    method = cfg.method
    t, sig, k = 0.0, sig0, 1
    split = 0.0
    steps = rejected = 0
    g = coef.g
    while k < nt:
        target = float(times[k])
        gap = target - t
        hh = min(h, cfg.max_step)
        land = hh >= gap * (1 - 1e-14)
        if land:
            hh = gap
            relax = STIFF_GAP / split if split > 0 else math.inf
            if split * hh > 2.0 * STIFF_GAP and gap > 2.0 * relax:
                hh, land = gap - relax, False
        if method == Method.EXPONENTIAL:
            use_exp = True
        elif method == Method.EXPLICIT:
            use_exp = False
        elif transformed:
            use_exp = True
        else:
            use_exp = float(g(t)) * sys_.r2 * hh >= 1.0
        if use_exp:
            stepper = _magnus_step1 if transformed else _expo1
            ny, npp, ey, ep, ell, bf, cf = stepper(sys_, t, y, yp, hh)
            lam_p, lam_m, gr = _roots1(bf, cf)
            order = 7.0 if transformed else 3.0
        else:
            ny, npp, ey, ep, ell, bf, cf = _dopri1(sys_, t, y, yp, hh)
            gr, order = 0.0, 5.0
        if gr * hh >= STIFF_GAP:
            try:
                alpha = (lam_m * ey - ep) / (lam_m - lam_p)
                ey, ep = alpha, alpha * lam_p
            except (ZeroDivisionError, OverflowError):
                ey = ep = math.inf
        split = gr
        sc = max(max(abs(y) * wr, abs(yp)) * math.exp(-ell), max(abs(ny) * wr, abs(npp)))
        try:
            err = max(abs(ey) * wr, abs(ep)) / (cfg.abs_tol * math.exp(log_n0 - sig - ell)
                                              + cfg.rel_tol * sc)
        except (OverflowError, ZeroDivisionError):
            err = math.inf
        if not math.isfinite(err):
            err = math.inf
        ok = err <= 1.0
        fac = 0.9 * (err if err > 0 else 1e-10) ** (-1.0 / order) if err < math.inf else 0.2
        fac = min(max(fac, 0.2), 5.0)
        if not ok:
            fac = min(fac, 0.9)
        hnew = hh * fac
        if ok and land:
            hnew = max(hnew, h)
        steps += 1
        if not ok:
            rejected += 1
            if hnew < cfg.min_step:
                raise StepSizeUnderflowError(
                    f"step size underflow at t={t:.6g} for r={r:.6g}", t_reached=t, r=r)
        h = min(max(hnew, cfg.min_step), cfg.max_step)
        if ok:
            y, yp, sig = ny, npp, sig + ell
            nrm = max(abs(y) * wr, abs(yp))
            if nrm > 1e6 or 0 < nrm < 1e-6:
                y, yp, sig = y / nrm, yp / nrm, sig + math.log(nrm)
            t = target if land else t + hh
            if land:
                W[0, k], WT[0, k], SIG[0, k] = y, yp, sig
                k += 1
            if log_ext > -math.inf and not transformed and k < nt:
                nrm = max(abs(y) * wr, abs(yp))
                lg = sig + math.log(max(nrm, 1e-300)) - log_n0
                if 2.0 * lg < log_ext:
                    W[0, k:] = 0.0
                    WT[0, k:] = 0.0
                    break
        if steps >= cfg.max_steps:
            raise NumericalError(f"step budget exhausted at t={t:.6g} for r={r:.6g}")
    return steps, rejected


def _times(cfg: SolverConfig, times):
    if times is None:
        times = cfg.t_grid
    if times is None:
        raise ValueError("no output times: pass times= or set cfg.t_grid")
    return _check_times(times)


def integrate_mode(c: Coefficient, r: float, u0: complex, u1: complex,
                   cfg: SolverConfig = SolverConfig(), times=None) -> ModeTrajectory:
    """Integrate ``u'' + r^2 u + g r^2 u' = 0`` from ``(u0, u1)`` at ``t = 0``.

    Examples
    --------
    >>> from viscowave.coefficients import make_builtin
    >>> tr = integrate_mode(make_builtin("const", [2.0]), 1.0, 1.0, 0.0,
    ...                     times=[0.0, 1.0])
    >>> round(tr.u[-1].real, 9)
    0.735758882
    """
    t = _times(cfg, times)
    res = integrate_batch(c, [r], [u0], [u1], t, cfg)
    scale = np.exp(res.sigma[0])
    return ModeTrajectory(float(r), t, res.w[0] * scale, res.wt[0] * scale,
                          steps=int(res.steps[0]), rejected=int(res.rejected[0]),
                          source={"c": c, "r": float(r), "u0": complex(u0),
                                  "u1": complex(u1), "cfg": cfg})


def transformed_initial_data(c: Coefficient, r: float, u0: complex, u1: complex):
    """``(v0, v1)`` corresponding to ``(u0, u1)``."""
    return complex(u0), 0.5 * float(c.g(0.0)) * r * r * complex(u0) + complex(u1)


def integrate_transformed(c: Coefficient, r: float, v0: complex, v1: complex,
                          cfg: SolverConfig = SolverConfig(), times=None) -> ModeTrajectory:
    """Integrate ``v'' + Q(t) v = 0``; magnitudes are carried in ``sigma``.

    Use :func:`transformed_initial_data` to obtain ``(v0, v1)`` from the
    data of ``u`` and :meth:`ModeTrajectory.to_direct` for the way back.
    """
    t = _times(cfg, times)
    res = integrate_batch(c, [r], [v0], [v1], t, cfg, transformed=True)
    w, wt, sig = res.w[0], res.wt[0], res.sigma[0]
    with np.errstate(over="ignore", invalid="ignore"):
        scale = np.exp(sig)
        v, vt = w * scale, wt * scale
    return ModeTrajectory(float(r), t, v, vt, kind="v", w=w, wt=wt, sigma=sig,
                          steps=int(res.steps[0]), rejected=int(res.rejected[0]),
                          source={"c": c, "r": float(r), "v0": complex(v0),
                                  "v1": complex(v1), "cfg": cfg})


# ---------------------------------------------------------------------------
# energy identity
# ---------------------------------------------------------------------------

def _identity_residual(tr: ModeTrajectory, c: Coefficient) -> float:
    r2 = tr.r ** 2
    t = tr.t
    E = tr.energy()
    E0 = E[0]
    if E0 == 0:
        return 0.0
    g = np.asarray(c.g(t), dtype=float)
    g1 = np.asarray(c.g1(t), dtype=float)
    ut2 = np.abs(tr.ut) ** 2
    utt = -r2 * tr.u - g * r2 * tr.ut
    f = g * r2 * ut2
    fp = g1 * r2 * ut2 + 2.0 * g * r2 * np.real(np.conj(tr.ut) * utt)
    dt = np.diff(t)
    # trapezoid with endpoint-derivative correction
    seg = 0.5 * dt * (f[1:] + f[:-1]) + dt * dt / 12.0 * (fp[:-1] - fp[1:])
    D = np.concatenate([[0.0], np.cumsum(seg)])
    return float(np.max(np.abs(E + D - E0)) / E0)


def dissipation_residual(traj: ModeTrajectory, c: Coefficient,
                         max_refinements: int = 8, max_points: int = 200_001) -> float:
    """Relative defect of the energy identity ``E(t) + int g r^2 |u_t|^2 = E(0)``.

    The dissipation integral uses the trapezoid rule with derivative
    correction on the output grid.  When the trajectory knows how it was
    produced, the grid is refined by re-integrating on doubled grids until
    two successive estimates agree to 10 percent (or both fall below 1e-13).
    """
    if traj.kind != "u":
        raise ValueError("dissipation_residual needs a u-trajectory")
    res = _identity_residual(traj, c)
    src = traj.source
    if src is None or "u0" not in src:
        return res
    t = traj.t
    for _ in range(max_refinements):
        if 2 * t.size - 1 > max_points:
            break
        mid = 0.5 * (t[1:] + t[:-1])
        t = np.sort(np.concatenate([t, mid]))
        tr = integrate_mode(src["c"], src["r"], src["u0"], src["u1"], src["cfg"], times=t)
        new = _identity_residual(tr, c)
        converged = abs(new - res) <= 0.1 * max(new, res) or max(new, res) < 1e-13
        res = new
        if converged:
            break
    return res
