"""Right-hand sides of the energy estimates and ratio-based verification.

Every estimate has the form ``measured(t) <~ bound(t)`` with an unspecified
constant.  :func:`verify` checks that the ratio ``measured / bound``
stays below a fixed ceiling after a burn-in and does not grow in a
sustained way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import optimize, stats

from .coefficients import Coefficient, Regime
from .energy import DataProfile, EnergyCurve, sobolev_norm
from .errors import NoCrossingError, ParameterRangeError, RegimeMismatchError
from .phase_space import DEFAULT_CONSTS, ZoneConstants, separating_line


class Theorem(str, Enum):
    """Estimate families, keyed by the regime they belong to."""

    T_A = "T_A"
    T_B = "T_B"
    T_C = "T_C"
    T_D = "T_D"
    T_E = "T_E"
    T_SI = "T_SI"

    @classmethod
    def parse(cls, value) -> "Theorem":
        if isinstance(value, Theorem):
            return value
        key = str(value).strip().upper().replace("-", "_")
        if not key.startswith("T_"):
            key = "T_" + key
        try:
            return cls(key)
        except ValueError:
            raise ParameterRangeError(
                f"unknown theorem tag {value!r}; expected one of {[t.value for t in cls]}"
            ) from None

    @property
    def regime(self) -> Regime:
        return {"T_A": Regime.A, "T_B": Regime.B, "T_C": Regime.C, "T_D": Regime.D,
                "T_E": Regime.E, "T_SI": Regime.SI}[self.value]


# minimal order and the order of the u_t estimate, relative to beta
_ORDERS = {Theorem.T_A: (2.0, -2.0), Theorem.T_B: (2.0, -2.0), Theorem.T_C: (1.0, -1.0),
           Theorem.T_D: (1.0, 0.0), Theorem.T_E: (1.0, 0.0), Theorem.T_SI: (1.0, -1.0)}


def theorem_for_regime(regime) -> Theorem:
    reg = Regime.parse(regime)
    for th in Theorem:
        if th.regime == reg:
            return th
    raise RegimeMismatchError(f"no estimate is attached to regime {reg.value}")


@dataclass(eq=False)
class BoundEnvelope:
    """Evaluable right-hand side of one estimate.

    Attributes
    ----------
    theorem : Theorem
    beta : float
        Order of the ``u`` estimate.
    ut_order : float
        Order of the ``u_t`` estimate (``beta - 2``, ``beta - 1`` or
        ``beta`` depending on the theorem).
    norms : dict
        Data norms by name, e.g. ``"u0:Hdot^2"``.
    C_cal : float
        Constant in ``exp(-C int 1/g)`` (used by ``T_E`` only).
    """

    theorem: Theorem
    beta: float
    ut_order: float
    norms: dict
    coefficient: Coefficient
    profile: DataProfile
    C_cal: float = 0.25
    kappa: Optional[float] = None

    def _norm(self, key):
        return self.norms[key]

    def exp_branch(self, t):
        return np.exp(-self.C_cal * np.asarray(self.coefficient.int_inv_g(t), dtype=float))

    def power_branch(self, t, order):
        return np.asarray(self.coefficient.G_one(t), dtype=float) ** (-0.5 * order)

    def __call__(self, t):
        """``(bound_u(t), bound_ut(t))`` as arrays."""
        t = np.asarray(t, dtype=float)
        th, b, n = self.theorem, self.beta, self.norms
        one = np.ones_like(t)
        if th in (Theorem.T_A, Theorem.T_B, Theorem.T_C, Theorem.T_SI):
            total = sum(n.values())
            bu = total * one
            if th == Theorem.T_A:
                but = np.asarray(self.coefficient.g(t), dtype=float) * total
            elif th == Theorem.T_SI:
                but = (1.0 + t) * total
            else:
                but = total * one
            return bu, but
        a0, a1 = n["u0:H^%g" % b], n["u1:H^%g" % (b - 1)]
        c0, c1 = n["u0:H^%g" % (b + 1)], n["u1:H^%g" % b]
        p = self.power_branch
        if th == Theorem.T_D:
            bu = p(t, b) * a0 + p(t, b - 1) * a1
            but = p(t, b + 1) * c0 + p(t, b) * c1
            return bu, but
        e = self.exp_branch(t)
        bu = np.maximum(p(t, b), e) * a0 + np.maximum(p(t, b - 1), e) * a1
        but = np.maximum(p(t, b + 1), e) * c0 + np.maximum(p(t, b), e) * c1
        return bu, but

    def branch_crossings(self, t_grid, order: Optional[float] = None) -> np.ndarray:
        """Times where the power and exponential branches of ``T_E`` swap
        (sign changes of their log-difference on ``t_grid``)."""
        order = self.beta if order is None else order
        t = np.asarray(t_grid, dtype=float)
        d = -0.5 * order * np.log(np.asarray(self.coefficient.G_one(t), dtype=float)) \
            + self.C_cal * np.asarray(self.coefficient.int_inv_g(t), dtype=float)
        s = np.sign(d)
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        return t[idx + 1]

    def to_dict(self) -> dict:
        return {"theorem": self.theorem.value, "beta": self.beta, "ut_order": self.ut_order,
                "norms": dict(self.norms), "C_cal": self.C_cal, "kappa": self.kappa,
                "coefficient": self.coefficient.label, "profile": self.profile.id}


def make_envelope(theorem, c: Coefficient, beta: float, p: DataProfile,
                  C_cal: float = 0.25, kappa: float = 0.05,
                  check_regime: bool = True) -> BoundEnvelope:
    """Build the right-hand side of ``theorem`` for coefficient ``c`` and
    data ``p``.

    Raises
    ------
    RegimeMismatchError
        If ``c`` is tagged with a different regime.
    ParameterRangeError
        For an order below the theorem's minimum or ``kappa <= 0``.
    """
    th = Theorem.parse(theorem)
    if check_regime and c.regime != th.regime:
        raise RegimeMismatchError(f"{th.value} needs a regime {th.regime.value} coefficient, "
                                  f"got {c.label} tagged {c.regime.value}")
    beta = float(beta)
    lo, shift = _ORDERS[th]
    if beta < lo:
        raise ParameterRangeError(f"{th.value} requires beta >= {lo:g}, got {beta:g}")
    if th == Theorem.T_C and not kappa > 0:
        raise ParameterRangeError("T_C requires kappa > 0")
    norms = {}
    if th in (Theorem.T_A, Theorem.T_B):
        norms["u0:Hdot^%g" % beta] = sobolev_norm(p, "u0", beta, True)
        norms["u1:Hdot^%g" % (beta - 2)] = sobolev_norm(p, "u1", beta - 2, True)
    elif th == Theorem.T_C:
        norms["u0:Hdot^%g" % (beta + kappa + 1)] = sobolev_norm(p, "u0", beta + kappa + 1, True)
        norms["u1:Hdot^%g" % (beta + kappa - 1)] = sobolev_norm(p, "u1", beta + kappa - 1, True)
    elif th == Theorem.T_SI:
        norms["u0:Hdot^%g" % beta] = sobolev_norm(p, "u0", beta, True)
        norms["u1:Hdot^%g" % (beta - 1)] = sobolev_norm(p, "u1", beta - 1, True)
    else:
        for which, s in (("u0", beta), ("u1", beta - 1), ("u0", beta + 1), ("u1", beta)):
            norms["%s:H^%g" % (which, s)] = sobolev_norm(p, which, s, False)
    return BoundEnvelope(th, beta, beta + shift, norms, c, p, float(C_cal),
                         float(kappa) if th == Theorem.T_C else None)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class RatioCheck:
    """Ratio of one measured quantity to its bound after burn-in."""

    name: str
    ratio: np.ndarray
    sup: float
    slope: float
    clock: str
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "sup_ratio": self.sup, "slope": self.slope,
                "clock": self.clock, "pass": self.passed}


@dataclass
class VerifyReport:
    """Outcome of :func:`verify`.

    ``times`` are the samples after burn-in and ``R`` the ratio of
    ``e_u`` to its bound there.
    """

    theorem: str
    beta: float
    burn_in: float
    times: np.ndarray
    R: np.ndarray
    sup_ratio: float
    slope: float
    passed: bool
    checks: list = field(default_factory=list)
    R_max: float = 10.0
    slope_max: float = 0.05
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "beta": self.beta, "burn_in": self.burn_in,
                "sup_ratio": self.sup_ratio, "slope": self.slope, "pass": self.passed,
                "R_max": self.R_max, "slope_max": self.slope_max,
                "checks": [c.to_dict() for c in self.checks], "notes": list(self.notes)}


def burn_in_time(c: Coefficient, level: float = 4.0, t_max: float = 1e12) -> float:
    """First time with ``G_one(t) = level``; 0 if never reached.

    An integrable coefficient may keep ``G_one`` below the level forever;
    then nothing is excluded.
    """
    f = lambda t: float(c.G_one(t)) - level
    if f(0.0) >= 0:
        return 0.0
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > t_max or not math.isfinite(f(hi)):
            return 0.0
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-12, rtol=1e-12))


def _growth_slope(t, G, R):
    """Least-squares slope of ``log R`` against ``log G_one`` (or against
    ``log(1 + t)`` when ``G_one`` barely moves on the window)."""
    ok = R > 0
    if ok.sum() < 3:
        return 0.0, "none"
    lg = np.log(G[ok])
    clock = "log_G_one"
    if np.ptp(lg) < 0.5:
        lg, clock = np.log1p(t[ok]), "log_t"
        if np.ptp(lg) < 1e-12:
            return 0.0, "none"
    return float(stats.linregress(lg, np.log(R[ok])).slope), clock


def _ratio(meas, bound):
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(meas == 0, 0.0, meas / bound)
    return np.where(np.isfinite(R), R, np.inf)


def verify(curve: EnergyCurve, env: BoundEnvelope, burn_in: Optional[float] = None,
           ut_curve: Optional[EnergyCurve] = None, R_max: float = 10.0,
           slope_max: float = 0.05) -> VerifyReport:
    """Compare measured curves with an envelope.

    Parameters
    ----------
    curve : EnergyCurve
        Curve at order ``env.beta``; its ``e_u`` is checked against
        ``bound_u``.
    env : BoundEnvelope
    burn_in : float, optional
        Samples before this time are ignored (default: ``G_one = 4``).
    ut_curve : EnergyCurve, optional
        Curve at order ``env.ut_order`` whose ``e_ut`` is checked against
        ``bound_ut``.  When omitted, ``curve`` is used if its order matches;
        otherwise the ``u_t`` check is skipped and noted.

    Returns
    -------
    VerifyReport
        PASS iff every checked ratio has ``sup <= R_max`` and growth slope
        ``<= slope_max``.
    """
    if abs(curve.beta - env.beta) > 1e-12:
        raise ValueError(f"curve order {curve.beta:g} differs from envelope order {env.beta:g}")
    c = env.coefficient
    b0 = burn_in_time(c) if burn_in is None else float(burn_in)
    t = curve.times
    m = t >= b0
    tt = t[m]
    G = np.asarray(c.G_one(tt), dtype=float)
    bu, _ = env(tt)
    notes = []
    R = _ratio(curve.e_u[m], bu)
    checks = []
    sup = float(R.max()) if R.size else 0.0
    sl, clock = _growth_slope(tt, G, R)
    checks.append(RatioCheck("u", R, sup, sl, clock, sup <= R_max and sl <= slope_max))
    src = ut_curve
    if src is None and abs(curve.beta - env.ut_order) < 1e-12:
        src = curve
    if src is not None:
        if abs(src.beta - env.ut_order) > 1e-12:
            raise ValueError(f"u_t curve order {src.beta:g} differs from {env.ut_order:g}")
        if src.times.shape != t.shape or np.any(src.times != t):
            raise ValueError("u and u_t curves must share their time grid")
        _, but = env(tt)
        Rt = _ratio(src.e_ut[m], but)
        supt = float(Rt.max()) if Rt.size else 0.0
        slt, clockt = _growth_slope(tt, G, Rt)
        checks.append(RatioCheck("ut", Rt, supt, slt, clockt,
                                 supt <= R_max and slt <= slope_max))
    else:
        notes.append(f"u_t check skipped: no curve at order {env.ut_order:g}")
    ok = all(ch.passed for ch in checks)
    return VerifyReport(env.theorem.value, env.beta, b0, tt, R,
                        max(ch.sup for ch in checks), max(ch.slope for ch in checks),
                        ok, checks, R_max, slope_max, notes)


# ---------------------------------------------------------------------------
# two-phase profile for increasing coefficients
# ---------------------------------------------------------------------------

def default_profile_grid(points: int = 600) -> np.ndarray:
    """Small frequencies, log-spaced on ``[1e-6, 1]``."""
    return np.geomspace(1e-6, 1.0, points)


def s_r_profile(c: Coefficient, r_exp: float, t: float, rgrid=None, C: float = 0.25,
                C_N: Optional[float] = None, consts: ZoneConstants = DEFAULT_CONSTS,
                return_max: bool = False):
    """Ratio of ``max_r S(t, r)`` to ``G_one(t)^(-r_exp/2)``.

    ``S(t, r) = r^r_exp exp(-C int_{t1}^t 1/g) exp(-C_N r^2 int_0^{t1} g)``
    with ``t1`` the entry time into the elliptic zone, clamped to ``[0, t]``.

    Parameters
    ----------
    c : Coefficient
        Regime E coefficient.
    r_exp : float
        Power of the frequency, ``>= 0``.
    rgrid : array_like, optional
        Frequencies to maximise over (default :func:`default_profile_grid`).
    C_N : float, optional
        Defaults to ``1 / (4 (N + 1))``.
    """
    if c.regime != Regime.E:
        raise RegimeMismatchError(f"s_r_profile needs a regime E coefficient, got {c.regime.value}")
    if r_exp < 0:
        raise ParameterRangeError("r_exp must be nonnegative")
    t = float(t)
    rs = default_profile_grid() if rgrid is None else np.asarray(rgrid, dtype=float)
    CN = 1.0 / (4.0 * (consts.N + 1.0)) if C_N is None else float(C_N)
    t1 = np.empty(rs.size)
    for i, r in enumerate(rs):
        try:
            t1[i] = min(separating_line(Regime.E, c, "t_xi1", float(r), consts), t)
        except NoCrossingError:
            t1[i] = t
    ig_t1 = np.asarray(c.int_g(t1), dtype=float)
    iinv = float(c.int_inv_g(t)) - np.asarray(c.int_inv_g(t1), dtype=float)
    with np.errstate(divide="ignore"):
        logS = r_exp * np.log(rs) - C * iinv - CN * rs * rs * ig_t1
    if r_exp == 0:
        logS = -C * iinv - CN * rs * rs * ig_t1
    k = int(np.argmax(logS))
    ratio = math.exp(float(logS[k]) + 0.5 * r_exp * math.log(float(c.G_one(t))))
    if return_max:
        return ratio, float(rs[k]), float(t1[k])
    return ratio
