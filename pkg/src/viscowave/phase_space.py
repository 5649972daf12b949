"""Zone geometry of the extended phase space ``(t, r)``.

Each regime splits the phase space into zones by thresholds on a single
monotone indicator:

* regime A: ``G_half(t) r**2`` against ``N`` (pseudo-differential / elliptic);
* regimes B, C: ``g(t) r`` against ``eps`` and ``N`` (hyperbolic / reduced /
  elliptic);
* regimes D, E: ``q = 1 - g**2 r**2 / (4 h)`` with ``h = 1 - g'/2`` against
  ``+-1/4`` (and ``-N`` in regime E, which adds a pseudo-differential band).

Separating lines are the level sets of the indicator, solved for ``t`` at
fixed ``r`` by bracketed bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import optimize

from .coefficients import Coefficient, Regime
from .errors import NoCrossingError, RegimeMismatchError, RootFindingError

T_MAX_DEFAULT = 1e6


class ZoneLabel(str, Enum):
    HYPERBOLIC = "Hyperbolic"
    REDUCED = "Reduced"
    PSEUDO_DIFFERENTIAL = "PseudoDifferential"
    ELLIPTIC = "Elliptic"


# integer codes used by vectorised classification and CSV output
LABEL_CODES = {ZoneLabel.HYPERBOLIC: 0, ZoneLabel.REDUCED: 1,
               ZoneLabel.PSEUDO_DIFFERENTIAL: 2, ZoneLabel.ELLIPTIC: 3}
CODE_LABELS = {v: k for k, v in LABEL_CODES.items()}


@dataclass(frozen=True)
class ZoneConstants:
    """Zone thresholds.

    Parameters
    ----------
    N : float
        Large constant.  Any ``N > quarter`` is accepted so that small
        worked examples stay expressible; production runs use ``N >= 4``.
    eps : float
        Small constant in ``(0, 1)`` for regimes B and C.
    """

    N: float = 100.0
    eps: float = 0.1
    quarter: float = 0.25

    def __post_init__(self):
        if not self.N > self.quarter:
            raise ValueError(f"N must exceed {self.quarter:g}")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")


DEFAULT_CONSTS = ZoneConstants()


def _zone_regime(c: Coefficient, regime) -> Regime:
    reg = Regime.parse(regime) if regime is not None else c.regime
    if reg == Regime.C:
        return Regime.B  # same zone geometry
    return reg


def indicator(regime, c: Coefficient, t, r):
    """The monotone quantity whose level sets separate the zones.

    Returns ``G_half r^2`` (regime A), ``g r`` (B, C), or
    ``1 - g^2 r^2/(4h)`` (D, E); for the scale-invariant and custom tags the
    region indicator ``1 - g^2 r^2/4 - g'/2`` is returned.
    """
    reg = _zone_regime(c, regime)
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        if reg == Regime.A:
            return c.G_half(t) * r * r
        if reg == Regime.B:
            return np.exp(c.logg(t) + np.log(r)) if np.all(r > 0) else c.g(t) * r
        g = c.g(t)
        if reg in (Regime.D, Regime.E):
            return 1.0 - g * g * r * r / (4.0 * c.h(t))
        return 1.0 - g * g * r * r / 4.0 - 0.5 * c.g1(t)


def _check_monotone(reg: Regime, c: Coefficient, t):
    g1 = float(c.g1(t))
    if reg == Regime.A and not g1 > 0:
        raise RegimeMismatchError(f"regime A needs increasing g; g'({t:g}) = {g1:g}")
    if reg == Regime.B and not g1 < 0 and float(c.g(t)) > 0:
        raise RegimeMismatchError(f"regimes B/C need decreasing g; g'({t:g}) = {g1:g}")
    if reg == Regime.D and g1 > 0:
        raise RegimeMismatchError(f"regime D needs nonincreasing g; g'({t:g}) = {g1:g}")
    if reg == Regime.E and g1 < 0:
        raise RegimeMismatchError(f"regime E needs nondecreasing g; g'({t:g}) = {g1:g}")


def classify_many(regime, c: Coefficient, t, r, consts: ZoneConstants = DEFAULT_CONSTS):
    """Vectorised classification; returns integer codes (see ``LABEL_CODES``).

    Boundary ties go to the more dissipative neighbour.
    """
    reg = _zone_regime(c, regime)
    t, r = np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float))
    x = indicator(reg, c, t, r)
    H, R, P, L = 0, 1, 2, 3
    N, eps, q = consts.N, consts.eps, consts.quarter
    if reg == Regime.A:
        return np.where(x >= N, L, P)
    if reg == Regime.B:
        return np.select([x >= N, x >= eps], [L, R], H)
    if reg == Regime.D:
        return np.select([x <= -q, x <= q], [L, R], H)
    if reg == Regime.E:
        return np.select([x <= -N, x <= -q, x <= q], [L, P, R], H)
    # region split only
    return np.where(x <= 0, L, H)


def classify(regime, c: Coefficient, t: float, r: float,
             consts: ZoneConstants = DEFAULT_CONSTS) -> ZoneLabel:
    """Zone label of the point ``(t, r)``.

    Examples
    --------
    >>> from viscowave.coefficients import make_builtin
    >>> classify("A", make_builtin("exp3"), 0.0, 5.0).value
    'PseudoDifferential'
    """
    if t < 0 or not r > 0:
        raise ValueError("classify needs t >= 0 and r > 0")
    reg = _zone_regime(c, regime)
    _check_monotone(reg, c, t)
    return CODE_LABELS[int(classify_many(reg, c, t, r, consts))]


# ---------------------------------------------------------------------------
# separating lines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveSpec:
    """One boundary: ``indicator(t, r) == level``.

    ``later`` and ``earlier`` name the zones found just after and just before
    the crossing time along a vertical line ``r = const``.
    """

    name: str
    level: float
    earlier: ZoneLabel
    later: ZoneLabel


def curve_specs(regime, consts: ZoneConstants = DEFAULT_CONSTS) -> list[CurveSpec]:
    """Boundaries of a regime, ordered by crossing time in ``t``."""
    reg = Regime.parse(regime)
    if reg == Regime.C:
        reg = Regime.B
    Z = ZoneLabel
    N, eps, q = consts.N, consts.eps, consts.quarter
    if reg == Regime.A:
        return [CurveSpec("t_xi", N, Z.PSEUDO_DIFFERENTIAL, Z.ELLIPTIC)]
    if reg == Regime.B:
        return [CurveSpec("t_xi1", N, Z.ELLIPTIC, Z.REDUCED),
                CurveSpec("t_xi2", eps, Z.REDUCED, Z.HYPERBOLIC)]
    if reg == Regime.D:
        return [CurveSpec("t_xi1", -q, Z.ELLIPTIC, Z.REDUCED),
                CurveSpec("t_xi2", q, Z.REDUCED, Z.HYPERBOLIC)]
    if reg == Regime.E:
        return [CurveSpec("t_xi3", q, Z.HYPERBOLIC, Z.REDUCED),
                CurveSpec("t_xi2", -q, Z.REDUCED, Z.PSEUDO_DIFFERENTIAL),
                CurveSpec("t_xi1", -N, Z.PSEUDO_DIFFERENTIAL, Z.ELLIPTIC)]
    return []


def region_curve_spec() -> CurveSpec:
    """Diagnostic boundary ``1 - g^2 r^2/4 - g'/2 = 0`` between the regions."""
    return CurveSpec("region", 0.0, ZoneLabel.HYPERBOLIC, ZoneLabel.ELLIPTIC)


def _residual(reg, c, spec, t, r):
    val = float(indicator(reg, c, t, r))
    return abs(val - spec.level) / max(1.0, abs(spec.level))


@lru_cache(maxsize=4096)
def _solve_cached(reg, c, name, r, consts, t_max, diag):
    if diag:
        spec = region_curve_spec()
        ind_reg = Regime.CUSTOM
    else:
        specs = {s.name: s for s in curve_specs(reg, consts)}
        if name not in specs:
            raise KeyError(f"regime {reg.value} has no curve {name!r}; "
                           f"choose from {sorted(specs)}")
        spec = specs[name]
        ind_reg = reg

    def f(t):
        return float(indicator(ind_reg, c, t, r)) - spec.level

    # the indicator is monotone in t; the sign at t=0 tells whether the
    # point already lies past the boundary
    f0 = f(0.0)
    fT = f(t_max)
    if not np.isfinite(fT):
        # shrink the window until the indicator is finite (overflowing g)
        hi = t_max
        while hi > 1e-12 and not np.isfinite(f(hi)):
            hi *= 0.5
        t_max, fT = hi, f(hi)
    if f0 == 0.0:
        return 0.0
    if np.sign(f0) == np.sign(fT):
        # same side at both ends: either already crossed at t=0, or never
        increasing = _increasing(ind_reg, c, t_max)
        later_side = 1.0 if increasing else -1.0
        if np.sign(f0) == later_side:
            return 0.0
        raise NoCrossingError(
            f"curve {spec.name} not crossed for r={r:g} within [0, {t_max:g}]")
    root = optimize.bisect(f, 0.0, t_max, xtol=1e-300, rtol=8.9e-16,
                           maxiter=200, disp=False)
    # take the better of the two floats enclosing the root
    best = min((root, np.nextafter(root, 0.0), np.nextafter(root, np.inf)),
               key=lambda x: abs(f(x)) if x >= 0 else math.inf)
    res = abs(f(best)) / max(1.0, abs(spec.level))
    if res > 1e-10:
        raise RootFindingError(
            f"curve {spec.name}: residual {res:.3g} at t={best:g}, r={r:g}")
    return float(best)


def _increasing(reg, c, t_max):
    """Direction in which the indicator moves with t (probe-based)."""
    if reg == Regime.A:
        return True
    if reg == Regime.B:
        return False
    a, b = 0.0, min(t_max, 1.0)
    ia, ib = float(indicator(reg, c, a, 1.0)), float(indicator(reg, c, b, 1.0))
    return ib >= ia


def separating_line(regime, c: Coefficient, name: str, r: float,
                    consts: ZoneConstants = DEFAULT_CONSTS,
                    t_max: float = T_MAX_DEFAULT) -> float:
    """Crossing time ``t_xi(r)`` of the named boundary.

    Parameters
    ----------
    regime : str or Regime
    name : str
        Curve id from :func:`curve_specs`, or ``"region"`` for the
        hyperbolic/elliptic region boundary.
    r : float
        Frequency magnitude.

    Returns
    -------
    float
        The crossing time, or 0 when the point ``(0, r)`` is already past
        the boundary.

    Raises
    ------
    NoCrossingError
        No crossing inside ``[0, t_max]``.
    RootFindingError
        The bisection could not meet the residual tolerance.
    """
    reg = _zone_regime(c, regime)
    return _solve_cached(reg, c, name, float(r), consts, float(t_max),
                         name == "region")


@dataclass(frozen=True)
class SeparatingLines:
    """Named boundary solvers of one regime, ordered by crossing time."""

    regime: Regime
    coefficient: Coefficient
    consts: ZoneConstants
    curves: tuple

    def __call__(self, name: str, r: float, t_max: float = T_MAX_DEFAULT) -> float:
        return separating_line(self.regime, self.coefficient, name, r,
                               self.consts, t_max)

    def names(self) -> list[str]:
        return [s.name for s in self.curves]


def separating_lines(regime, c: Coefficient,
                     consts: ZoneConstants = DEFAULT_CONSTS) -> SeparatingLines:
    reg = _zone_regime(c, regime)
    return SeparatingLines(reg, c, consts, tuple(curve_specs(reg, consts)))


def zone_grid(regime, c: Coefficient, t_grid, r_grid,
              consts: ZoneConstants = DEFAULT_CONSTS) -> np.ndarray:
    """Label codes on the tensor grid, shape ``(len(t_grid), len(r_grid))``."""
    T, R = np.meshgrid(np.asarray(t_grid, float), np.asarray(r_grid, float),
                       indexing="ij")
    return classify_many(regime, c, T, R, consts)
