"""Empirical decay rates of energy curves and the parabolic-effect test.

A rate is the least-squares slope of ``log e_u`` against one of three
clocks: ``log G_one(t)``, ``log(1 + t)`` or the iterated
``log log log(e^2 + t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .energy import EnergyCurve
from .errors import FitError


class Abscissa(str, Enum):
    LOG_G_ONE = "log_G_one"
    LOG_T = "log_t"
    LOGLOG = "loglog"

    @classmethod
    def parse(cls, value) -> "Abscissa":
        if isinstance(value, Abscissa):
            return value
        key = str(value).strip().lower()
        for a in cls:
            if key in (a.value.lower(), a.name.lower()):
                return a
        raise FitError(f"unknown abscissa {value!r}; expected one of "
                       f"{[a.value for a in cls]}")


def default_abscissa(regime) -> Abscissa:
    """``log G_one`` for the decaying regimes D and E, ``log t`` otherwise."""
    tag = getattr(regime, "name", str(regime))
    return Abscissa.LOG_G_ONE if tag in ("D", "E") else Abscissa.LOG_T


def abscissa_values(curve: EnergyCurve, kind) -> np.ndarray:
    kind = Abscissa.parse(kind)
    t = curve.times
    if kind == Abscissa.LOG_T:
        return np.log1p(t)
    if kind == Abscissa.LOGLOG:
        return np.log(np.log(np.log(math.e ** 2 + t)))
    if curve.G is None:
        raise FitError("curve carries no G_one values; cannot use the log_G_one clock")
    return np.log(curve.G)


@dataclass(frozen=True)
class FitResult:
    """Least-squares rate ``d log e / d x`` on a time window."""

    slope: float
    stderr: float
    window: tuple
    r2: float
    intercept: float = 0.0
    samples: int = 0
    abscissa: str = Abscissa.LOG_T.value
    beta: Optional[float] = None

    def to_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "window": list(self.window),
                "r2": self.r2, "intercept": self.intercept, "samples": self.samples,
                "abscissa": self.abscissa, "beta": self.beta}


def window_from_G(curve: EnergyCurve, G_lo: float, G_hi: float) -> tuple:
    """Time window on which ``G_lo <= G_one(t) <= G_hi``."""
    if curve.G is None:
        raise FitError("curve carries no G_one values")
    m = (curve.G >= G_lo) & (curve.G <= G_hi)
    if not m.any():
        raise FitError(f"no sample with G_one in [{G_lo:g}, {G_hi:g}]")
    return float(curve.times[m].min()), float(curve.times[m].max())


def fit_rate(curve: EnergyCurve, abscissa="log_t", window: Optional[Sequence[float]] = None,
             which: str = "e_u", min_samples: int = 10) -> FitResult:
    """Ordinary least squares of ``log e`` against the chosen clock.

    Parameters
    ----------
    curve : EnergyCurve
    abscissa : {"log_G_one", "log_t", "loglog"}
    window : (t_lo, t_hi), optional
        Closed time window; the whole curve when omitted.
    which : {"e_u", "e_ut"}

    Raises
    ------
    FitError
        Fewer than ``min_samples`` points, nonpositive values, or an
        abscissa range too small to fit.

    Examples
    --------
    >>> import numpy as np
    >>> t = np.linspace(0, 50, 40)
    >>> G = 1 + t
    >>> c = EnergyCurve(2.0, t, 1 / G, 1 / G, G=G)
    >>> round(fit_rate(c, "log_G_one").slope, 10)
    -1.0
    """
    kind = Abscissa.parse(abscissa)
    t = curve.times
    lo, hi = (float(t[0]), float(t[-1])) if window is None else map(float, window)
    if lo > hi:
        raise FitError("window must satisfy t_lo <= t_hi")
    m = (t >= lo) & (t <= hi)
    if m.sum() < min_samples:
        raise FitError(f"only {int(m.sum())} samples in window [{lo:g}, {hi:g}], "
                       f"need {min_samples}")
    if which == "e_u":
        vals, logs = curve.e_u[m], curve.log_e_u[m]
    elif which == "e_ut":
        vals, logs = curve.e_ut[m], curve.log_e_ut[m]
    else:
        raise FitError("which must be 'e_u' or 'e_ut'")
    if not np.all(np.isfinite(logs)) or np.any(vals < 0):
        raise FitError("curve has nonpositive values in the fit window")
    x = abscissa_values(curve, kind)[m]
    if np.ptp(x) <= 1e-12 * max(1.0, np.abs(x).max()):
        raise FitError("abscissa range in the window is degenerate")
    res = stats.linregress(x, logs)
    r2 = float(res.rvalue ** 2) if np.isfinite(res.rvalue) else 1.0
    stderr = float(res.stderr) if np.isfinite(res.stderr) else 0.0
    return FitResult(float(res.slope), stderr, (lo, hi), min(max(r2, 0.0), 1.0),
                     float(res.intercept), int(m.sum()), kind.value, curve.beta)


class Verdict(str, Enum):
    PARABOLIC = "Parabolic"
    NON_PARABOLIC = "NonParabolic"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ParabolicReport:
    """Slopes per order and the verdict.

    ``gaps[i]`` is ``slope(beta_i) - slope(beta_{i+1})`` for the sorted
    orders and ``margins[i]`` the threshold it was compared with.
    """

    betas: list
    slopes: list
    stderrs: list
    verdict: Verdict
    gaps: list = field(default_factory=list)
    margins: list = field(default_factory=list)
    fits: list = field(default_factory=list, repr=False)
    diagnostics: str = ""

    def to_dict(self) -> dict:
        return {"betas": self.betas, "slopes": self.slopes, "stderrs": self.stderrs,
                "verdict": self.verdict.value, "gaps": self.gaps, "margins": self.margins,
                "diagnostics": self.diagnostics}


def parabolic_effect(curves: Sequence[EnergyCurve], abscissa="log_t",
                     window: Optional[Sequence[float]] = None, min_gap: float = 0.02,
                     which: str = "e_u") -> ParabolicReport:
    """Decide whether higher orders decay strictly faster.

    Consecutive orders (after sorting by ``beta``) are compared with margin
    ``max(2 sqrt(se_i^2 + se_j^2), min_gap)``.  The verdict is Parabolic
    when every slope drop exceeds its margin, NonParabolic when every
    slope difference is within it, and Inconclusive otherwise.
    """
    if len(curves) < 2:
        raise FitError("need curves for at least two orders")
    order = sorted(range(len(curves)), key=lambda i: curves[i].beta)
    betas = [float(curves[i].beta) for i in order]
    if len(set(betas)) != len(betas):
        raise FitError("orders must be distinct")
    fits = [fit_rate(curves[i], abscissa, window, which) for i in order]
    s = [f.slope for f in fits]
    se = [f.stderr for f in fits]
    gaps, margins = [], []
    for i in range(len(fits) - 1):
        gaps.append(s[i] - s[i + 1])
        margins.append(max(2.0 * math.hypot(se[i], se[i + 1]), min_gap))
    dec = [g > m for g, m in zip(gaps, margins)]
    flat = [abs(g) <= m for g, m in zip(gaps, margins)]
    if all(dec):
        verdict, why = Verdict.PARABOLIC, "every slope drop exceeds its margin"
    elif all(flat):
        verdict, why = Verdict.NON_PARABOLIC, "slopes agree within the margins"
    else:
        verdict = Verdict.INCONCLUSIVE
        why = "mixed pairs: " + ", ".join(
            f"beta {betas[i]:g}->{betas[i + 1]:g} gap {gaps[i]:+.3g} (margin {margins[i]:.3g})"
            for i in range(len(gaps)))
    return ParabolicReport(betas, s, se, verdict, gaps, margins, fits, why)
