"""Time-dependent dissipation coefficients g(t).

A :class:`Coefficient` bundles vectorised evaluators for ``g``, its first two
derivatives, the primitives of ``g`` and ``1/g``, and a regime tag that
selects the zone geometry and decay theorem applicable to it.

Built-in families are created with :func:`make_builtin`; arbitrary callables
can be wrapped with :meth:`Coefficient.custom`, in which case the primitives
are computed by adaptive quadrature on a cached checkpoint table.
"""
from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .errors import ParameterRangeError, UnknownCoefficientError

E = math.e
E2 = math.e ** 2

ArrayFn = Callable[[np.ndarray], np.ndarray]


class Regime(str, Enum):
    """Qualitative behaviour class of a coefficient."""

    A = "A_increasing"
    B = "B_subdecay_integrable"
    C = "C_superdecay_integrable"
    D = "D_noninteg_decreasing"
    E = "E_noninteg_slow_increasing"
    SI = "ScaleInvariant"
    CUSTOM = "Custom"

    @classmethod
    def parse(cls, value: "str | Regime") -> "Regime":
        """Accept the enum, its value, or a short alias such as ``"D"``."""
        if isinstance(value, Regime):
            return value
        key = str(value).strip()
        aliases = {
            "a": cls.A, "b": cls.B, "c": cls.C, "d": cls.D, "e": cls.E,
            "si": cls.SI, "scaleinvariant": cls.SI, "scale_invariant": cls.SI,
            "custom": cls.CUSTOM,
        }
        for member in cls:
            if key == member.value or key == member.name:
                return member
        try:
            return aliases[key.lower()]
        except KeyError:
            raise ParameterRangeError(f"unknown regime {value!r}") from None

    @property
    def short(self) -> str:
        return self.name


def _as_float_or_array(t, fn):
    arr = np.asarray(t, dtype=float)
    out = fn(arr)
    if arr.ndim == 0:
        return float(out)
    return np.asarray(out, dtype=float)


class CumulativeIntegral:
    """Primitive ``t -> int_0^t f`` by adaptive quadrature with checkpoints.

    The checkpoint table holds ``int_0^{tau_k} f`` on the geometric grid
    ``tau_k = unit * 2**k``; an evaluation integrates only from the nearest
    checkpoint below ``t``.  The table grows lazily under a lock, so
    concurrent readers always observe a consistent prefix.

    Parameters
    ----------
    f : callable
        Scalar integrand, finite on ``[0, inf)``.
    epsabs, epsrel : float
        Tolerances handed to the Gauss-Kronrod driver.
    unit : float
        First checkpoint.
    """

    def __init__(self, f: Callable[[float], float], epsabs: float = 1e-12,
                 epsrel: float = 1e-12, unit: float = 0.01):
        self.f = f
        self.epsabs = epsabs
        self.epsrel = epsrel
        self.unit = unit
        self._nodes = [0.0]
        self._values = [0.0]
        self._lock = threading.Lock()

    def _segment(self, a: float, b: float) -> float:
        if b == a:
            return 0.0
        val, _ = integrate.quad(self.f, a, b, epsabs=self.epsabs,
                                epsrel=self.epsrel, limit=400)
        return val

    def _extend_to(self, t: float):
        with self._lock:
            while self._nodes[-1] < t:
                k = len(self._nodes) - 1
                nxt = self.unit * 2.0 ** k
                seg = self._segment(self._nodes[-1], nxt)
                # append value before node so readers never see a node
                # without its value
                self._values.append(self._values[-1] + seg)
                self._nodes.append(nxt)

    def scalar(self, t: float) -> float:
        if t < 0:
            raise ValueError("primitive requested at negative time")
        if not math.isfinite(t):
            return math.inf
        if self._nodes[-1] < t:
            self._extend_to(t)
        i = bisect.bisect_right(self._nodes, t) - 1
        i = min(i, len(self._values) - 1)
        return self._values[i] + self._segment(self._nodes[i], t)

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        if arr.ndim == 0:
            return self.scalar(float(arr))
        flat = arr.ravel()
        out = np.array([self.scalar(float(x)) for x in flat])
        return out.reshape(arr.shape)


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Evaluator bundle for a dissipation coefficient.

    All callables accept scalars or arrays of times ``t >= 0``.

    Attributes
    ----------
    id : str
        Catalog identifier (``"power"``, ``"mu_linear"``, ...).
    g, g1, g2 : callable
        The coefficient and its first and second derivatives.
    int_g, int_inv_g : callable
        Primitives ``int_0^t g`` and ``int_0^t 1/g``.
    regime : Regime
    params : tuple of float
    formula : str
        Human readable formula.
    log_g : callable, optional
        ``log g``; provided explicitly for super-exponential entries.
    h_example : callable, optional
        Factored auxiliary function with ``1 - g'/2 = h_sign * h**2 g**2``.
    h_sign : int
        ``-1`` when ``1 - g'/2 < 0`` (elliptic dominance), ``+1`` otherwise.
    primitive_kind : dict
        ``"closed"`` or ``"quadrature"`` per primitive.
    """

    id: str
    g: ArrayFn
    g1: ArrayFn
    g2: ArrayFn
    int_g: ArrayFn
    int_inv_g: ArrayFn
    regime: Regime
    params: tuple = ()
    formula: str = ""
    log_g: Optional[ArrayFn] = None
    h_example: Optional[ArrayFn] = None
    h_sign: int = 0
    primitive_kind: dict = field(default_factory=dict)
    quad_int_g: Optional[CumulativeIntegral] = None
    quad_int_inv_g: Optional[CumulativeIntegral] = None

    # --- auxiliary functions -------------------------------------------
    def h(self, t):
        """``1 - g'(t)/2``."""
        return _as_float_or_array(t, lambda x: 1.0 - 0.5 * self.g1(x))

    def G_half(self, t):
        """``(1/2) int_0^t g``."""
        return _as_float_or_array(t, lambda x: 0.5 * self.int_g(x))

    def G_one(self, t):
        """``1 + int_0^t g``."""
        return _as_float_or_array(t, lambda x: 1.0 + self.int_g(x))

    def logg(self, t):
        if self.log_g is not None:
            return _as_float_or_array(t, self.log_g)
        return _as_float_or_array(t, lambda x: np.log(self.g(x)))

    @property
    def label(self) -> str:
        if not self.params:
            return self.id
        return self.id + ":" + ",".join(f"{p:g}" for p in self.params)

    def with_regime(self, regime) -> "Coefficient":
        """Copy with a different regime tag (evaluators are shared)."""
        from dataclasses import replace
        return replace(self, regime=Regime.parse(regime))

    @classmethod
    def custom(cls, id: str, g: ArrayFn, g1: ArrayFn, g2: ArrayFn,
               regime="Custom", int_g: Optional[ArrayFn] = None,
               int_inv_g: Optional[ArrayFn] = None, formula: str = "",
               params: Sequence[float] = ()) -> "Coefficient":
        """Wrap user callables; missing primitives fall back to quadrature.

        Examples
        --------
        >>> c = Coefficient.custom("lin", lambda t: 1 + t, lambda t: 1 + 0 * t,
        ...                        lambda t: 0 * t)
        >>> round(c.int_g(2.0), 12)
        4.0
        """
        return _assemble(id, tuple(params), Regime.parse(regime),
                         formula or id, g, g1, g2, int_g, int_inv_g)


def _assemble(id, params, regime, formula, g, g1, g2, int_g=None,
              int_inv_g=None, log_g=None, h_example=None, h_sign=0):
    kind = {"int_g": "closed", "int_inv_g": "closed"}
    qg = qi = None
    if int_g is None:
        qg = CumulativeIntegral(lambda s: float(g(s)))
        int_g = qg
        kind["int_g"] = "quadrature"
    if int_inv_g is None:
        qi = CumulativeIntegral(lambda s: 1.0 / float(g(s)))
        int_inv_g = qi
        kind["int_inv_g"] = "quadrature"

    def wrap(fn):
        if isinstance(fn, CumulativeIntegral):
            return fn
        return lambda t: _as_float_or_array(t, fn)

    return Coefficient(
        id=id, g=wrap(g), g1=wrap(g1), g2=wrap(g2), int_g=wrap(int_g),
        int_inv_g=wrap(int_inv_g), regime=regime, params=params,
        formula=formula, log_g=None if log_g is None else wrap(log_g),
        h_example=None if h_example is None else wrap(h_example),
        h_sign=h_sign, primitive_kind=kind, quad_int_g=qg, quad_int_inv_g=qi)


@dataclass(frozen=True)
class AuxFunctions:
    """Auxiliary functions derived from a coefficient."""

    h_sq_signed: ArrayFn
    h_example: Optional[ArrayFn]
    h_sign: int
    G_half: ArrayFn
    G_one: ArrayFn


def aux_functions(c: Coefficient) -> AuxFunctions:
    return AuxFunctions(h_sq_signed=c.h, h_example=c.h_example,
                        h_sign=c.h_sign, G_half=c.G_half, G_one=c.G_one)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    id: str
    formula: str
    regime: str
    params: tuple  # names
    defaults: tuple
    ranges: str
    builder: Callable = field(repr=False, compare=False, default=None)

    def to_dict(self) -> dict:
        return {"id": self.id, "formula": self.formula, "regime": self.regime,
                "params": list(self.params), "defaults": list(self.defaults),
                "ranges": self.ranges}


_CATALOG: dict[str, CatalogEntry] = {}


def _register(id, formula, regime, params=(), defaults=(), ranges="none"):
    def deco(fn):
        _CATALOG[id] = CatalogEntry(id, formula, regime, tuple(params),
                                    tuple(defaults), ranges, fn)
        return fn
    return deco


def _xlogx_primitive(x, k):
    """Antiderivative of ``(x - k) log x``."""
    lx = np.log(x)
    return 0.5 * x * x * lx - 0.25 * x * x - k * (x * lx - x)


def _signed_h(g, g1, t_probe=None):
    """Sign of ``1 - g'/2`` if it is the same on a probe grid, else 0."""
    t = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 200)]) if t_probe is None else t_probe
    with np.errstate(all="ignore"):
        v = 1.0 - 0.5 * np.asarray(g1(t), dtype=float)
    v = v[np.isfinite(v)]
    if np.all(v > 0):
        return 1
    if np.all(v < 0):
        return -1
    return 0


@_register("exp", "c*exp(t)", "A_increasing", ("c",), (3.0,), "c > 0")
def _exp(c=3.0):
    if c <= 0:
        raise ParameterRangeError("exp: need c > 0")
    h = None
    if c > 2:
        def h(t):
            et = np.exp(t)
            return np.sqrt(c * et - 2.0) / (math.sqrt(2.0) * c * et)
    return _assemble(
        "exp", (c,), Regime.A, f"{c:g}*exp(t)",
        lambda t: c * np.exp(t), lambda t: c * np.exp(t),
        lambda t: c * np.exp(t),
        int_g=lambda t: c * np.expm1(t),
        int_inv_g=lambda t: -np.expm1(-t) / c,
        log_g=lambda t: math.log(c) + t,
        h_example=h, h_sign=-1 if h is not None else 0)


@_register("exp3", "3*exp(t)", "A_increasing")
def _exp3():
    c = _exp(3.0)
    from dataclasses import replace
    return replace(c, id="exp3", params=())


@_register("exp_neg", "exp(-t)", "B_subdecay_integrable")
def _exp_neg():
    return _assemble(
        "exp_neg", (), Regime.B, "exp(-t)",
        lambda t: np.exp(-t), lambda t: -np.exp(-t), lambda t: np.exp(-t),
        int_g=lambda t: -np.expm1(-t), int_inv_g=lambda t: np.expm1(t),
        log_g=lambda t: -t,
        h_example=lambda t: np.exp(t) * np.sqrt(np.exp(-t) + 2.0) / math.sqrt(2.0),
        h_sign=1)


@_register("exp_exp", "c*exp(exp(t))", "A_increasing", ("c",), (1.0,), "c > 0")
def _exp_exp(c=1.0):
    if c <= 0:
        raise ParameterRangeError("exp_exp: need c > 0")
    ei1 = special.expi(1.0)
    e1_1 = special.exp1(1.0)

    def logg(t):
        return math.log(c) + np.exp(t)

    def g(t):
        return np.exp(logg(t))

    def g1(t):
        return np.exp(logg(t) + t)

    def g2(t):
        et = np.exp(t)
        return np.exp(logg(t) + t) * (1.0 + et)

    def int_g(t):
        return c * (special.expi(np.exp(t)) - ei1)

    def int_inv_g(t):
        return (e1_1 - special.exp1(np.exp(t))) / c

    h = None
    if c * E > 2:
        def h(t):
            # sqrt(c e^t e^{e^t} - 2) / (sqrt2 c e^{e^t}) written with
            # y = e^{-e^t} so nothing overflows
            y = np.exp(-np.exp(t))
            return np.sqrt(np.exp(t) * y / (2.0 * c) - y * y / (c * c))
    return _assemble("exp_exp", (c,), Regime.A, f"{c:g}*exp(exp(t))",
                     g, g1, g2, int_g, int_inv_g, log_g=logg, h_example=h,
                     h_sign=-1 if h is not None else 0)


@_register("exp_neg_exp", "exp(-exp(t))", "C_superdecay_integrable")
def _exp_neg_exp():
    ei1 = special.expi(1.0)
    e1_1 = special.exp1(1.0)

    def logg(t):
        return -np.exp(t)

    def g(t):
        return np.exp(logg(t))

    def g1(t):
        return -np.exp(t + logg(t))

    def g2(t):
        et = np.exp(t)
        return np.exp(t + logg(t)) * (et - 1.0)

    def h(t):
        et = np.exp(t)
        return np.exp(et + 0.5 * np.log(0.5 * (np.exp(-et) * et + 2.0)))

    return _assemble("exp_neg_exp", (), Regime.C, "exp(-exp(t))", g, g1, g2,
                     int_g=lambda t: e1_1 - special.exp1(np.exp(t)),
                     int_inv_g=lambda t: special.expi(np.exp(t)) - ei1,
                     log_g=logg, h_example=h, h_sign=1)


def _power_regime(d):
    if d > 1:
        return Regime.A
    if d == 1:
        return Regime.SI
    if d > 0:
        return Regime.E
    if d >= -1:
        return Regime.D
    return Regime.B


@_register("power", "(C+t)^d", "d>1: A, d=1: SI, 0<d<1: E, -1<=d<=0: D, d<-1: B",
           ("d", "C"), (None, 1.0), "d real, C > 0")
def _power(d, C=1.0):
    d = float(d)
    C = float(C)
    if C <= 0:
        raise ParameterRangeError("power: need C > 0")

    def g(t):
        return (C + t) ** d

    def g1(t):
        return d * (C + t) ** (d - 1.0)

    def g2(t):
        return d * (d - 1.0) * (C + t) ** (d - 2.0)

    if d == -1.0:
        def int_g(t):
            return np.log1p(t / C)
    else:
        def int_g(t):
            return ((C + t) ** (d + 1.0) - C ** (d + 1.0)) / (d + 1.0)
    if d == 1.0:
        def int_inv_g(t):
            return np.log1p(t / C)
    else:
        def int_inv_g(t):
            return ((C + t) ** (1.0 - d) - C ** (1.0 - d)) / (1.0 - d)

    sign = _signed_h(g, g1)
    h = None
    if sign < 0:
        def h(t):
            return np.sqrt(d * (C + t) ** (d - 1.0) - 2.0) / (math.sqrt(2.0) * (C + t) ** d)
    elif sign > 0:
        def h(t):
            return np.sqrt(2.0 - d * (C + t) ** (d - 1.0)) / (math.sqrt(2.0) * (C + t) ** d)
    formula = f"(1+t)^{d:g}" if C == 1.0 else f"({C:g}+t)^{d:g}"
    return _assemble("power", (d, C) if C != 1.0 else (d,), _power_regime(d),
                     formula, g, g1, g2, int_g, int_inv_g,
                     log_g=lambda t: d * np.log(C + t), h_example=h, h_sign=sign)


@_register("power_cd", "(4^(1/d)+t)^d", "A_increasing", ("d",), (2.0,), "d > 1")
def _power_cd(d=2.0):
    if d <= 1:
        raise ParameterRangeError("power_cd: need d > 1")
    from dataclasses import replace
    c = _power(d, 4.0 ** (1.0 / d))
    return replace(c, id="power_cd", params=(float(d),))


@_register("log_linear", "c*(1+t)*log(e+t)", "A_increasing", ("c",), (3.0,), "c > 0")
def _log_linear(c=3.0):
    if c <= 0:
        raise ParameterRangeError("log_linear: need c > 0")
    k = E - 1.0

    def g(t):
        return c * (1.0 + t) * np.log(E + t)

    def g1(t):
        return c * np.log(E + t) + c * (1.0 + t) / (E + t)

    def g2(t):
        return c / (E + t) + c * k / (E + t) ** 2

    def int_g(t):
        return c * (_xlogx_primitive(E + t, k) - _xlogx_primitive(E, k))

    h = None
    if c * (1.0 + 1.0 / E) > 2:
        def h(t):
            return np.sqrt(g1(t) - 2.0) / (math.sqrt(2.0) * g(t))
    return _assemble("log_linear", (c,), Regime.A, f"{c:g}*(1+t)*log(e+t)",
                     g, g1, g2, int_g, None, h_example=h,
                     h_sign=-1 if h is not None else 0)


@_register("mu_linear", "mu*(1+t)", "ScaleInvariant", ("mu",), (None,), "mu > 0")
def _mu_linear(mu):
    mu = float(mu)
    if mu <= 0:
        raise ParameterRangeError("mu_linear: need mu > 0")
    h = None
    sign = 0
    if mu > 2:
        q = math.sqrt((mu - 2.0) / (2.0 * mu * mu))
        sign = -1
    elif mu < 2:
        q = math.sqrt((2.0 - mu) / (2.0 * mu * mu))
        sign = 1
    if sign:
        def h(t):
            return q / (1.0 + t)
    return _assemble("mu_linear", (mu,), Regime.SI, f"{mu:g}*(1+t)",
                     lambda t: mu * (1.0 + t), lambda t: mu + 0.0 * t,
                     lambda t: 0.0 * t,
                     int_g=lambda t: mu * (t + 0.5 * t * t),
                     int_inv_g=lambda t: np.log1p(t) / mu,
                     log_g=lambda t: math.log(mu) + np.log1p(t),
                     h_example=h, h_sign=sign)


@_register("const", "c", "c>0: D, c=0: Custom", ("c",), (1.0,), "c >= 0")
def _const(c=1.0):
    c = float(c)
    if c < 0:
        raise ParameterRangeError("const: need c >= 0")
    inv = (lambda t: t / c) if c > 0 else (lambda t: np.where(t > 0, np.inf, 0.0))
    return _assemble("const", (c,), Regime.D if c > 0 else Regime.CUSTOM, f"{c:g}",
                     lambda t: c + 0.0 * t, lambda t: 0.0 * t, lambda t: 0.0 * t,
                     int_g=lambda t: c * t, int_inv_g=inv)


@_register("inv_t_log", "((1+t)*log(e+t))^-1", "D_noninteg_decreasing")
def _inv_t_log():
    k = E - 1.0

    def F(t):
        return (1.0 + t) * np.log(E + t)

    def F1(t):
        return np.log(E + t) + (1.0 + t) / (E + t)

    def F2(t):
        return 1.0 / (E + t) + k / (E + t) ** 2

    def g(t):
        return 1.0 / F(t)

    def g1(t):
        return -F1(t) / F(t) ** 2

    def g2(t):
        f = F(t)
        return -F2(t) / f ** 2 + 2.0 * F1(t) ** 2 / f ** 3

    def h(t):
        f = F(t)
        return np.sqrt(F1(t) / f ** 2 + 2.0) / (math.sqrt(2.0) / f)

    return _assemble("inv_t_log", (), Regime.D, "((1+t)*log(e+t))^-1", g, g1, g2,
                     None,
                     lambda t: _xlogx_primitive(E + t, k) - _xlogx_primitive(E, k),
                     h_example=h, h_sign=1)


@_register("inv_t_loglog", "((e^2+t)*log(e^2+t))^-1", "D_noninteg_decreasing")
def _inv_t_loglog():
    def F(t):
        return (E2 + t) * np.log(E2 + t)

    def F1(t):
        return np.log(E2 + t) + 1.0

    def g(t):
        return 1.0 / F(t)

    def g1(t):
        return -F1(t) / F(t) ** 2

    def g2(t):
        f = F(t)
        return -1.0 / ((E2 + t) * f ** 2) + 2.0 * F1(t) ** 2 / f ** 3

    return _assemble("inv_t_loglog", (), Regime.D, "((e^2+t)*log(e^2+t))^-1",
                     g, g1, g2,
                     lambda t: np.log(0.5 * np.log(E2 + t)),
                     lambda t: _xlogx_primitive(E2 + t, 0.0) - _xlogx_primitive(E2, 0.0))


@_register("log_over_t", "log(e^2+t)/(e^2+t)", "D_noninteg_decreasing")
def _log_over_t():
    ei4 = special.expi(4.0)

    def g(t):
        x = E2 + t
        return np.log(x) / x

    def g1(t):
        x = E2 + t
        return (1.0 - np.log(x)) / x ** 2

    def g2(t):
        x = E2 + t
        return (2.0 * np.log(x) - 3.0) / x ** 3

    return _assemble("log_over_t", (), Regime.D, "log(e^2+t)/(e^2+t)", g, g1, g2,
                     lambda t: 0.5 * (np.log(E2 + t) ** 2 - 4.0),
                     lambda t: special.expi(2.0 * np.log(E2 + t)) - ei4)


@_register("t_over_log", "(e+t)/log(e+t)", "E_noninteg_slow_increasing")
def _t_over_log():
    ei2 = special.expi(2.0)

    def g(t):
        x = E + t
        return x / np.log(x)

    def g1(t):
        L = np.log(E + t)
        return (L - 1.0) / L ** 2

    def g2(t):
        x = E + t
        L = np.log(x)
        return (2.0 - L) / (x * L ** 3)

    return _assemble("t_over_log", (), Regime.E, "(e+t)/log(e+t)", g, g1, g2,
                     lambda t: special.expi(2.0 * np.log(E + t)) - ei2,
                     lambda t: 0.5 * (np.log(E + t) ** 2 - 1.0))


@_register("nu_log", "(1+t)/log(e+t)", "E_noninteg_slow_increasing")
def _nu_log():
    # (1+t)/nu(1+t) with nu(s) = log(s + e - 1), i.e. log shifted so that
    # nu(1) = 1 and g is finite at t = 0
    k = E - 1.0
    base = special.expi(2.0) - k * special.expi(1.0)

    def g(t):
        return (1.0 + t) / np.log(E + t)

    def g1(t):
        x = E + t
        L = np.log(x)
        return 1.0 / L - (1.0 + t) / (x * L ** 2)

    def g2(t):
        x = E + t
        L = np.log(x)
        P = 1.0 + t
        return -2.0 / (x * L ** 2) + P / (x * x * L ** 2) + 2.0 * P / (x * x * L ** 3)

    def int_g(t):
        L = np.log(E + t)
        return special.expi(2.0 * L) - k * special.expi(L) - base

    return _assemble("nu_log", (), Regime.E, "(1+t)/log(e+t)", g, g1, g2,
                     int_g, None)


def catalog() -> list[CatalogEntry]:
    """All built-in families in registration order."""
    return list(_CATALOG.values())


def make_builtin(id: str, params: Sequence[float] = (), regime=None) -> Coefficient:
    """Create a catalog coefficient.

    Parameters
    ----------
    id : str
        Catalog identifier, see :func:`catalog`.
    params : sequence of float
        Family parameters; trailing parameters with defaults may be omitted.
    regime : str or Regime, optional
        Override of the regime tag.

    Raises
    ------
    UnknownCoefficientError
        If ``id`` is not in the catalog.
    ParameterRangeError
        If the parameters lie outside the family's range.

    Examples
    --------
    >>> c = make_builtin("power", [-0.5])
    >>> round(c.int_g(3.0), 12)
    2.0
    """
    try:
        entry = _CATALOG[id]
    except KeyError:
        raise UnknownCoefficientError(f"unknown coefficient {id!r}") from None
    params = [float(p) for p in params]
    if len(params) > len(entry.params):
        raise ParameterRangeError(
            f"{id}: expected at most {len(entry.params)} parameters, got {len(params)}")
    for i in range(len(params), len(entry.params)):
        if entry.defaults[i] is None:
            raise ParameterRangeError(f"{id}: missing parameter {entry.params[i]!r}")
    if any(not math.isfinite(p) for p in params):
        raise ParameterRangeError(f"{id}: parameters must be finite")
    c = entry.builder(*params)
    if regime is not None:
        c = c.with_regime(regime)
    return c


def parse_coefficient(spec: str, regime=None) -> Coefficient:
    """Parse ``"id"`` or ``"id:p1,p2"`` (as used on the command line)."""
    spec = spec.strip()
    if ":" in spec:
        name, rest = spec.split(":", 1)
        try:
            params = [float(x) for x in rest.split(",") if x.strip()]
        except ValueError:
            raise ParameterRangeError(f"bad parameter list in {spec!r}") from None
    else:
        name, params = spec, []
    return make_builtin(name.strip(), params, regime=regime)


# ---------------------------------------------------------------------------
# condition checking
# ---------------------------------------------------------------------------

@dataclass
class ConditionResult:
    name: str
    passed: bool
    margin: float = 0.0
    constant: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "margin": _json_float(self.margin),
                "constant": _json_float(self.constant), "detail": self.detail}


@dataclass
class ConditionReport:
    """Outcome of :func:`check_conditions`.

    ``margin`` is the largest violation found (0 when the condition holds on
    every sample); ``constant`` is the smallest admissible constant for the
    derivative bounds.
    """

    coefficient: str
    regime: Regime
    window: tuple
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> ConditionResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"coefficient": self.coefficient, "regime": self.regime.value,
                "window": list(self.window), "passed": self.passed,
                "results": [r.to_dict() for r in self.results]}


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _sample_times(window, samples):
    a, b = float(window[0]), float(window[1])
    lin = np.linspace(a, b, max(samples // 2, 2))
    lo = max(a, 1e-3)
    geo = np.geomspace(lo, b, max(samples - samples // 2, 2)) if b > lo else lin
    return np.unique(np.concatenate([lin, geo]))


def _sign_condition(name, values, sense, scale):
    """``sense`` is one of '>0', '>=0', '<0', '<=0'."""
    v = np.asarray(values, dtype=float)
    tol = 1e-14 * scale
    if sense == ">0":
        bad = -v
        ok = np.all(v > 0)
    elif sense == ">=0":
        bad = -v
        ok = np.all(v >= -tol)
    elif sense == "<0":
        bad = v
        ok = np.all(v < 0)
    else:
        bad = v
        ok = np.all(v <= tol)
    margin = max(float(np.max(bad)), 0.0) if not ok else 0.0
    return ConditionResult(name, bool(ok), margin, None, sense)


def _integrability_proxy(fn_int, t_end, integrable: bool, name):
    """Geometric-block tail test for ``int_0^inf f``.

    Block integrals ``I_k = F(2T_k) - F(T_k)`` over the last doublings of the
    window decay geometrically for integrable tails.  A block ratio below 0.8
    (or a numerically saturated primitive) counts as integrable; slower
    decay, including the harmonic-like decay of ``1/(t log t)``, does not.
    """
    T = float(t_end)
    edges = T / 2.0 ** np.arange(6, -1, -1)
    with np.errstate(all="ignore"):
        F = np.array([float(fn_int(x)) for x in edges])
    if not np.all(np.isfinite(F)):
        ok = not integrable
        return ConditionResult(name, ok, 0.0 if ok else 1.0, None,
                               "primitive overflows inside the window")
    blocks = np.diff(F)
    tol = 1e-13 * max(1.0, abs(F[-1]))
    if blocks[-1] <= tol:
        looks_integrable, ratio = True, 0.0
    else:
        prev, cur = blocks[-4:-1], blocks[-3:]
        with np.errstate(all="ignore"):
            ratios = np.where(prev > tol, cur / prev, np.inf)
        ratio = float(np.max(ratios))
        looks_integrable = ratio < 0.8
    if looks_integrable:
        tail = blocks[-1] * ratio / (1.0 - ratio) if ratio > 0 else 0.0
        total = F[-1] + tail
    else:
        total = math.inf
    ok = looks_integrable == integrable
    detail = (f"block ratio {ratio:.4g}; integral over window {F[-1]:.6g}; "
              f"extrapolated total {total:.6g}")
    return ConditionResult(name, bool(ok), 0.0 if ok else 1.0,
                           total if looks_integrable else None, detail)


def _ratio_constant(name, num, den):
    with np.errstate(all="ignore"):
        ratio = np.abs(num) / np.abs(den)
    ratio = ratio[np.isfinite(ratio)]
    if ratio.size == 0:
        return ConditionResult(name, False, math.inf, None, "no finite samples")
    const = float(np.max(ratio))
    return ConditionResult(name, math.isfinite(const), 0.0, const,
                           "smallest admissible constant on samples")


def check_conditions(c: Coefficient, window=(0.0, 1e3), samples: int = 400,
                     regime=None) -> ConditionReport:
    """Test the hypotheses of the tagged regime on a sample grid.

    Positivity and monotonicity are checked pointwise, integrability by a
    tail proxy, and each derivative bound is converted to the smallest
    constant compatible with the samples.  Failures are recorded in the
    report; nothing is raised for a failed condition.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    reg = Regime.parse(regime) if regime is not None else c.regime
    t = _sample_times(window, samples)
    with np.errstate(all="ignore"):
        g = np.asarray(c.g(t), dtype=float)
        g1 = np.asarray(c.g1(t), dtype=float)
        g2 = np.asarray(c.g2(t), dtype=float)
    scale = float(np.nanmax(np.abs(np.concatenate([g, g1, g2])))) or 1.0
    res = []
    with np.errstate(all="ignore"):
        logg = np.asarray(c.logg(t), dtype=float)
    # positivity is judged in log space so underflowing entries still pass;
    # an explicit log g of -inf only means the exponent itself overflowed
    log_ok = np.isfinite(logg) | ((logg == -np.inf) if c.log_g is not None else False)
    pos = ConditionResult("positivity", bool(np.all(log_ok | (g > 0))), 0.0, None, "g > 0")
    T = float(window[1])
    with np.errstate(all="ignore"):
        res = _regime_conditions(c, reg, t, g, g1, g2, scale, T)
    res.insert(0, pos)
    return ConditionReport(c.label, reg, (float(window[0]), T), res)


def _regime_conditions(c, reg, t, g, g1, g2, scale, T) -> list:
    res = []
    if reg == Regime.A:
        a1 = _sign_condition("A1", np.minimum(g, g1), ">0", scale)
        res += [a1, _integrability_proxy(c.int_inv_g, T, True, "A2")]
        m = t > 0
        G = np.asarray(c.G_half(t[m]))
        q = g[m] / G
        res.append(_ratio_constant("A3_k1", g1[m], g[m] * q))
        res.append(_ratio_constant("A3_k2", g2[m], g[m] * q ** 2))
    elif reg in (Regime.B, Regime.C):
        p = "B" if reg == Regime.B else "C"
        res.append(_sign_condition(p + "1", np.where(g > 0, g1, -1.0), "<0", scale))
        res.append(_integrability_proxy(c.int_g, T, True, p + "2"))
        if reg == Regime.B:
            res.append(_ratio_constant("B3_k1", g1, g))
            res.append(_ratio_constant("B3_k2", g2, g))
    elif reg == Regime.D:
        res.append(_sign_condition("D1_g1", g1, "<=0", scale))
        res.append(_sign_condition("D1_g2", g2, ">=0", scale))
        res.append(_integrability_proxy(c.int_g, T, False, "D2"))
        res.append(_ratio_constant("D3_k1", g1 * (1.0 + t), g))
        res.append(_ratio_constant("D3_k2", g2 * (1.0 + t) ** 2, g))
    elif reg == Regime.E:
        res.append(_sign_condition("E1_g1", g1, ">=0", scale))
        res.append(_sign_condition("E1_g1_le1", g1 - 1.0, "<=0", scale))
        res.append(_sign_condition("E1_g2", g2, "<=0", scale))
        res.append(_integrability_proxy(c.int_inv_g, T, False, "E2"))
        G = np.asarray(c.G_one(t))
        res.append(_ratio_constant("E3_k1", g1 * G, g * g))
        ok = np.abs(g2) <= g1 / g
        # smallest sampled t0 from which the inequality holds to the end
        bad = np.nonzero(~ok)[0]
        if bad.size == 0:
            t0 = float(t[0])
        elif bad[-1] == t.size - 1:
            t0 = math.inf
        else:
            t0 = float(t[bad[-1] + 1])
        res.append(ConditionResult("E3_g2", math.isfinite(t0), 0.0, t0,
                                   "constant field holds the smallest sampled t0"))
    return res
