"""Comparison-principle machinery.

For a class-K rate ``alpha`` and a nonnegative gain ``g`` the scalar
inequality ``y' <= -g(t) alpha(y)`` is dominated by the KL function

    beta(s, t) = eta^{-1}(eta(s) + G(t)),    beta(0, t) = 0,

with ``alpha_bar(s) = min(s, alpha(s))``, ``eta(s) = int_s^1 d tau / alpha_bar(tau)``
and ``G(t) = int_0^t g``. Inputs ``v >= 0`` enter additively as
``beta(y0, t) + 2 int_0^t v``, valid while ``y0 + 2 int_0^T v`` stays below the
level ``r'`` on which ``alpha`` is a class-K function.
"""

from __future__ import annotations

import bisect
import math
import threading
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvariantViolation, OutOfRegion, TargetOutOfRange
from .expr import Expression
from .numerics import (Tolerance, Trajectory, bisect_monotone, bisect_monotone_vec,
                       integrate_adaptive, rk45_integrate, ODE_TOL)
from .report import Report, Violation

S_FLOOR = 1e-12
ETA_TOL = Tolerance(1e-13, 1e-13, 60)
NONNEG_SLACK = -1e-12


class TimeSignal:
    """Scalar function of time: a parsed expression, a sampled table, or a callable.

    ``declared_nonneg`` is verified on ``linspace(0, horizon, grid)`` at
    construction.
    """

    def __init__(self, fn: Callable, declared_nonneg: bool = False, horizon: float = 50.0,
                 grid: int = 2001, name: str = None, expr: Expression = None):
        self._fn = fn
        self.expr = expr
        self.declared_nonneg = declared_nonneg
        self.horizon = horizon
        self.name = name or (expr.text if expr is not None else getattr(fn, "__name__", "signal"))
        self._cum = None
        self._lock = threading.Lock()
        ts = np.linspace(0.0, horizon, grid)
        vals = self.vector(ts)
        if not np.all(np.isfinite(vals)):
            raise InvariantViolation(f"signal {self.name!r} is not finite on [0, {horizon}]")
        if declared_nonneg and np.min(vals) < NONNEG_SLACK:
            i = int(np.argmin(vals))
            raise InvariantViolation(
                f"signal {self.name!r} declared nonnegative but equals {vals[i]:.3g} at t={ts[i]:.6g}")

    @classmethod
    def parse(cls, text: str, nonneg: bool = False, params: Mapping[str, float] = None, **kw) -> "TimeSignal":
        e = Expression(text, ("t",), params)
        return cls(e, declared_nonneg=nonneg, expr=e, **kw)

    @classmethod
    def constant(cls, c: float, **kw) -> "TimeSignal":
        return cls.parse(repr(float(c)) if c >= 0 else f"-{-float(c)!r}", nonneg=c >= 0, **kw)

    @classmethod
    def table(cls, times, values, nonneg: bool = False, **kw) -> "TimeSignal":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)

        def fn(t):
            return np.interp(t, times, values)

        kw.setdefault("horizon", float(times[-1]))
        return cls(fn, declared_nonneg=nonneg, name=kw.pop("name", "table"), **kw)

    def __call__(self, t):
        return self._fn(t)

    def vector(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._fn(t), dtype=float)
        if out.shape != t.shape:
            out = np.broadcast_to(out, t.shape).copy() if out.size == 1 else \
                np.array([float(self._fn(float(x))) for x in t.ravel()]).reshape(t.shape)
        return out

    def integral(self, t: float) -> float:
        """``int_0^t`` of the signal, cached cumulatively across calls."""
        with self._lock:
            if self._cum is None:
                self._cum = _CumulativeIntegral(self.vector)
            return self._cum(t)

    def __repr__(self):
        return f"TimeSignal({self.name!r})"


class _CumulativeIntegral:
    """Integral from 0 reusing the nearest cached knot below the query."""

    def __init__(self, f):
        self.f = f
        self.knots = [0.0]
        self.values = [0.0]

    def __call__(self, t: float) -> float:
        t = float(t)
        if t < 0:
            raise ValueError("integral needs t >= 0")
        i = bisect.bisect_right(self.knots, t) - 1
        if self.knots[i] == t:
            return self.values[i]
        v = self.values[i] + integrate_adaptive(self.f, self.knots[i], t)
        self.knots.insert(i + 1, t)
        self.values.insert(i + 1, v)
        return v


class ComparisonFn:
    """Candidate comparison function of ``s >= 0`` with a declared class.

    ``declared_class`` is one of ``"K"``, ``"Kinf"``, ``"L"``. The class is
    checked on a sampled grid of ``[0, domain_hi]`` unless ``validate=False``.
    """

    CLASSES = ("K", "Kinf", "L")

    def __init__(self, fn: Callable, declared_class: str = "K", domain_hi: float = 1e4,
                 name: str = None, expr: Expression = None, validate: bool = True,
                 kinf_target: float = 1e3, inverse_fn: Callable = None):
        if declared_class not in self.CLASSES:
            raise ValueError(f"declared_class must be one of {self.CLASSES}")
        self._fn = fn
        self._inverse_fn = inverse_fn
        self.expr = expr
        self.declared_class = declared_class
        self.domain_hi = float(domain_hi)
        self.name = name or (expr.text if expr is not None else getattr(fn, "__name__", "fn"))
        if validate:
            self.validate(kinf_target)
        if inverse_fn is not None:
            grid = np.geomspace(1e-6, self.domain_hi, 200)
            back = np.asarray(inverse_fn(self(grid)), dtype=float)
            if not np.allclose(back, grid, rtol=1e-9, atol=0.0):
                raise InvariantViolation(f"supplied inverse of {self.name!r} does not invert it")

    @classmethod
    def parse(cls, text: str, declared_class: str = "K", domain_hi: float = 1e4,
              params: Mapping[str, float] = None, **kw) -> "ComparisonFn":
        e = Expression(text, ("s",), params)
        return cls(e, declared_class, domain_hi, expr=e, **kw)

    @classmethod
    def identity(cls, domain_hi: float = 1e4) -> "ComparisonFn":
        return cls.parse("s", "Kinf", domain_hi)

    def __call__(self, s):
        if isinstance(s, np.ndarray):
            out = np.asarray(self._fn(s), dtype=float)
            return out if out.shape == s.shape else np.broadcast_to(out, s.shape).copy()
        return float(self._fn(s))

    @property
    def is_identity(self) -> bool:
        return self.expr is not None and self.expr.is_variable("s")

    def validate(self, kinf_target: float = 1e3):
        grid = np.concatenate([[0.0], np.geomspace(1e-6, self.domain_hi, 400)])
        vals = self(grid)
        if not np.all(np.isfinite(vals)):
            raise InvariantViolation(f"{self.name!r} is not finite on [0, {self.domain_hi}]")
        if self.declared_class in ("K", "Kinf"):
            if abs(vals[0]) > 1e-12:
                raise InvariantViolation(f"{self.name!r} is {vals[0]:.3g} at 0, class K needs 0")
            d = np.diff(vals)
            if np.any(d <= 0):
                i = int(np.argmax(d <= 0))
                raise InvariantViolation(
                    f"{self.name!r} is not strictly increasing near s={grid[i + 1]:.6g}")
            if self.declared_class == "Kinf" and vals[-1] < kinf_target:
                raise InvariantViolation(
                    f"{self.name!r} reaches only {vals[-1]:.3g} at s={self.domain_hi:g}; "
                    f"class Kinf needs at least {kinf_target:g}")
        else:
            if np.any(np.diff(vals) >= 0):
                raise InvariantViolation(f"{self.name!r} is not strictly decreasing")

    def inverse(self, y):
        """Inverse of a class-K function on ``[0, domain_hi]`` (elementwise, relative accuracy).

        Uses ``inverse_fn`` when one was supplied, a bracketed root search otherwise.
        """
        scalar = np.ndim(y) == 0
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(y < 0):
            raise TargetOutOfRange("class-K inverse needs nonnegative arguments")
        top = self(np.array([self.domain_hi]))[0]
        if np.any(y > top * (1 + 1e-12)):
            raise TargetOutOfRange(f"{self.name!r} never reaches {float(np.max(y)):.6g} on [0, {self.domain_hi:g}]")
        out = np.zeros_like(y)
        pos = y > 0
        if np.any(pos):
            yp = np.minimum(y[pos], top)
            out[pos] = self._inverse_fn(yp) if self._inverse_fn is not None else self._inverse_positive(yp)
        return float(out[0]) if scalar else out

    def _inverse_table(self):
        if getattr(self, "_inv_table", None) is None:
            u = np.linspace(math.log(1e-200), math.log(self.domain_hi), 2048)
            self._inv_table = (u, self(np.exp(u)))
        return self._inv_table

    def _inverse_positive(self, y: np.ndarray) -> np.ndarray:
        """Bracket in a cached log grid, then Illinois iteration on ``log f`` vs ``log s``."""
        u, vals = self._inverse_table()
        k = np.clip(np.searchsorted(vals, y, side="left") - 1, 0, u.size - 2)
        a, b = u[k].copy(), u[k + 1].copy()
        fa_raw = vals[k]
        out = np.empty_like(y)
        # cells whose lower end underflows to 0 cannot be handled in log space
        slow = fa_raw <= 0
        if np.any(slow):
            out[slow] = bisect_monotone_vec(self, y[slow], math.exp(a[slow].min()), math.exp(b[slow].max()),
                                            iters=90, log_scale=True)
        fast = ~slow
        if not np.any(fast):
            return out
        a, b, ly = a[fast], b[fast], np.log(y[fast])
        fa = np.log(fa_raw[fast]) - ly
        fb = np.log(vals[k + 1][fast]) - ly
        side = np.zeros(a.shape)
        m = b.copy()
        for _ in range(100):
            denom = fb - fa
            m = np.where(denom != 0, b - fb * (b - a) / np.where(denom != 0, denom, 1.0), 0.5 * (a + b))
            m = np.clip(m, np.minimum(a, b), np.maximum(a, b))
            with np.errstate(divide="ignore"):
                fm = np.log(self(np.exp(m))) - ly
            done = (np.abs(fm) <= 4e-16) | (np.abs(b - a) <= 1e-15 * np.maximum(1.0, np.abs(m)))
            if np.all(done):
                break
            # Illinois update keeps the bracket and halves the stale end's weight
            left = np.sign(fm) == np.sign(fa)
            a_new = np.where(left, m, a)
            fa_new = np.where(left, fm, np.where(side == -1, 0.5 * fa, fa))
            b_new = np.where(left, b, m)
            fb_new = np.where(left, np.where(side == 1, 0.5 * fb, fb), fm)
            side = np.where(left, 1, -1)
            a, fa, b, fb = a_new, fa_new, b_new, fb_new
        out[fast] = np.exp(m)
        return out

    def __repr__(self):
        return f"ComparisonFn({self.name!r}, {self.declared_class})"


def compose(outer: ComparisonFn, inner: Callable, name: str = None, domain_hi: float = None,
            declared_class: str = "K", validate: bool = False) -> ComparisonFn:
    """``outer(inner(s))`` as a comparison function."""
    return ComparisonFn(lambda s: outer(inner(s)), declared_class,
                        domain_hi if domain_hi is not None else outer.domain_hi,
                        name=name or f"{outer.name}∘{getattr(inner, 'name', 'inner')}", validate=validate)


# ---------------------------------------------------------------------------
# alpha_bar, eta, G


def bar_alpha(alpha: ComparisonFn, s):
    """``min(s, alpha(s))``."""
    if isinstance(s, np.ndarray):
        return np.minimum(s, alpha(s))
    return min(s, alpha(s))


def _kinks(alpha: ComparisonFn, lo: float, hi: float, n: int = 256) -> list:
    """Points in ``(lo, hi)`` where ``alpha(s) - s`` changes sign (kinks of alpha_bar)."""
    if not lo < hi:
        return []
    grid = np.geomspace(lo, hi, n)
    d = alpha(grid) - grid
    # differences at roundoff level are not kinks (e.g. alpha equal to s up to rounding)
    sign = np.where(np.abs(d) <= 1e-12 * grid, 0.0, np.sign(d))
    out = []
    for i in range(n - 1):
        if sign[i] != 0 and sign[i + 1] != 0 and sign[i] != sign[i + 1]:
            a, b = math.log(grid[i]), math.log(grid[i + 1])
            try:
                root = bisect_monotone(lambda u: sign[i] * (alpha(math.exp(u)) - math.exp(u)),
                                       0.0, a, b, Tolerance(1e-15, 1e-15, 200))
            except TargetOutOfRange:
                continue
            out.append(math.exp(root))
    return out


def _log_integrand(alpha: ComparisonFn):
    def w(u):
        s = np.exp(u)
        return s / bar_alpha(alpha, s)
    return w


def eta(alpha: ComparisonFn, s: float, anchor: float = 1.0, tol: Tolerance = ETA_TOL) -> float:
    """``int_s^anchor d tau / alpha_bar(tau)`` (negative for ``s > anchor``).

    Integrates in ``u = log tau`` so the ``1/tau``-type singularity at 0 turns
    into a smooth integrand on a long interval.
    """
    if s <= 0:
        raise ValueError("eta needs s > 0")
    if s == anchor:
        return 0.0
    lo, hi = sorted((s, anchor))
    kinks = [math.log(k) for k in _kinks(alpha, lo, hi)]
    val = integrate_adaptive(_log_integrand(alpha), math.log(lo), math.log(hi), tol, breakpoints=kinks)
    return val if s < anchor else -val


class EtaFunction:
    """Tabulated ``eta`` for repeated evaluation and inversion.

    Node values are exact cumulative quadratures over short log-segments;
    queries between nodes add one more short quadrature, and inversion runs a
    bisection-safeguarded Newton iteration inside the bracketing segment.
    """

    def __init__(self, alpha: ComparisonFn, anchor: float = 1.0, s_floor: float = S_FLOOR,
                 s_hi: float = None, tol: Tolerance = ETA_TOL, per_decade: int = 8):
        self.alpha = alpha
        self.anchor = float(anchor)
        self.s_floor = float(s_floor)
        self.s_hi = float(s_hi if s_hi is not None else alpha.domain_hi)
        if not self.s_floor < self.anchor <= self.s_hi:
            raise ValueError("need s_floor < anchor <= s_hi")
        self.tol = tol
        self._w = _log_integrand(alpha)
        lo, hi = math.log(self.s_floor), math.log(self.s_hi)
        n = max(2, int(math.ceil((hi - lo) / math.log(10) * per_decade)) + 1)
        nodes = set(np.linspace(lo, hi, n).tolist())
        nodes.add(math.log(self.anchor))
        nodes.update(math.log(k) for k in _kinks(alpha, self.s_floor, self.s_hi))
        self.u = np.array(sorted(nodes))
        seg = np.array([integrate_adaptive(self._w, a, b, tol) for a, b in zip(self.u[:-1], self.u[1:])])
        # eta at node k = sum of segments between node k and the anchor, summed
        # outward from the anchor so no large partial sums get differenced
        k_anchor = int(np.searchsorted(self.u, math.log(self.anchor)))
        values = np.zeros(self.u.size)
        values[:k_anchor] = np.cumsum(seg[:k_anchor][::-1])[::-1]
        values[k_anchor + 1:] = -np.cumsum(seg[k_anchor:])
        self.values = values
        self._wk = self._w(self.u)

    @property
    def top(self) -> float:
        """``eta(s_floor)``: larger arguments invert to ``s_floor`` (clamped)."""
        return float(self.values[0])

    @property
    def bottom(self) -> float:
        return float(self.values[-1])

    def _segment(self, u: float) -> int:
        k = int(np.searchsorted(self.u, u, side="right")) - 1
        return min(max(k, 0), self.u.size - 2)

    def _value_u(self, u: float, k: int) -> float:
        if u == self.u[k + 1]:
            return float(self.values[k + 1])
        if u == self.u[k]:
            return float(self.values[k])
        return float(self.values[k + 1]) + integrate_adaptive(self._w, u, self.u[k + 1], self.tol)

    def __call__(self, s: float) -> float:
        if s < self.s_floor:
            return math.inf
        if s > self.s_hi:
            raise OutOfRegion(f"eta queried at s={s:.6g} above {self.s_hi:.6g}")
        u = math.log(s)
        return self._value_u(u, self._segment(u))

    def inverse(self, y: float, full_output: bool = False):
        if y >= self.top:
            return (self.s_floor, True) if full_output else self.s_floor
        if y < self.bottom:
            raise TargetOutOfRange(f"eta never falls to {y:.6g} on [{self.s_floor:g}, {self.s_hi:g}]")
        # values are decreasing in the node index
        k = int(np.searchsorted(-self.values, -y, side="right")) - 1
        k = min(max(k, 0), self.u.size - 2)
        a, b = self.u[k], self.u[k + 1]
        fa, fb = self.values[k] - y, self.values[k + 1] - y
        if fa == 0:
            s = math.exp(a)
            return (s, False) if full_output else s
        u = a + (b - a) * fa / (fa - fb) if fa != fb else 0.5 * (a + b)
        for _ in range(60):
            fu = self._value_u(u, k) - y
            if abs(fu) <= 1e-15 * max(1.0, abs(y)):
                break
            if fu > 0:
                a = u
            else:
                b = u
            du = fu / float(self._w(np.array([u]))[0])  # d eta/du = -w(u)
            nxt = u + du
            if not a < nxt < b:
                nxt = 0.5 * (a + b)
            if abs(nxt - u) <= 1e-14 or b - a <= 1e-14:
                u = nxt
                break
            u = nxt
        s = math.exp(u)
        return (s, False) if full_output else s


def eta_inverse(alpha: ComparisonFn, y: float, s_floor: float = S_FLOOR, anchor: float = 1.0,
                full_output: bool = False):
    """Inverse of the strictly decreasing ``eta``.

    Arguments at or above ``eta(s_floor)`` return ``s_floor``; with
    ``full_output`` the result is ``(s, clamped)``.
    """
    return EtaFunction(alpha, anchor=anchor, s_floor=s_floor).inverse(y, full_output)


def big_g(g: TimeSignal, t: float) -> float:
    """``G(t) = int_0^t g``; requires ``g`` declared nonnegative."""
    if not g.declared_nonneg:
        raise InvariantViolation(f"gain {g.name!r} must be declared nonnegative")
    if t < 0:
        raise ValueError("big_g needs t >= 0")
    return g.integral(t)


# ---------------------------------------------------------------------------
# KL bound


class KLBound:
    """``beta(s, t) = eta^{-1}(eta(s) + G(t))`` with ``beta(0, t) = 0``.

    ``s_max`` bounds the arguments on which the bound is certified (queries
    above it raise :class:`OutOfRegion`). When ``alpha`` is literally ``s`` the
    closed form ``s * exp(-G(t))`` is used unless ``use_fast_path=False``.
    """

    def __init__(self, alpha: ComparisonFn, g: TimeSignal, eta_quadrature: Tolerance = ETA_TOL,
                 s_floor: float = S_FLOOR, anchor: float = 1.0, s_max: float = None,
                 use_fast_path: bool = True):
        if alpha.declared_class not in ("K", "Kinf"):
            raise InvariantViolation("KLBound needs a class-K alpha")
        if not g.declared_nonneg:
            raise InvariantViolation(f"gain {g.name!r} must be declared nonnegative")
        self.alpha = alpha
        self.g = g
        self.eta_quadrature = eta_quadrature
        self.s_floor = s_floor
        self.s_max = float(s_max if s_max is not None else alpha.domain_hi)
        self.anchor = min(anchor, self.s_max)
        self.fast = use_fast_path and alpha.is_identity
        self._eta = None
        self._lock = threading.Lock()

    @property
    def eta_fn(self) -> EtaFunction:
        with self._lock:
            if self._eta is None:
                self._eta = EtaFunction(self.alpha, self.anchor, self.s_floor, self.s_max, self.eta_quadrature)
            return self._eta

    def G(self, t: float) -> float:
        return big_g(self.g, t)

    def evaluate(self, s: float, t: float, full_output: bool = False):
        if s < 0 or t < 0:
            raise ValueError("beta needs s >= 0 and t >= 0")
        if s > self.s_max * (1 + 1e-12):
            raise OutOfRegion(f"beta queried at s={s:.6g} above the certified level {self.s_max:.6g}")
        if s == 0:
            return (0.0, False) if full_output else 0.0
        if self.fast:
            v = s * math.exp(-self.G(t))
            return (v, False) if full_output else v
        if t == 0:
            return (s, False) if full_output else s
        ef = self.eta_fn
        return ef.inverse(ef(min(s, self.s_max)) + self.G(t), full_output)

    def __call__(self, s, t):
        if np.ndim(s) == 0 and np.ndim(t) == 0:
            return self.evaluate(float(s), float(t))
        s_b, t_b = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        out = np.empty(s_b.shape)
        for idx in np.ndindex(s_b.shape):
            out[idx] = self.evaluate(float(s_b[idx]), float(t_b[idx]))
        return out

    def table(self, s_grid, t_grid) -> np.ndarray:
        """``beta`` on the outer product grid, shape ``(len(s_grid), len(t_grid))``."""
        s_grid = np.asarray(s_grid, dtype=float)
        t_grid = np.asarray(t_grid, dtype=float)
        return self(s_grid[:, None], t_grid[None, :])


def kl_beta(alpha: ComparisonFn, g: TimeSignal, **kw) -> KLBound:
    return KLBound(alpha, g, **kw)


def bound_with_input(beta: KLBound, y0: float, v: TimeSignal, t: float) -> float:
    """``beta(y0, t) + 2 int_0^t v``."""
    return beta.evaluate(y0, t) + 2.0 * big_g(v, t)


def bound_sup_form(beta: KLBound, y0: float, v: TimeSignal, t: float, n_grid: int = 2001) -> float:
    """``max(beta(y0, t), max_{[0, t]} v)`` with the running max taken on a uniform grid."""
    vmax = float(np.max(v.vector(np.linspace(0.0, t, n_grid)))) if t > 0 else float(v(0.0))
    return max(beta.evaluate(y0, t), vmax)


def locality_admissible(y0: float, v: TimeSignal, T: float, r_prime: float) -> bool:
    """Whether ``y0 + 2 int_0^T v < r_prime`` (strict)."""
    return y0 + 2.0 * big_g(v, T) < r_prime


def oracle_solve(alpha3: ComparisonFn, alpha4: ComparisonFn, g1: TimeSignal, g2: TimeSignal,
                 v: TimeSignal, y0: float, T: float, tol: Tolerance = ODE_TOL,
                 t_eval: Sequence[float] = None) -> Trajectory:
    """Integrate the extremal equation ``y' = -g1 alpha3(y) + g2 alpha4(y) + v`` with ``y >= 0``."""

    def rhs(t, y):
        z = y[0] if y[0] > 0.0 else 0.0
        dz = -g1(t) * alpha3(z) + g2(t) * alpha4(z) + v(t)
        if z == 0.0 and dz < 0.0:
            dz = 0.0
        return np.array([dz])

    traj = rk45_integrate(rhs, [y0], (0.0, T), tol, blowup_threshold=1e12, t_eval=t_eval,
                          project=lambda y: np.maximum(y, 0.0))
    traj.meta["kind"] = "comparison_oracle"
    return traj


# ---------------------------------------------------------------------------
# KL class membership


def verify_kl_table(table: np.ndarray, s_grid, t_grid, residual_row: int = -1, residual: float = None) -> Report:
    """Check a tabulated ``beta`` for KL monotonicity.

    Flags every adjacent pair that is not strictly increasing in ``s``, every
    pair that increases in ``t``, and every nonzero entry of an ``s = 0`` row.
    """
    table = np.asarray(table, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    rep = Report("kl_membership")
    ns, nt = table.shape
    for j in range(nt):
        for i in range(ns - 1):
            margin = table[i + 1, j] - table[i, j]
            rep.observe(margin)
            if not margin > 0:
                rep.violations.append(Violation((i, j), float(t_grid[j]), table[i, j], table[i + 1, j], margin,
                                                "not increasing in s"))
    for i in range(ns):
        if s_grid[i] == 0:
            for j in range(nt):
                rep.observe(-abs(table[i, j]))
                if table[i, j] != 0:
                    rep.violations.append(Violation((i, j), float(t_grid[j]), table[i, j], 0.0,
                                                    -abs(table[i, j]), "nonzero at s=0"))
            continue
        for j in range(nt - 1):
            margin = table[i, j] - table[i, j + 1]
            rep.observe(margin)
            if margin < -1e-15 * max(1.0, abs(table[i, j])):
                rep.violations.append(Violation((i, j), float(t_grid[j + 1]), table[i, j + 1], table[i, j],
                                                margin, "increasing in t"))
    if residual is not None:
        rep.info["residual"] = float(residual)
        rep.info["residual_s"] = float(s_grid[residual_row])
    return rep


def verify_kl(beta: KLBound, s_grid, t_grid, t_infinity: float = 1e3) -> Report:
    """KL membership on sampled grids plus the residual ``beta(max s, t_infinity)``.

    The residual, and ``G(t_infinity)``, are reported rather than judged: the
    decay to zero as ``t`` grows depends on the declared divergence of ``G``.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    table = beta.table(s_grid, t_grid)
    s_top = float(np.max(s_grid))
    residual = beta.evaluate(s_top, t_infinity)
    rep = verify_kl_table(table, s_grid, t_grid, int(np.argmax(s_grid)), residual)
    rep.info["G_t_infinity"] = beta.G(t_infinity)
    rep.info["t_infinity"] = float(t_infinity)
    return rep
