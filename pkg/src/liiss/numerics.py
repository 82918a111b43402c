"""Low-level numerical kernels: adaptive quadrature, monotone root bracketing,
an embedded Dormand-Prince integrator with blow-up detection, and a
tridiagonal (Thomas) solver.

All routines are deterministic pure functions of their inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .errors import NonConvergence, SingularPivot, StepUnderflow, TargetOutOfRange

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iters: int = 60

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.abs_tol + self.rel_tol <= 0:
            raise ValueError("abs_tol + rel_tol must be positive")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")

    def halved(self) -> "Tolerance":
        return Tolerance(self.abs_tol / 2, self.rel_tol / 2, self.max_iters)


QUAD_TOL = Tolerance(1e-10, 1e-10, 60)
ODE_TOL = Tolerance(1e-10, 1e-8, 1_000_000)
BISECT_TOL = Tolerance(1e-12, 0.0, 200)


def _as_vector_fn(f):
    """Wrap ``f`` so that it maps float arrays to float arrays."""

    def vf(x):
        try:
            y = np.asarray(f(x), dtype=float)
        except (TypeError, ValueError):
            y = None
        if y is None or y.shape != x.shape:
            y = np.array([float(f(float(xi))) for xi in x])
        return y

    return vf


# ---------------------------------------------------------------------------
# quadrature


def integrate_adaptive(f: Callable, a: float, b: float, tol: Tolerance = QUAD_TOL,
                       breakpoints: Sequence[float] = ()) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]``.

    Every pass refines all unconverged panels at once so that ``f`` is called
    on whole arrays of abscissae. ``breakpoints`` inside ``(a, b)`` become
    initial panel boundaries (use them for kinks of the integrand).
    ``tol.max_iters`` caps the refinement depth; hitting it raises
    :class:`NonConvergence`.
    """
    a = float(a)
    b = float(b)
    if b < a:
        raise ValueError(f"integrate_adaptive needs a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0
    vf = _as_vector_fn(f)
    inner = sorted(p for p in breakpoints if a < p < b)
    edges = [a] + inner + [b]
    # a few uniform panels per piece so oscillatory integrands are not aliased
    nodes = np.concatenate([np.linspace(lo, hi, 5)[:-1] for lo, hi in zip(edges[:-1], edges[1:])] + [[b]])

    target = None
    for _attempt in range(4):
        value, target_used = _simpson_pass(vf, nodes, a, b, tol, target)
        wanted = max(tol.abs_tol, tol.rel_tol * abs(value))
        if target_used <= 2.0 * wanted:
            return value
        # the coarse first estimate overstated |Q|; redo against the converged value
        target = wanted
    return value


def _simpson_pass(vf, nodes, a, b, tol, target):
    left = nodes[:-1]
    right = nodes[1:]
    mid = 0.5 * (left + right)
    fl = vf(left)
    fr = vf(right)
    fm = vf(mid)
    whole = (right - left) / 6.0 * (fl + 4.0 * fm + fr)
    if not np.all(np.isfinite(whole)):
        raise NonConvergence("integrand is not finite on the initial panels")
    if target is None:
        target = max(tol.abs_tol, tol.rel_tol * abs(float(np.sum(whole))))
    eps = target * (right - left) / (b - a)

    total = 0.0
    for _depth in range(tol.max_iters):
        lm = 0.5 * (left + mid)
        rm = 0.5 * (mid + right)
        both = vf(np.concatenate([lm, rm]))
        flm, frm = both[: lm.size], both[lm.size:]
        sl = (mid - left) / 6.0 * (fl + 4.0 * flm + fm)
        sr = (right - mid) / 6.0 * (fm + 4.0 * frm + fr)
        refined = sl + sr
        err = refined - whole
        if not np.all(np.isfinite(refined)):
            raise NonConvergence("integrand is not finite inside [a, b]")
        done = (np.abs(err) <= 15.0 * eps) | (np.abs(err) <= 64 * _EPS * (np.abs(sl) + np.abs(sr)))
        total += float(np.sum(refined[done] + err[done] / 15.0))
        keep = ~done
        if not keep.any():
            return total, target
        # split every unconverged panel into its two halves
        left, mid, right = (
            np.concatenate([left[keep], mid[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
            np.concatenate([mid[keep], right[keep]]),
        )
        fl, fm, fr = (
            np.concatenate([fl[keep], fm[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
            np.concatenate([fm[keep], fr[keep]]),
        )
        whole = np.concatenate([sl[keep], sr[keep]])
        eps = np.concatenate([eps[keep], eps[keep]]) / 2.0
    raise NonConvergence(
        f"adaptive Simpson did not converge on [{a}, {b}] within depth {tol.max_iters}")


# ---------------------------------------------------------------------------
# monotone inversion


def bisect_monotone(f: Callable[[float], float], target: float, lo: float, hi: float,
                    tol: Tolerance = BISECT_TOL) -> float:
    """Solve ``f(s) = target`` for strictly monotone ``f`` on ``[lo, hi]`` by bisection.

    Stops once ``|f(s) - target| <= abs_tol`` or the bracket is narrower than
    ``abs_tol + rel_tol * |s|``.
    """
    flo = f(lo) - target
    fhi = f(hi) - target
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise TargetOutOfRange(
            f"target {target!r} is not bracketed by f({lo!r})={flo + target!r}, f({hi!r})={fhi + target!r}")
    for _ in range(tol.max_iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid) - target
        if abs(fm) <= tol.abs_tol or (hi - lo) <= tol.abs_tol + tol.rel_tol * abs(mid):
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if mid in (lo, hi) and hi - lo <= 4 * _EPS * max(abs(lo), abs(hi)):
            return mid
    return 0.5 * (lo + hi)


def bisect_monotone_vec(f: Callable, targets: np.ndarray, lo: float, hi: float,
                        iters: int = 80, log_scale: bool = False) -> np.ndarray:
    """Elementwise bisection for many targets of one increasing function.

    Targets outside ``[f(lo), f(hi)]`` are clipped to the bracket ends; callers
    wanting an error must check the range themselves. With ``log_scale`` the
    bracket is bisected in ``log s`` (``lo`` must then be positive), which gives
    relative rather than absolute accuracy.
    """
    targets = np.asarray(targets, dtype=float)
    if log_scale:
        a = np.full(targets.shape, math.log(lo))
        b = np.full(targets.shape, math.log(hi))
        to_s = np.exp
    else:
        a = np.full(targets.shape, float(lo))
        b = np.full(targets.shape, float(hi))

        def to_s(u):
            return u
    for _ in range(iters):
        m = 0.5 * (a + b)
        below = np.asarray(f(to_s(m)), dtype=float) < targets
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    return to_s(0.5 * (a + b))


# ---------------------------------------------------------------------------
# ODE integration


@dataclass
class Trajectory:
    """Time series of a simulated state with accumulated input integrals.

    ``states`` has one row per entry of ``t``. ``input_integral`` holds an
    accumulated input-energy series on the same grid (its meaning is set by
    the producing simulator and recorded in ``meta['input_integral']``).
    """

    t: np.ndarray
    states: np.ndarray
    norm: np.ndarray
    input_integral: Optional[np.ndarray] = None
    blow_up_time: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        self.norm = np.asarray(self.norm, dtype=float)
        if self.input_integral is None:
            self.input_integral = np.zeros_like(self.t)
        self.input_integral = np.asarray(self.input_integral, dtype=float)

    @property
    def blew_up(self) -> bool:
        return self.blow_up_time is not None

    @property
    def final_norm(self) -> float:
        return float(self.norm[-1])

    @property
    def sup_norm(self) -> float:
        return float(np.max(self.norm))

    def at(self, t) -> np.ndarray:
        """State at time(s) ``t`` by linear interpolation between stored samples."""
        t = np.asarray(t, dtype=float)
        cols = [np.interp(t, self.t, self.states[:, j]) for j in range(self.states.shape[1])]
        return np.stack(cols, axis=-1)

    def norm_at(self, t) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.t, self.norm)

    def window(self, t0: float, t1: float) -> "Trajectory":
        keep = (self.t >= t0) & (self.t <= t1)
        return Trajectory(self.t[keep], self.states[keep], self.norm[keep],
                          self.input_integral[keep], self.blow_up_time, dict(self.meta))

    def to_csv(self, path, columns: Sequence[str] = None):
        """Write ``t, <state columns>, norm, input_integral`` with 17 significant digits."""
        dim = self.states.shape[1]
        if columns is None:
            columns = [f"x{j + 1}" for j in range(dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *columns, "norm", "input_integral"])
            for i in range(self.t.size):
                w.writerow([fmt17(self.t[i]), *(fmt17(v) for v in self.states[i]),
                            fmt17(self.norm[i]), fmt17(self.input_integral[i])])


def fmt17(v: float) -> str:
    return f"{float(v):.17g}"


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def rk45_integrate(rhs: Callable, x0, t_span, tol: Tolerance = ODE_TOL,
                   blowup_threshold: float = 1e6, *, t_eval=None, min_step: float = 1e-12,
                   max_step: float = np.inf, first_step: float = None,
                   project: Callable = None) -> Trajectory:
    """Integrate ``x' = rhs(t, x)`` with the embedded Dormand-Prince 5(4) pair.

    Steps are clipped so every point of ``t_eval`` is hit exactly. Integration
    stops at the first accepted step whose Euclidean norm exceeds
    ``blowup_threshold`` (recorded as ``blow_up_time``). ``project``, when
    given, maps every accepted state (e.g. clamping to a cone).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t0 < t1:
        raise ValueError("rk45_integrate needs t0 < t1")
    if blowup_threshold <= 0:
        raise ValueError("blowup_threshold must be positive")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    atol, rtol = tol.abs_tol, tol.rel_tol

    stops = [t1] if t_eval is None else sorted({float(s) for s in t_eval if t0 < s <= t1} | {t1})
    stop_idx = 0

    def f(t, y):
        return np.asarray(rhs(t, y), dtype=float)

    ts = [t0]
    xs = [x.copy()]
    t = t0
    k1 = f(t, x)
    if first_step is None:
        scale = atol + rtol * np.abs(x)
        d0 = np.sqrt(np.mean((x / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, (t1 - t0) / 10)
    else:
        h = first_step
    h = min(max(h, min_step), max_step)
    blow_up_time = None
    n_steps = 0

    def partial():
        states = np.array(xs)
        return Trajectory(np.array(ts), states, np.linalg.norm(states, axis=1), meta={"steps": n_steps})

    def underflow(msg):
        exc = StepUnderflow(msg)
        exc.trajectory = partial()
        return exc

    # overflow inside a rejected trial step is detected and handled below
    with np.errstate(over="ignore", invalid="ignore"):
        while t < t1:
            target = stops[stop_idx]
            clipped = False
            if t + h >= target - 1e-14 * max(1.0, abs(target)):
                h = target - t
                clipped = True
            k = [k1]
            for s in range(1, 7):
                xs_ = x + h * sum(a * kj for a, kj in zip(_A[s], k) if a != 0.0)
                k.append(f(t + _C[s] * h, xs_))
            x_new = x + h * sum(b * kj for b, kj in zip(_B5, k) if b != 0.0)
            err_vec = h * sum(e * kj for e, kj in zip(_E, k))
            scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not np.isfinite(err) or not np.all(np.isfinite(x_new)):
                h *= 0.2
                if h < min_step:
                    raise underflow(f"non-finite step at t={t:.6g}; step fell below {min_step}")
                continue
            if err <= 1.0:
                t = target if clipped else t + h
                if clipped:
                    stop_idx = min(stop_idx + 1, len(stops) - 1)
                x = project(x_new) if project is not None else x_new
                k1 = k[6] if project is None else f(t, x)
                ts.append(t)
                xs.append(x.copy())
                n_steps += 1
                if np.linalg.norm(x) > blowup_threshold:
                    blow_up_time = t
                    break
                if n_steps >= tol.max_iters:
                    raise StepUnderflow(f"exceeded {tol.max_iters} steps before t={t1}")
                fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h = min(h * fac, max_step)
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
                if h < min_step:
                    raise underflow(f"step size {h:.3g} below minimum {min_step} at t={t:.6g}")

    traj = partial()
    traj.blow_up_time = blow_up_time
    return traj


# ---------------------------------------------------------------------------
# tridiagonal systems


@dataclass
class Tridiagonal:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.diag = np.asarray(self.diag, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = self.diag.size
        if n < 1 or self.lower.size != n - 1 or self.upper.size != n - 1:
            raise ValueError(
                f"inconsistent band lengths: lower={self.lower.size}, diag={n}, upper={self.upper.size}")

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def row_sums(self) -> np.ndarray:
        s = self.diag.copy()
        s[:-1] += self.upper
        s[1:] += self.lower
        return s

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def scaled(self, alpha: float, shift: float = 0.0) -> "Tridiagonal":
        """Return ``shift * I + alpha * self``."""
        return Tridiagonal(alpha * self.lower, shift + alpha * self.diag, alpha * self.upper)


@numba.njit(cache=True)
def _thomas(lower, diag, upper, rhs, pivot_eps):
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    piv = diag[0]
    if abs(piv) < pivot_eps:
        return c, 0
    c[0] = upper[0] / piv if n > 1 else 0.0
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i - 1] * c[i - 1]
        if abs(piv) < pivot_eps:
            return c, i
        if i < n - 1:
            c[i] = upper[i] / piv
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        d[i] -= c[i] * d[i + 1]
    return d, -1


def thomas_solve(m: Tridiagonal, rhs, pivot_eps: float = 1e-300) -> np.ndarray:
    """Solve ``m @ x = rhs`` by forward elimination and back substitution (no pivoting)."""
    rhs = np.ascontiguousarray(rhs, dtype=float)
    if rhs.shape != (m.n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({m.n},)")
    upper = m.upper if m.n > 1 else np.zeros(1)
    lower = m.lower if m.n > 1 else np.zeros(1)
    x, bad = _thomas(np.ascontiguousarray(lower), np.ascontiguousarray(m.diag),
                     np.ascontiguousarray(upper), rhs, pivot_eps)
    if bad >= 0:
        raise SingularPivot(f"pivot {bad} has magnitude below {pivot_eps}")
    return x
