"""Lyapunov functions and sampled checks of the LiISS Lyapunov conditions.

A LiISS Lyapunov function ``V`` is sandwiched as
``alpha1(|x|) <= V(t, x) <= alpha2(|x|)`` and dissipates as

    dV/dt <= -g1(t) theta1(|x|) + g2(t) theta2(|x|) + phi(|u|)

with ``g2 <= g1`` and ``theta2 <= theta1`` on ``[0, R']``. The constants
``r' = min(alpha1(R'), alpha2(R'))`` and ``R = alpha2^{-1}(r'/2)`` delimit the
region where the resulting estimate is certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .comparison import ComparisonFn, TimeSignal
from .errors import DimensionMismatch, EpsOutOfRange, InvariantViolation, NoAdmissibleRegion
from .numerics import Tolerance, Trajectory, bisect_monotone
from .report import Report, Violation


@dataclass
class LyapunovFn:
    eval: Callable
    lower: ComparisonFn
    upper: ComparisonFn

    def __call__(self, t, x):
        return self.eval(t, x)

    def check_sandwich(self, samples: Iterable, rel_slack: float = 1e-12) -> Report:
        """Check ``alpha1(|x|) <= V(t, x) <= alpha2(|x|)`` on ``(t, x)`` samples."""
        rep = Report("lyapunov_sandwich")
        for i, (t, x) in enumerate(samples):
            x = np.asarray(x, dtype=float)
            r = float(np.linalg.norm(x))
            v = float(self.eval(t, x))
            lo, hi = self.lower(r), self.upper(r)
            tol = rel_slack * max(1.0, abs(v))
            for lhs, rhs in ((lo, v), (v, hi)):
                margin = rhs - lhs
                rep.observe(margin)
                if margin < -tol:
                    rep.violations.append(Violation(i, float(t), lhs, rhs, margin))
        return rep


@dataclass
class DissipationSpec:
    g1: TimeSignal
    g2: TimeSignal
    theta1: ComparisonFn
    theta2: ComparisonFn
    phi: ComparisonFn
    R_prime: float
    horizon: float = 50.0
    validate: bool = True

    def __post_init__(self):
        if self.R_prime <= 0:
            raise InvariantViolation("R_prime must be positive")
        if not self.validate:
            return
        ts = np.linspace(0.0, self.horizon, 2001)
        gap = self.g1.vector(ts) - self.g2.vector(ts)
        if np.min(gap) < -1e-12:
            i = int(np.argmin(gap))
            raise InvariantViolation(f"g2 exceeds g1 at t={ts[i]:.6g}")
        ss = np.linspace(0.0, self.R_prime, 1001)
        th = self.theta1(ss) - self.theta2(ss)
        if np.min(th) < -1e-12 * max(1.0, float(np.max(np.abs(self.theta1(ss))))):
            i = int(np.argmin(th))
            raise InvariantViolation(f"theta2 exceeds theta1 at s={ss[i]:.6g} <= R'")

    def rhs(self, t, x_norm, u_norm):
        return (-self.g1(t) * self.theta1(x_norm) + self.g2(t) * self.theta2(x_norm)
                + self.phi(u_norm))


@dataclass
class QuadraticLF:
    """``V(t, x) = <P(t) x, x>`` with ``eta1 |x|^2 <= V <= eta2 |x|^2``.

    Without ``P_dot`` a symmetric difference with step ``fd_step`` is used.
    Coercivity and boundedness are checked on ``check_times``.
    """

    P: Callable
    eta1: float
    eta2: float
    P_dot: Optional[Callable] = None
    fd_step: float = 1e-6
    check_times: tuple = tuple(np.linspace(0.0, 10.0, 101))

    def __post_init__(self):
        if not 0 < self.eta1 <= self.eta2:
            raise InvariantViolation("need 0 < eta1 <= eta2")
        for t in self.check_times:
            P = self.matrix(t)
            if P.ndim != 2 or P.shape[0] != P.shape[1]:
                raise DimensionMismatch(f"P({t}) has shape {P.shape}, expected square")
            if not np.allclose(P, P.T, rtol=1e-12, atol=1e-14):
                raise InvariantViolation(f"P({t}) is not symmetric")
            ev = np.linalg.eigvalsh(P)
            if ev[0] <= 0:
                raise InvariantViolation(f"P({t}) is not positive definite (min eigenvalue {ev[0]:.3g})")
            if ev[0] < self.eta1 * (1 - 1e-12) or ev[-1] > self.eta2 * (1 + 1e-12):
                raise InvariantViolation(
                    f"P({t}) eigenvalues [{ev[0]:.6g}, {ev[-1]:.6g}] outside [eta1, eta2]=[{self.eta1}, {self.eta2}]")

    def matrix(self, t) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.P(t), dtype=float))

    def derivative(self, t) -> np.ndarray:
        if self.P_dot is not None:
            return np.atleast_2d(np.asarray(self.P_dot(t), dtype=float))
        h = self.fd_step
        lo = max(t - h, 0.0)
        return (self.matrix(t + h) - self.matrix(lo)) / (t + h - lo)

    def __call__(self, t, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(x @ self.matrix(t) @ x)


# ---------------------------------------------------------------------------
# the two-state example


def eval_ode_lf(t: float, x, h1: TimeSignal) -> float:
    """``x1^2 / 2 + (1 + h1(t)) x2^4 / 4``."""
    return 0.5 * x[0] ** 2 + 0.25 * (1.0 + h1(t)) * x[1] ** 4


def min_quartic_bound(x):
    """Return ``(x1^2 + x2^4, min(|x|^2, |x|^4) / 2, lhs >= rhs)``.

    Works elementwise on arrays of shape ``(..., 2)``.
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    r2 = x1 * x1 + x2 * x2
    lhs = x1 * x1 + x2 ** 4
    rhs = 0.5 * np.minimum(r2, r2 * r2)
    holds = lhs >= rhs
    if np.ndim(lhs) == 0:
        return float(lhs), float(rhs), bool(holds)
    return lhs, rhs, holds


def ode_sandwich_fns(M: float, domain_hi: float = 1e4):
    """``alpha1(s) = min(s^2, s^4)/8`` and ``alpha2(s) = max(1/2, (1+M)/4) (s^2 + s^4)``."""
    if M <= 0:
        raise ValueError("M must be positive")
    c = max(0.5, 0.25 * (1.0 + M))

    def a1_inv(y):
        y = np.asarray(y, dtype=float)
        return np.where(y <= 0.125, np.sqrt(np.sqrt(8.0 * y)), np.sqrt(8.0 * y))

    def a2_inv(y):
        # s^2 is the positive root of z^2 + z - y/c
        y = np.asarray(y, dtype=float)
        q = y / c
        return np.sqrt(2.0 * q / (1.0 + np.sqrt(1.0 + 4.0 * q)))

    a1 = ComparisonFn.parse("min(s^2, s^4)/8", "Kinf", domain_hi, inverse_fn=a1_inv)
    a2 = ComparisonFn.parse("c*(s^2+s^4)", "Kinf", domain_hi, params={"c": c}, inverse_fn=a2_inv)
    return a1, a2


def default_eps(M: float) -> float:
    return 0.5 / (M + 1.0)


def ode_theta_fns(M: float, m: int = 4, n: int = 4, eps: float = None, domain_hi: float = 1e4):
    """``theta1 = min(s^2, s^4)/2``, ``theta2 = (1+M) max(s^(m+1), s^(n+3))``,
    ``phi = (1+M) eps^-3 s^4`` with ``eps`` in ``(0, 1/(M+1))``."""
    if m <= 3 or n <= 1:
        raise ValueError("need integers m > 3 and n > 1")
    if eps is None:
        eps = default_eps(M)
    if not 0 < eps < 1.0 / (M + 1.0):
        raise EpsOutOfRange(f"eps={eps} must lie in (0, {1.0 / (M + 1.0):.6g})")
    theta1 = ComparisonFn.parse("min(s^2, s^4)/2", "K", domain_hi)
    theta2 = ComparisonFn.parse("c*max(s^p, s^q)", "K", min(domain_hi, 1e2),
                                params={"c": 1.0 + M, "p": m + 1, "q": n + 3})
    phi = ComparisonFn.parse("c*s^4", "K", domain_hi, params={"c": (1.0 + M) * eps ** -3})
    return theta1, theta2, phi


# ---------------------------------------------------------------------------
# checks


def dissipation_check(traj: Trajectory, lf, spec: DissipationSpec, u_norm: Callable,
                      slack: Optional[float] = None, slack_factor: float = 10.0) -> Report:
    """Compare the central difference of ``V`` along ``traj`` with the dissipation bound.

    At each interior sample ``i`` the check is
    ``dV_i <= rhs_i + slack_i`` with ``slack_i = slack`` if given, otherwise
    ``slack_factor * dt_i * (1 + |rhs_i|)`` where ``dt_i`` is the local step.
    """
    t = traj.t
    x = traj.states
    V = np.array([lf(t[i], x[i]) for i in range(t.size)])
    rep = Report("dissipation")
    rep.info["slack_rule"] = "fixed" if slack is not None else f"{slack_factor}*dt*(1+|rhs|)"
    for i in range(1, t.size - 1):
        h = t[i + 1] - t[i - 1]
        if h <= 0:
            continue
        dV = (V[i + 1] - V[i - 1]) / h
        rhs = spec.rhs(t[i], float(np.linalg.norm(x[i])), float(u_norm(t[i])))
        s_i = slack if slack is not None else slack_factor * 0.5 * h * (1.0 + abs(rhs))
        margin = rhs + s_i - dV
        rep.observe(margin)
        if margin < 0:
            rep.violations.append(Violation(i, float(t[i]), dV, rhs + s_i, margin))
    return rep


def quadratic_lf_condition_check(qlf: QuadraticLF, A: Callable, F: Callable, a1: TimeSignal,
                                 a2: TimeSignal, m1: float, m2: float, zeta: ComparisonFn,
                                 samples: Iterable, rel_slack: float = 1e-12) -> Report:
    """Evaluate both sides of the quadratic-LF structural inequality at ``(t, x, u)`` samples.

    ``<(A^T P + P A + P') x, x> + 2 <F(t, x, u), P x>`` against
    ``-a1 |x|^2 + a2 (|x|^m1 + |x|^m2) + zeta(|u|)``. A clean report certifies
    the inequality on the sampled set only.
    """
    if m1 <= 2 or m2 <= 2:
        raise ValueError("m1 and m2 must exceed 2")
    samples = list(samples)
    if not samples:
        raise ValueError("samples must be nonempty")
    rep = Report("quadratic_lf_condition")
    for i, (t, x, u) in enumerate(samples):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P = qlf.matrix(t)
        At = np.atleast_2d(np.asarray(A(t), dtype=float))
        Fx = np.atleast_1d(np.asarray(F(t, x, u), dtype=float))
        if P.shape != (x.size, x.size) or At.shape != P.shape or Fx.shape != x.shape:
            raise DimensionMismatch(
                f"sample {i}: P {P.shape}, A {At.shape}, F {Fx.shape}, x {x.shape} disagree")
        Q = At.T @ P + P @ At + qlf.derivative(t)
        lhs = float(x @ Q @ x + 2.0 * Fx @ (P @ x))
        r = float(np.linalg.norm(x))
        un = float(np.linalg.norm(np.atleast_1d(u)))
        rhs = -a1(t) * r * r + a2(t) * (r ** m1 + r ** m2) + zeta(un)
        margin = rhs - lhs
        rep.observe(margin)
        if margin < -rel_slack * max(1.0, abs(lhs), abs(rhs)):
            rep.violations.append(Violation(i, float(t), lhs, rhs, margin))
    rep.info["coverage"] = f"{len(samples)} sampled (t, x, u) points"
    return rep


def admissible_region(alpha1: ComparisonFn, alpha2: ComparisonFn, theta1: ComparisonFn,
                      theta2: ComparisonFn, search_hi: float = 10.0, probe: float = 1e-9,
                      n_scan: int = 4000):
    """Return ``(R', r', R)``.

    ``R'`` is the first point where ``theta1 - theta2`` turns negative on
    ``(probe, search_hi]`` (``search_hi`` if it never does),
    ``r' = min(alpha1(R'), alpha2(R'))`` and ``R = alpha2^{-1}(r'/2)``.
    """

    def gap(s):
        return theta1(s) - theta2(s)

    if gap(probe) < 0:
        raise NoAdmissibleRegion(f"theta2 > theta1 already at s={probe:g}")
    grid = np.geomspace(probe, search_hi, n_scan)
    vals = gap(grid)
    bad = np.nonzero(vals < 0)[0]
    if bad.size == 0:
        R_prime = float(search_hi)
    else:
        j = int(bad[0])
        R_prime = bisect_monotone(lambda s: -gap(s), 0.0, float(grid[j - 1]), float(grid[j]),
                                  Tolerance(0.0, 1e-15, 200))
    r_prime = min(alpha1(R_prime), alpha2(R_prime))
    R = bisect_monotone(alpha2, 0.5 * r_prime, 0.0, R_prime, Tolerance(1e-17, 1e-16, 400))
    return R_prime, r_prime, R
