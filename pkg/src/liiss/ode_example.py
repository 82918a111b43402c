"""Two-state nonlinear system with time-varying linear feedback.

Open loop::

    x1' = g(t) x1^m - h1(t) x2^3 + u1
    x2' = g~(t) x2^n - b(t) x1^2 x2 + u2

Feedback ``u1 = -g1 x1``, ``u2 = h2 x1 - g2 x2`` plus an additive disturbance
``d(t) = A (0.6 exp(-t^(1/4)) + 1.2 cos(pi t))`` in the second equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .comparison import TimeSignal
from .errors import InvariantViolation, StepUnderflow
from .lyapunov import (DissipationSpec, LyapunovFn, admissible_region, eval_ode_lf, ode_sandwich_fns,
                       ode_theta_fns)
from .numerics import ODE_TOL, Tolerance, Trajectory, rk45_integrate
from .report import Report, Violation

PAPER_SIGNALS = {
    "g": "1/(1+t)",
    "g_tilde": "1/(1+t)",
    "b": "0.08+0.03*sin(3*pi*t)",
    "h1": "1+0.1*sin(2*pi*t)",
    "g1": "5/(1+t)",
    "g2": "1+5/(1+t)",
    "h2": "(1+0.1*sin(2*pi*t))/(2+0.1*sin(2*pi*t))",
}
PAPER_H1_PRIME = "0.2*pi*cos(2*pi*t)"
DISTURBANCE = "A*(0.6*exp(-qroot(t))+1.2*cos(pi*t))"
PAPER_X0 = ((0.1, 0.25), (0.2, 0.5))


@dataclass
class OdeConfig:
    g: TimeSignal
    g_tilde: TimeSignal
    b: TimeSignal
    h1: TimeSignal
    g1: TimeSignal
    g2: TimeSignal
    h2: TimeSignal
    m: int = 4
    n: int = 4
    A: float = 0.0
    x0: tuple = (0.1, 0.25)
    T: float = 20.0
    tol: Tolerance = ODE_TOL
    blowup_threshold: float = 1e6
    M: float = 1.1
    h1_prime: Optional[TimeSignal] = None
    output_dt: float = 0.05
    validate: bool = True
    d: TimeSignal = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m <= 3:
            raise InvariantViolation("m must be an integer > 3")
        if int(self.n) != self.n or self.n <= 1:
            raise InvariantViolation("n must be an integer > 1")
        self.m, self.n = int(self.m), int(self.n)
        if self.A < 0:
            raise InvariantViolation("disturbance amplitude A must be >= 0")
        if self.T <= 0:
            raise InvariantViolation("horizon T must be positive")
        if len(self.x0) != 2:
            raise InvariantViolation("x0 must have two components")
        if self.blowup_threshold <= 0 or self.output_dt <= 0:
            raise InvariantViolation("blowup_threshold and output_dt must be positive")
        self.x0 = tuple(float(v) for v in self.x0)
        self.d = TimeSignal.parse(DISTURBANCE, params={"A": self.A}, horizon=max(self.T, 1.0))
        if self.validate:
            self.check_invariants()

    def check_invariants(self, n_grid: int = 4001):
        ts = np.linspace(0.0, self.T, n_grid)
        b = self.b.vector(ts)
        if np.min(b) <= 0:
            raise InvariantViolation(f"b(t) must be positive; b={np.min(b):.3g} at t={ts[np.argmin(b)]:.6g}")
        h1 = self.h1.vector(ts)
        if np.min(h1) < 0 or np.max(h1) > self.M * (1 + 1e-12):
            raise InvariantViolation(f"h1 must stay in [0, M={self.M}]; range [{np.min(h1):.6g}, {np.max(h1):.6g}]")
        dh = self.h1_derivative(ts)
        if np.max(dh - h1) > 1e-9:
            i = int(np.argmax(dh - h1))
            raise InvariantViolation(f"h1' exceeds h1 at t={ts[i]:.6g} ({dh[i]:.6g} > {h1[i]:.6g})")

    def h1_derivative(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.h1_prime is not None:
            return self.h1_prime.vector(ts)
        step = 1e-6
        lo = np.maximum(ts - step, 0.0)
        return (self.h1.vector(ts + step) - self.h1.vector(lo)) / (ts + step - lo)

    def with_(self, **changes) -> "OdeConfig":
        return replace(self, **changes)

    def output_grid(self) -> np.ndarray:
        k = int(math.floor(self.T / self.output_dt + 1e-9))
        grid = self.output_dt * np.arange(1, k + 1)
        return grid[grid < self.T]


def paper_config(A: float = 0.0, x0=PAPER_X0[0], T: float = 20.0, **kw) -> OdeConfig:
    """The configuration used in the numerical experiments (m = n = 4, M = 1.1)."""
    signals = {k: TimeSignal.parse(v, nonneg=True, horizon=max(T, 1.0)) for k, v in PAPER_SIGNALS.items()}
    kw.setdefault("h1_prime", TimeSignal.parse(PAPER_H1_PRIME, horizon=max(T, 1.0)))
    return OdeConfig(**signals, A=A, x0=tuple(x0), T=T, **kw)


def open_loop_rhs(t: float, x, cfg: OdeConfig) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    return np.array([cfg.g(t) * x1 ** cfg.m - cfg.h1(t) * x2 ** 3,
                     cfg.g_tilde(t) * x2 ** cfg.n - cfg.b(t) * x1 * x1 * x2])


def control_law(t: float, x, cfg: OdeConfig) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    return np.array([-cfg.g1(t) * x1, cfg.h2(t) * x1 - cfg.g2(t) * x2])


def closed_loop_rhs(t: float, x, cfg: OdeConfig) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    return np.array([
        -cfg.g1(t) * x1 + cfg.g(t) * x1 ** cfg.m - cfg.h1(t) * x2 ** 3,
        cfg.h2(t) * x1 - cfg.g2(t) * x2 + cfg.g_tilde(t) * x2 ** cfg.n
        - cfg.b(t) * x1 * x1 * x2 + cfg.d(t),
    ])


def validate_gains(cfg: OdeConfig, grid=None, declared_divergent: bool = True) -> Report:
    """Check g1 >= max(g, g~), g2 >= 1 + g1 and h2 = h1/(1 + h1) pointwise on ``grid``."""
    ts = np.linspace(0.0, cfg.T, 2001) if grid is None else np.asarray(grid, dtype=float)
    if ts.size and (ts.min() < 0 or ts.max() > cfg.T * (1 + 1e-12)):
        raise ValueError("grid must lie within [0, T]")
    g1, g2 = cfg.g1.vector(ts), cfg.g2.vector(ts)
    gbar = np.maximum(cfg.g.vector(ts), cfg.g_tilde.vector(ts))
    h1, h2 = cfg.h1.vector(ts), cfg.h2.vector(ts)
    rep = Report("gain_conditions")
    checks = {
        "con-1": (gbar, g1, 0.0),
        "con-2": (1.0 + g1, g2, 0.0),
        "con-3a": (h1 / (1.0 + h1), h2, 1e-12),
        "con-3b": (h2, h1 / (1.0 + h1), 1e-12),
    }
    failed = set()
    for name, (lhs, rhs, slack) in checks.items():
        for i in range(ts.size):
            margin = rhs[i] - lhs[i]
            rep.observe(margin)
            if margin < -slack:
                failed.add(name[:5])
                rep.violations.append(Violation(i, float(ts[i]), lhs[i], rhs[i], margin, name[:5]))
    rep.info["failed"] = sorted(failed)
    rep.info["G1_T"] = float(np.trapezoid(g1, ts))
    rep.info["declared_divergent"] = bool(declared_divergent)
    return rep


def _trapezoid_cumulative(y, t):
    out = np.zeros_like(t)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def simulate(cfg: OdeConfig, mode: str = "closed") -> Trajectory:
    """Integrate the open or closed loop over ``[0, T]``.

    The trajectory stores every accepted step (the output grid of spacing
    ``output_dt`` is always hit exactly) and ``input_integral`` holds the
    trapezoidal running integral of ``phi(|d|)``. A finite-time singularity
    that drives the step size below the integrator's minimum once the norm
    has passed ``sqrt(blowup_threshold)`` is reported as a blow-up at the last
    accepted time.
    """
    if mode not in ("open", "closed"):
        raise ValueError("mode must be 'open' or 'closed'")
    rhs = closed_loop_rhs if mode == "closed" else open_loop_rhs
    grid = cfg.output_grid()
    try:
        traj = rk45_integrate(lambda t, x: rhs(t, x, cfg), cfg.x0, (0.0, cfg.T), cfg.tol,
                              cfg.blowup_threshold, t_eval=grid)
    except StepUnderflow as exc:
        last = getattr(exc, "trajectory", None)
        if last is None or last.final_norm < math.sqrt(cfg.blowup_threshold):
            raise
        traj = last
        traj.blow_up_time = float(traj.t[-1])
        traj.meta["blow_up_reason"] = "step underflow"
    _, _, phi = ode_theta_fns(cfg.M, cfg.m, cfg.n)
    if mode == "closed":
        dn = np.abs(cfg.d.vector(traj.t))
        traj.input_integral = _trapezoid_cumulative(phi(dn), traj.t)
    traj.meta.update({"kind": "ode", "mode": mode, "A": cfg.A, "input_integral": "int phi(|d|)"})
    return traj


def ode_lyapunov(cfg: OdeConfig) -> LyapunovFn:
    a1, a2 = ode_sandwich_fns(cfg.M)
    return LyapunovFn(lambda t, x: eval_ode_lf(t, x, cfg.h1), a1, a2)


def ode_dissipation_spec(cfg: OdeConfig, eps: float = None) -> DissipationSpec:
    """Dissipation data for the closed loop: gains ``g1`` and ``max(g, g~)``."""
    theta1, theta2, phi = ode_theta_fns(cfg.M, cfg.m, cfg.n, eps)
    a1, a2 = ode_sandwich_fns(cfg.M)
    R_prime = admissible_region(a1, a2, theta1, theta2)[0]
    gbar = TimeSignal(lambda t: np.maximum(cfg.g(t), cfg.g_tilde(t)), declared_nonneg=True,
                      horizon=cfg.T, name="max(g, g_tilde)")
    return DissipationSpec(cfg.g1, gbar, theta1, theta2, phi, R_prime, horizon=cfg.T)
