"""One-dimensional parabolic equation with space-time-varying coefficients.

    x_t = (a(xi, t) x_xi)_xi - c(xi, t) x + h(xi, t, x) + u(xi, t)   on (xi_min, xi_max)

with zero-flux boundary conditions. Space is discretized by a conservative
three-point stencil (mirror ghost nodes at both ends), time by Crank-Nicolson
for diffusion and forward Euler for the remaining terms.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateInput, InvariantViolation
from .expr import Expression
from .numerics import Trajectory, Tridiagonal, fmt17, thomas_solve
from .report import Report, Violation

PAPER_A = "sqrt(exp(-t)+0.5*sin(pi*xi)+0.5)"
PAPER_C = "1+pi*sqrt(sin(xi)+exp(-t)+1)"
PAPER_H = "sqrt(1+sin(xi))/(1+t)*x^2"
PAPER_U = "A1*sin(10*t+xi)"
PAPER_X0 = "k*(xi-0.5)*(xi-2)"


@dataclass
class GridFunction:
    values: np.ndarray
    xi_min: float
    xi_max: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 3:
            raise InvariantViolation("a grid function needs at least 3 nodes")
        if not self.xi_min < self.xi_max:
            raise InvariantViolation("need xi_min < xi_max")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return (self.xi_max - self.xi_min) / (self.n - 1)

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(self.xi_min, self.xi_max, self.n)

    @classmethod
    def sample(cls, f: Callable, xi_min: float, xi_max: float, n: int) -> "GridFunction":
        xi = np.linspace(xi_min, xi_max, n)
        vals = np.broadcast_to(np.asarray(f(xi), dtype=float), xi.shape).copy()
        return cls(vals, xi_min, xi_max)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(values, self.xi_min, self.xi_max)


def _as_field(f, variables):
    if isinstance(f, str):
        return Expression(f, variables)
    if isinstance(f, (int, float)):
        return Expression(repr(float(f)), variables)
    return f


@dataclass
class PdeConfig:
    """Coefficients, growth data and discretization for one run.

    ``a``, ``c`` and ``u`` are functions of ``(xi, t)``, ``h`` of
    ``(xi, t, x)``; strings are parsed as expressions. ``a_min`` and ``c_min``
    default to the sampled minima over the space-time grid.
    """

    a: Callable
    c: Callable
    h: Callable
    u: Callable
    x0: object
    M: float = math.sqrt(2.0)
    m1: float = 2.0
    m2: float = 2.0
    a_min: Optional[float] = None
    c_min: Optional[float] = None
    xi_min: float = 0.5
    xi_max: float = 2.0
    n_xi: int = 201
    dt: float = 1e-3
    T: float = 20.0
    blowup_threshold: float = 1e6
    max_halvings: int = 20
    output_times: Sequence[float] = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0)
    record_every: int = 10
    N: int = 1
    growth_x_max: float = 10.0
    validate: bool = True
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a = _as_field(self.a, ("xi", "t"))
        self.c = _as_field(self.c, ("xi", "t"))
        self.u = _as_field(self.u, ("xi", "t"))
        self.h = _as_field(self.h, ("xi", "t", "x"))
        if self.n_xi < 3:
            raise InvariantViolation("n_xi must be at least 3")
        if not self.xi_min < self.xi_max:
            raise InvariantViolation("need xi_min < xi_max")
        if self.dt <= 0 or self.T <= 0 or self.blowup_threshold <= 0:
            raise InvariantViolation("dt, T and blowup_threshold must be positive")
        if self.record_every < 1 or self.max_halvings < 0:
            raise InvariantViolation("record_every must be >= 1 and max_halvings >= 0")
        if not (self.m1 > 1 and self.m2 > 1):
            raise InvariantViolation("growth exponents must satisfy 1 < m_i")
        if self.N != 1:
            raise InvariantViolation("only N = 1 is simulated")
        # (H2) restricts m_i <= N/(N-2) only for N >= 3
        self.info["H2"] = "not restrictive for N=1"
        if isinstance(self.x0, GridFunction):
            if self.x0.n != self.n_xi or (self.x0.xi_min, self.x0.xi_max) != (self.xi_min, self.xi_max):
                raise InvariantViolation("x0 grid does not match (xi_min, xi_max, n_xi)")
        else:
            self.x0 = GridFunction.sample(_as_field(self.x0, ("xi",)), self.xi_min, self.xi_max, self.n_xi)
        if self.validate:
            self.check_assumptions()

    def grid(self) -> GridFunction:
        return GridFunction(np.zeros(self.n_xi), self.xi_min, self.xi_max)

    def check_assumptions(self, n: int = 21):
        xi = np.linspace(self.xi_min, self.xi_max, n)
        ts = np.linspace(0.0, self.T, n)
        X, Tt = np.meshgrid(xi, ts, indexing="ij")
        av = np.broadcast_to(np.asarray(self.a(X, Tt), dtype=float), X.shape)
        cv = np.broadcast_to(np.asarray(self.c(X, Tt), dtype=float), X.shape)
        if not (np.all(np.isfinite(av)) and np.all(np.isfinite(cv))):
            raise InvariantViolation("a or c is not finite on the sampled grid")
        if self.a_min is None:
            self.a_min = float(av.min())
        if self.c_min is None:
            self.c_min = float(cv.min())
        if self.a_min <= 0 or self.c_min <= 0:
            raise InvariantViolation(f"need positive lower bounds, got a_min={self.a_min:.6g}, c_min={self.c_min:.6g}")
        if av.min() < self.a_min * (1 - 1e-12):
            raise InvariantViolation(f"a drops to {av.min():.6g} below a_min={self.a_min}")
        if cv.min() < self.c_min * (1 - 1e-12):
            raise InvariantViolation(f"c drops to {cv.min():.6g} below c_min={self.c_min}")
        g = self.growth_check()
        if not g.ok:
            v = g.violations[0]
            raise InvariantViolation(f"|h| exceeds M(|x|^m1+|x|^m2) at sample {v.index}: {v.lhs:.6g} > {v.rhs:.6g}")

    def growth_check(self, n: int = 20) -> Report:
        xi = np.linspace(self.xi_min, self.xi_max, n)
        ts = np.linspace(0.0, self.T, n)
        xs = np.linspace(-self.growth_x_max, self.growth_x_max, n)
        X, Tt, S = np.meshgrid(xi, ts, xs, indexing="ij")
        lhs = np.abs(np.broadcast_to(np.asarray(self.h(X, Tt, S), dtype=float), X.shape))
        rhs = self.M * (np.abs(S) ** self.m1 + np.abs(S) ** self.m2)
        rep = Report("growth_bound")
        margin = rhs - lhs
        rep.n_checked = margin.size
        rep.worst_margin = float(margin.min())
        for idx in zip(*np.nonzero(margin < -1e-12 * np.maximum(1.0, rhs))):
            rep.violations.append(Violation(tuple(int(i) for i in idx), float(Tt[idx]), float(lhs[idx]),
                                            float(rhs[idx]), float(margin[idx])))
        return rep

    def with_(self, **changes) -> "PdeConfig":
        if "x0" not in changes and any(k in changes for k in ("n_xi", "xi_min", "xi_max")):
            raise InvariantViolation("changing the grid requires a new x0")
        return replace(self, **changes)


def paper_pde_config(A1: float = 0.0, scale: float = 0.5, **kw) -> PdeConfig:
    """Paper coefficients with ``x0 = scale (xi - 0.5)(xi - 2)``."""
    return PdeConfig(a=PAPER_A, c=PAPER_C, h=PAPER_H, u=Expression(PAPER_U, ("xi", "t"), {"A1": A1}),
                     x0=Expression(PAPER_X0, ("xi",), {"k": scale}), **kw)


def _field(f, xi, *args) -> np.ndarray:
    return np.broadcast_to(np.asarray(f(xi, *args), dtype=float), xi.shape)


def assemble_diffusion(a: Callable, t: float, grid: GridFunction) -> Tridiagonal:
    """Discrete ``(a x_xi)_xi`` with zero flux at both ends.

    Interior row ``i`` is ``(a_{i+1/2}(x_{i+1}-x_i) - a_{i-1/2}(x_i-x_{i-1})) / dx^2``
    with ``a`` sampled at midpoints. The ghost node mirrors the first interior
    node, so the boundary rows carry twice the adjacent midpoint coefficient
    and every row sums to zero.
    """
    dx = grid.dx
    mid = grid.xi_min + dx * (np.arange(grid.n - 1) + 0.5)
    am = _field(a, mid, t)
    if np.any(am <= 0) or not np.all(np.isfinite(am)):
        raise InvariantViolation(f"diffusion coefficient must be positive at half-nodes (t={t:.6g})")
    w = am / (dx * dx)
    upper = w.copy()
    lower = w.copy()
    upper[0] = 2.0 * w[0]
    lower[-1] = 2.0 * w[-1]
    diag = np.empty(grid.n)
    diag[0] = -upper[0]
    diag[-1] = -lower[-1]
    diag[1:-1] = -(w[:-1] + w[1:])
    return Tridiagonal(lower, diag, upper)


def reaction(state: GridFunction, t: float, cfg: PdeConfig) -> np.ndarray:
    xi, x = state.xi, state.values
    return -_field(cfg.c, xi, t) * x + _field(cfg.h, xi, t, x) + _field(cfg.u, xi, t)


def step_imex(state: GridFunction, t: float, dt: float, cfg: PdeConfig) -> GridFunction:
    """Advance one step: Crank-Nicolson diffusion (frozen at ``t + dt/2``), explicit rest."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    L = assemble_diffusion(cfg.a, t + 0.5 * dt, state)
    rhs = state.values + 0.5 * dt * L.matvec(state.values) + dt * reaction(state, t, cfg)
    new = thomas_solve(L.scaled(-0.5 * dt, 1.0), rhs)
    return state.with_values(new)


def _weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def discrete_norm(f: GridFunction, p: float = 2.0) -> float:
    """Trapezoidal approximation of the ``L^p`` norm."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(np.dot(_weights(f.n, f.dx), np.abs(f.values) ** p) ** (1.0 / p))


def discrete_mean(f: GridFunction) -> float:
    return float(np.dot(_weights(f.n, f.dx), f.values) / (f.xi_max - f.xi_min))


def sobolev_norm(f: GridFunction) -> float:
    """``(|f|_2^2 + |f'|_2^2)^(1/2)`` with central differences (one-sided at the ends)."""
    df = np.gradient(f.values, f.dx, edge_order=1)
    return math.sqrt(discrete_norm(f) ** 2 + discrete_norm(f.with_values(df)) ** 2)


def interpolation_exponent(p: float, q: float, N: int = 1, r: float = 2.0) -> float:
    return (1.0 / q - 1.0 / p) / (1.0 / q + 1.0 / N - 1.0 / r)


def interpolation_check(f: GridFunction, p: float, q: float):
    """Return ``(|f|_p, |f|_q^(1-lam) |f|_{1,2}^lam, ratio)`` for ``N = 1``, ``r = 2``."""
    if not 1 <= q <= p < math.inf:
        raise ValueError("need 1 <= q <= p < inf")
    lam = interpolation_exponent(p, q)
    lhs = discrete_norm(f, p)
    rhs = discrete_norm(f, q) ** (1.0 - lam) * sobolev_norm(f) ** lam
    if rhs == 0.0:
        if lhs > 0.0:
            raise DegenerateInput("right-hand side vanishes while |f|_p > 0")
        return 0.0, 0.0, 0.0
    return lhs, rhs, lhs / rhs


def holder_interpolation_check(f: GridFunction, p: float, q: float, r: float):
    """``|f|_p <= |f|_q^(1-lam) |f|_r^lam`` with ``1/p = lam/r + (1-lam)/q``.

    Returns ``(lhs, rhs, lam)``; ``r = inf`` uses the max norm.
    """
    if not 1 <= q <= p <= r:
        raise ValueError("need 1 <= q <= p <= r")
    if p == q:
        lam = 0.0
    else:
        lam = (1.0 / q - 1.0 / p) / (1.0 / q - (0.0 if math.isinf(r) else 1.0 / r))
    nr = float(np.max(np.abs(f.values))) if math.isinf(r) else discrete_norm(f, r)
    return discrete_norm(f, p), discrete_norm(f, q) ** (1.0 - lam) * nr ** lam, lam


def simulate(cfg: PdeConfig) -> Trajectory:
    """March ``step_imex`` from 0 to ``T``.

    Recorded every ``record_every`` steps (and at the end): time, state,
    discrete L2 norm and the running integral of ``|u(., t)|^2``. A step whose
    max-norm exceeds ``blowup_threshold`` (or is not finite) is retried with
    half the step, which stays halved afterwards; after ``max_halvings``
    halvings the run is declared blown up at the time of the failing step.
    Snapshots nearest ``output_times`` are kept in ``meta['snapshots']``.
    """
    state = cfg.x0
    t, dt = 0.0, cfg.dt
    xi = state.xi
    w = _weights(state.n, state.dx)

    def u_sq(tt):
        return float(np.dot(w, _field(cfg.u, xi, tt) ** 2))

    ts, states, energy = [0.0], [state.values.copy()], [0.0]
    E, u_prev = 0.0, u_sq(0.0)
    snaps = {}
    pending = sorted(float(s) for s in cfg.output_times if 0.0 <= s <= cfg.T)
    while pending and pending[0] <= 0.0:
        snaps[pending.pop(0)] = state.values.copy()
    halvings, steps, blow_up = 0, 0, None
    eps_t = 1e-9 * cfg.dt
    # time is t_base + k * dt so that long runs do not accumulate rounding
    t_base, k = 0.0, 0
    while t < cfg.T - eps_t:
        t_new = t_base + (k + 1) * dt
        if t_new > cfg.T - eps_t:
            t_new = cfg.T
        h = t_new - t
        new = step_imex(state, t, h, cfg)
        peak = float(np.max(np.abs(new.values)))
        if not np.isfinite(peak) or peak > cfg.blowup_threshold:
            if halvings < cfg.max_halvings:
                halvings += 1
                dt *= 0.5
                t_base, k = t, 0
                continue
            blow_up = t_new
            break
        k += 1
        u_new = u_sq(t_new)
        E += 0.5 * h * (u_prev + u_new)
        u_prev = u_new
        state, t = new, t_new
        steps += 1
        while pending and t >= pending[0] - eps_t:
            snaps[pending.pop(0)] = state.values.copy()
        if steps % cfg.record_every == 0 or t >= cfg.T:
            ts.append(t)
            states.append(state.values.copy())
            energy.append(E)
    if ts[-1] != t:
        ts.append(t)
        states.append(state.values.copy())
        energy.append(E)
    S = np.array(states)
    norms = np.sqrt(S ** 2 @ w)
    return Trajectory(np.array(ts), S, norms, np.array(energy), blow_up,
                      meta={"kind": "pde", "xi": xi, "snapshots": snaps, "steps": steps,
                            "halvings": halvings, "final_dt": dt,
                            "input_integral": "int |u|_2^2"})


def l2_dissipation_check(traj: Trajectory, cfg: PdeConfig, slack_factor: float = 10.0) -> Report:
    """Check ``d/dt(|x|^2/2) <= -c_min |x|^2 + M sum_i |x|_{m_i+1}^{m_i+1}`` along ``traj``.

    Valid for runs without input. The derivative is a central difference of
    the recorded norms; slack is ``slack_factor * dt * (1 + |rhs|)`` with the
    local record spacing as ``dt``.
    """
    xi = traj.meta.get("xi")
    n = traj.states.shape[1]
    w = _weights(n, (cfg.xi_max - cfg.xi_min) / (n - 1))
    half_sq = 0.5 * (traj.states ** 2 @ w)
    absx = np.abs(traj.states)
    growth = cfg.M * ((absx ** (cfg.m1 + 1)) @ w + (absx ** (cfg.m2 + 1)) @ w)
    rep = Report("l2_dissipation")
    rep.info["c_min"] = cfg.c_min
    t = traj.t
    for i in range(1, t.size - 1):
        hstep = t[i + 1] - t[i - 1]
        d = (half_sq[i + 1] - half_sq[i - 1]) / hstep
        rhs = -cfg.c_min * 2.0 * half_sq[i] + growth[i]
        slack = slack_factor * 0.5 * hstep * (1.0 + abs(rhs))
        margin = rhs + slack - d
        rep.observe(margin)
        if margin < 0:
            rep.violations.append(Violation(i, float(t[i]), d, rhs + slack, margin))
    del xi
    return rep


def heat_validation(n_xi: int = 201, dt: float = 1e-3, T: float = 1.0):
    """Pure heat flow on ``(0, pi)`` from ``cos(xi)``: returns ``(numeric, exact, rel_err)`` at ``T``."""
    cfg = PdeConfig(a=1.0, c=0.0, h=0.0, u=0.0, x0="cos(xi)", xi_min=0.0, xi_max=math.pi,
                    n_xi=n_xi, dt=dt, T=T, validate=False, output_times=())
    traj = simulate(cfg)
    exact = math.exp(-T) * discrete_norm(cfg.x0)
    num = traj.final_norm
    return num, exact, abs(num - exact) / exact


def conservation_drift(n_steps: int = 1000, n_xi: int = 201, dt: float = 1e-3,
                       x0: str = "(xi-0.5)*(xi-2)+cos(3*xi)") -> float:
    """Max deviation of the discrete mean over ``n_steps`` of pure diffusion with the paper ``a``."""
    cfg = PdeConfig(a=PAPER_A, c=0.0, h=0.0, u=0.0, x0=x0, n_xi=n_xi, dt=dt, T=n_steps * dt,
                    validate=False, output_times=(), record_every=1)
    state, t = cfg.x0, 0.0
    m0 = discrete_mean(state)
    drift = 0.0
    for _ in range(n_steps):
        state = step_imex(state, t, dt, cfg)
        t += dt
        drift = max(drift, abs(discrete_mean(state) - m0))
    return drift


def random_fourier(rng: np.random.Generator, n_xi: int, xi_min: float = 0.5, xi_max: float = 2.0,
                   max_modes: int = 10) -> GridFunction:
    """Random cosine sum with at most ``max_modes`` modes, sampled on ``n_xi`` nodes."""
    k = int(rng.integers(1, max_modes + 1))
    coef = rng.normal(size=k)
    modes = rng.choice(np.arange(0, 2 * max_modes), size=k, replace=False)
    phase = rng.uniform(0, 2 * np.pi, size=k)
    return GridFunction.sample(
        lambda xi: sum(c * np.cos(m * np.pi * (xi - xi_min) / (xi_max - xi_min) + ph)
                       for c, m, ph in zip(coef, modes, phase)), xi_min, xi_max, n_xi)


def interpolation_sweep(n_xi: int, n_funcs: int = 1000, seed: int = 0x5EED, p: float = 4.0,
                        q: float = 2.0) -> float:
    """Largest empirical interpolation constant over ``n_funcs`` random grid functions.

    The same seed yields the same underlying functions for every ``n_xi``.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_funcs):
        f = random_fourier(rng, n_xi)
        best = max(best, interpolation_check(f, p, q)[2])
    return best


def write_snapshots(traj: Trajectory, directory) -> list:
    os.makedirs(directory, exist_ok=True)
    xi = traj.meta["xi"]
    paths = []
    for tt, vals in sorted(traj.meta.get("snapshots", {}).items()):
        path = os.path.join(directory, f"snapshot_t{tt:g}.csv")
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["xi", "value"])
            for a, b in zip(xi, vals):
                wr.writerow([fmt17(a), fmt17(b)])
        paths.append(path)
    return paths


def write_norm_series(traj: Trajectory, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "l2_norm", "input_energy"])
        for a, b, c in zip(traj.t, traj.norm, traj.input_integral):
            wr.writerow([fmt17(a), fmt17(b), fmt17(c)])
