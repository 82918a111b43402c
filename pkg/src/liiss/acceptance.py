"""Acceptance suite: seventeen numbered end-to-end checks.

Each check returns a :class:`CriterionResult`. Thresholds live in
``THRESHOLDS`` so that a deliberately corrupted value (``overrides``) can be
used to confirm that failures are detected and reported by number.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .comparison import ComparisonFn, KLBound, TimeSignal, bound_with_input, kl_beta, locality_admissible, oracle_solve
from .errors import LiissError
from .lyapunov import admissible_region, dissipation_check, min_quartic_bound, ode_sandwich_fns, ode_theta_fns
from .numerics import ODE_TOL
from . import ode_example as ode
from . import pde_example as pde

DEFAULT_SEED = 0x5EED

THRESHOLDS = {
    "c1.rel": 1e-8, "c1.seconds": 5.0,
    "c2.rel": 1e-8, "c2.seconds": 5.0,
    "c3.slack": 1e-6, "c3.seconds": 60.0, "c3.instances": 100,
    "c4.samples": 100_000,
    "c5.final": 1e-3, "c5.seconds": 1.0,
    "c6.final": 0.05,
    "c7.time": 10.0,
    "c8.rel": 0.25,
    "c9.slack_factor": 10.0,
    "c10.R_prime": 1e-6, "c10.r_prime": 1e-9, "c10.residual": 1e-10,
    "c11.final": 1e-3, "c11.seconds": 30.0,
    "c12.time": 5.0,
    "c13.rel": 0.25,
    "c14.rel": 0.01,
    "c15.drift": 1e-10,
    "c16.factor": 2.0,
    "c17.rel": 0.01,
}

TITLES = {
    1: "closed-form KL agreement",
    2: "quadratic-alpha oracle",
    3: "comparison-principle oracle property",
    4: "quartic lower bound",
    5: "ODE closed-loop convergence",
    6: "ODE open-loop non-convergence",
    7: "ODE blow-up",
    8: "ODE disturbance ordering",
    9: "ODE dissipation along trajectories",
    10: "admissible region",
    11: "PDE stability",
    12: "PDE blow-up",
    13: "PDE disturbance ordering",
    14: "heat-equation validation",
    15: "Neumann conservation",
    16: "interpolation inequality",
    17: "refinement stability",
}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self, timings: bool = False) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" [{self.seconds:.2f} s]" if timings else ""
        return f"criterion {self.number:2d} {status}: {self.title} -- {self.detail}{extra}"


class Suite:
    def __init__(self, seed: int = DEFAULT_SEED, overrides: dict = None):
        unknown = set(overrides or {}) - set(THRESHOLDS)
        if unknown:
            raise KeyError(f"unknown threshold(s): {', '.join(sorted(unknown))}")
        self.seed = seed
        self.tol = dict(THRESHOLDS)
        self.tol.update(overrides or {})
        self._ode_run = lru_cache(maxsize=None)(self._ode_run_uncached)
        self._pde_run = lru_cache(maxsize=None)(self._pde_run_uncached)

    # shared runs ----------------------------------------------------------

    def _ode_run_uncached(self, x0, A=0.0, T=20.0, mode="closed", halved=False):
        tol = ODE_TOL.halved() if halved else ODE_TOL
        cfg = ode.paper_config(A=A, x0=x0, T=T, tol=tol)
        t0 = time.perf_counter()
        traj = ode.simulate(cfg, mode)
        return cfg, traj, time.perf_counter() - t0

    def _pde_run_uncached(self, scale, A1=0.0, n_xi=201, dt=1e-3, T=20.0, record_every=10):
        cfg = pde.paper_pde_config(A1=A1, scale=scale, n_xi=n_xi, dt=dt, T=T, record_every=record_every)
        t0 = time.perf_counter()
        traj = pde.simulate(cfg)
        return cfg, traj, time.perf_counter() - t0

    # criteria ---------------------------------------------------------------

    def c1(self):
        t0 = time.perf_counter()
        beta = KLBound(ComparisonFn.identity(), TimeSignal.parse("5/(1+t)", nonneg=True), use_fast_path=False)
        s = np.geomspace(1e-3, 10.0, 20)
        t = np.linspace(0.0, 50.0, 26)
        table = beta.table(s, t)
        exact = s[:, None] * (1.0 + t[None, :]) ** -5
        err = float(np.max(np.abs(table / exact - 1.0)))
        secs = time.perf_counter() - t0
        ok = err <= self.tol["c1.rel"] and secs < self.tol["c1.seconds"]
        return ok, f"max relative error {err:.2e} (limit {self.tol['c1.rel']:.0e}), runtime {_sec(secs, self.tol['c1.seconds'])}"

    def c2(self):
        t0 = time.perf_counter()
        beta = kl_beta(ComparisonFn.parse("s^2", "K"), TimeSignal.constant(1.0))
        s = np.concatenate([np.geomspace(1e-4, 1.0, 25), np.linspace(0.05, 0.95, 10)])
        t = np.linspace(0.0, 50.0, 26)
        table = beta.table(s, t)
        exact = s[:, None] / (1.0 + s[:, None] * t[None, :])
        err = float(np.max(np.abs(table / exact - 1.0)))
        secs = time.perf_counter() - t0
        ok = err <= self.tol["c2.rel"] and secs < self.tol["c2.seconds"]
        return ok, f"max relative error {err:.2e} (limit {self.tol['c2.rel']:.0e}), runtime {_sec(secs, self.tol['c2.seconds'])}"

    def c3(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.seed)
        shapes = ("s", "s^2", "s+s^3")
        T, r_prime = 20.0, 1.0
        t_eval = np.linspace(0.0, T, 41)
        failures, worst = 0, math.inf
        n = int(self.tol["c3.instances"])
        for _ in range(n):
            shape = shapes[int(rng.integers(len(shapes)))]
            kappa = float(rng.uniform(0.0, 0.9))
            kappa2 = float(rng.uniform(0.0, 1.0))
            c0, c1, c2 = rng.uniform(0.05, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 2.0)
            om, ph = rng.uniform(0.5, 6.0), rng.uniform(0.0, 2 * np.pi)
            g1_text = "c0+c1*(1+sin(om*t+ph))+c2/(1+t)"
            gp = {"c0": c0, "c1": c1, "c2": c2, "om": om, "ph": ph}
            g1 = TimeSignal.parse(g1_text, nonneg=True, params=gp, horizon=T)
            g2 = TimeSignal.parse(f"k2*({g1_text})", nonneg=True, params={**gp, "k2": kappa2}, horizon=T)
            alpha3 = ComparisonFn.parse(shape, "K")
            alpha4 = ComparisonFn.parse(f"k*({shape})", "K", params={"k": kappa}, validate=kappa > 0)
            y0 = float(rng.uniform(0.0, 0.8 * r_prime))
            budget = float(rng.uniform(0.0, 0.95)) * (r_prime - y0) / 2.0
            # int_0^T of (1 + 0.5 sin)/(1+t)^2 is at most 1.5 T/(1+T)
            amp = budget / (1.5 * T / (1.0 + T))
            v = TimeSignal.parse("a*(1+0.5*sin(w*t))/(1+t)^2", nonneg=True,
                                 params={"a": amp, "w": float(rng.uniform(0.5, 10.0))}, horizon=T)
            if not locality_admissible(y0, v, T, r_prime):
                failures += 1
                continue
            beta = kl_beta(ComparisonFn.parse(f"k*({shape})", "K", params={"k": 1.0 - kappa}), g1)
            traj = oracle_solve(alpha3, alpha4, g1, g2, v, y0, T, t_eval=t_eval)
            ys = np.interp(t_eval, traj.t, traj.states[:, 0])
            for tk, yk in zip(t_eval, ys):
                margin = bound_with_input(beta, y0, v, float(tk)) + self.tol["c3.slack"] - yk
                worst = min(worst, margin)
                if margin < 0:
                    failures += 1
                    break
        secs = time.perf_counter() - t0
        ok = failures == 0 and secs < self.tol["c3.seconds"]
        return ok, (f"{failures} failing instance(s) of {n}, smallest margin {worst:.3e}, "
                    f"runtime {_sec(secs, self.tol['c3.seconds'])}")

    def c4(self):
        rng = np.random.default_rng(self.seed)
        x = rng.uniform(-10.0, 10.0, size=(int(self.tol["c4.samples"]), 2))
        _, _, holds = min_quartic_bound(x)
        bad = int(np.count_nonzero(~holds))
        return bad == 0, f"{bad} failure(s) over {x.shape[0]} samples"

    def c5(self):
        parts, ok = [], True
        for x0 in ode.PAPER_X0:
            _, traj, secs = self._ode_run(x0)
            good = (not traj.blew_up and traj.final_norm < self.tol["c5.final"]
                    and secs < self.tol["c5.seconds"])
            ok &= good
            parts.append(f"x0={x0}: |x(20)|={traj.final_norm:.2e}, runtime {_sec(secs, self.tol['c5.seconds'])}")
        return ok, "; ".join(parts)

    def c6(self):
        parts, ok = [], True
        for x0 in ode.PAPER_X0:
            _, traj, _ = self._ode_run(x0, T=50.0, mode="open")
            good = traj.blew_up or traj.final_norm > self.tol["c6.final"]
            ok &= good
            state = f"blow-up at t={traj.blow_up_time:.3g}" if traj.blew_up else f"|x(50)|={traj.final_norm:.3g}"
            parts.append(f"x0={x0}: {state}")
        return ok, "; ".join(parts)

    def c7(self):
        _, traj, _ = self._ode_run((1.2, 2.4))
        ok = traj.blew_up and traj.blow_up_time < self.tol["c7.time"]
        return ok, f"blow_up_time={traj.blow_up_time}" if traj.blew_up else "no blow-up detected"

    def c8(self):
        parts, ok = [], True
        finals = []
        for x0 in ode.PAPER_X0:
            sups = [self._ode_run(x0, A=A, T=40.0)[1].sup_norm for A in (0.0, 3.0, 4.0)]
            ok &= all(a <= b for a, b in zip(sups, sups[1:]))
            finals.append(self._ode_run(x0, A=3.0, T=40.0)[1].final_norm)
            parts.append(f"x0={x0}: sup|x| = " + ", ".join(f"{v:.4g}" for v in sups))
        rel = abs(finals[0] - finals[1]) / max(finals)
        ok &= rel <= self.tol["c8.rel"]
        parts.append(f"A=3 |x(40)| relative gap {rel:.2e}")
        return ok, "; ".join(parts)

    def c9(self):
        runs = [(x0, 0.0, 20.0) for x0 in ode.PAPER_X0]
        runs += [(x0, A, 40.0) for x0 in ode.PAPER_X0 for A in (0.0, 3.0, 4.0)]
        total, worst = 0, math.inf
        for x0, A, T in runs:
            cfg, traj, _ = self._ode_run(x0, A=A, T=T)
            rep = dissipation_check(traj, ode.ode_lyapunov(cfg), ode.ode_dissipation_spec(cfg),
                                    lambda t, c=cfg: abs(c.d(t)), slack_factor=self.tol["c9.slack_factor"])
            total += len(rep.violations)
            worst = min(worst, rep.worst_margin)
        return total == 0, f"{total} violation(s) over {len(runs)} runs, smallest margin {worst:.3e}"

    def c10(self):
        a1, a2 = ode_sandwich_fns(1.1)
        th1, th2, _ = ode_theta_fns(1.1, 4, 4)
        Rp, rp, R = admissible_region(a1, a2, th1, th2)
        e1 = abs(Rp - 5.0 / 21.0)
        e2 = abs(rp - (5.0 / 21.0) ** 4 / 8.0)
        res = abs(0.525 * (R * R + R ** 4) - rp / 2.0)
        ok = e1 <= self.tol["c10.R_prime"] and e2 <= self.tol["c10.r_prime"] and res <= self.tol["c10.residual"]
        return ok, f"R'={Rp:.12g} (err {e1:.1e}), r'={rp:.6e} (err {e2:.1e}), R={R:.10g} (residual {res:.1e})"

    def c11(self):
        parts, ok = [], True
        for k in (0.5, 0.8):
            _, traj, secs = self._pde_run(k)
            good = (not traj.blew_up and traj.final_norm < self.tol["c11.final"]
                    and secs < self.tol["c11.seconds"])
            ok &= good
            parts.append(f"x0={k}(xi-0.5)(xi-2): |x(20)|={traj.final_norm:.2e}, "
                         f"runtime {_sec(secs, self.tol['c11.seconds'])}")
        return ok, "; ".join(parts)

    def c12(self):
        _, traj, _ = self._pde_run(23.0, T=self.tol["c12.time"])
        ok = traj.blew_up and traj.blow_up_time < self.tol["c12.time"]
        if ok:
            return True, f"blow_up_time={traj.blow_up_time:.4g} on (0.5, 2)"
        return False, (f"no blow-up on (0.5, 2): initial data are nonpositive there, "
                       f"|x(5)|={traj.final_norm:.2e}")

    def c13(self):
        parts, ok = [], True
        finals = []
        for k in (0.5, 0.8):
            sups = [self._pde_run(k, A1=A)[1].sup_norm for A in (0.0, 1.0, 3.0)]
            ok &= all(a <= b for a, b in zip(sups, sups[1:]))
            finals.append(self._pde_run(k, A1=3.0)[1].final_norm)
            parts.append(f"scale {k}: sup|x| = " + ", ".join(f"{v:.4g}" for v in sups))
        rel = abs(finals[0] - finals[1]) / max(finals)
        ok &= rel <= self.tol["c13.rel"]
        parts.append(f"A1=3 |x(20)| relative gap {rel:.2e}")
        return ok, "; ".join(parts)

    def c14(self):
        num, exact, rel = pde.heat_validation(201, 1e-3, 1.0)
        return rel <= self.tol["c14.rel"], f"|x(1)|={num:.8f} vs {exact:.8f} (relative error {rel:.2e})"

    def c15(self):
        drift = pde.conservation_drift(1000)
        return drift <= self.tol["c15.drift"], f"max mean drift {drift:.2e} over 1000 steps"

    def c16(self):
        a = pde.interpolation_sweep(101, seed=self.seed)
        b = pde.interpolation_sweep(201, seed=self.seed)
        finite = math.isfinite(a) and math.isfinite(b) and a > 0 and b > 0
        factor = max(a, b) / min(a, b) if finite else math.inf
        return finite and factor < self.tol["c16.factor"], \
            f"max ratio {a:.6f} (N=101), {b:.6f} (N=201), factor {factor:.4f}"

    def c17(self):
        parts, ok = [], True
        for x0 in ode.PAPER_X0:
            cfg, a, _ = self._ode_run(x0)
            _, b, _ = self._ode_run(x0, halved=True)
            grid = np.concatenate([[0.0], cfg.output_grid(), [cfg.T]])
            na, nb = a.norm_at(grid), b.norm_at(grid)
            rel = float(np.max(np.abs(na - nb)) / np.max(na))
            ok &= rel < self.tol["c17.rel"]
            parts.append(f"ODE x0={x0}: {rel:.2e}")
        for k in (0.5, 0.8):
            _, a, _ = self._pde_run(k)
            _, b, _ = self._pde_run(k, n_xi=401, dt=5e-4, record_every=20)
            nb = np.interp(a.t, b.t, b.norm)
            rel = float(np.max(np.abs(a.norm - nb)) / np.max(a.norm))
            ok &= rel < self.tol["c17.rel"]
            parts.append(f"PDE scale {k}: {rel:.2e}")
        return ok, "relative sup change " + "; ".join(parts)

    def run(self, number: int) -> CriterionResult:
        fn = getattr(self, f"c{number}")
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except LiissError as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        return CriterionResult(number, TITLES[number], bool(passed), detail, time.perf_counter() - t0)


def _sec(secs: float, limit: float) -> str:
    # only the verdict is printed on success so repeated runs print identical lines
    return f"under {limit:g} s" if secs < limit else f"{secs:.1f} s exceeds {limit:g} s"


def run_all(seed: int = DEFAULT_SEED, only=None, overrides: dict = None, echo=None) -> list:
    suite = Suite(seed, overrides)
    results = []
    for n in (only or sorted(TITLES)):
        r = suite.run(n)
        if echo is not None:
            echo(r)
        results.append(r)
    return results
