"""LiISS estimate assembled from a Lyapunov certificate.

Given ``alpha1(|x|) <= V <= alpha2(|x|)`` and the dissipation inequality,
``y = V(t, x(t))`` obeys a scalar comparison equation whose KL bound
``beta1`` yields

    alpha1(|x(t)|) <= beta2(|x0|, t) + 2 int_0^t phi(|u|),   beta2(s, t) = beta1(alpha2(s), t)
    |x(t)| <= beta(|x0|, t) + sigma(int_0^t gamma(|u|))

with ``beta = alpha1^{-1}(2 beta2)``, ``sigma(s) = alpha1^{-1}(2s)``, ``gamma = 2 phi``.
The estimate is certified while ``|x0| + sigma0(int gamma0(|u|)) <= R`` with
``sigma0 = alpha2^{-1}`` and ``gamma0 = 2 phi``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .comparison import ComparisonFn, KLBound, TimeSignal, kl_beta
from .errors import NoAdmissibleRegion, OutOfRegion, TargetOutOfRange
from .numerics import Tolerance, Trajectory, bisect_monotone, fmt17
from .report import Report, Violation


@dataclass
class LiissCertificate:
    beta1: KLBound
    alpha1: ComparisonFn
    alpha2: ComparisonFn
    phi: ComparisonFn
    R: float
    r_cert: float
    construction: str
    region: tuple
    info: dict = field(default_factory=dict)

    def beta2(self, s: float, t: float) -> float:
        y0 = self.alpha2(float(s))
        if y0 > self.r_cert * (1 + 1e-12):
            raise OutOfRegion(f"|x0|={s:.6g} gives alpha2(|x0|)={y0:.6g} above the certified level {self.r_cert:.6g}")
        return self.beta1.evaluate(min(y0, self.r_cert), t)

    def beta(self, s: float, t: float) -> float:
        return self.sigma(self.beta2(s, t))

    def sigma(self, s: float) -> float:
        return _inv(self.alpha1, 2.0 * s)

    def gamma(self, s):
        return 2.0 * self.phi(s)

    def sigma0(self, s: float) -> float:
        return _inv(self.alpha2, s)

    def gamma0(self, s):
        return 2.0 * self.phi(s)


def _inv(fn: ComparisonFn, y: float) -> float:
    if y == 0:
        return 0.0
    try:
        return float(fn.inverse(y))
    except TargetOutOfRange as exc:
        raise OutOfRegion(str(exc)) from exc


def _first_peak(f, hi: float, n: int = 4000) -> float:
    """First local maximum of ``f`` on ``(0, hi]`` (``hi`` if ``f`` increases throughout)."""
    grid = np.geomspace(hi * 1e-9, hi, n)
    vals = f(grid)
    drop = np.nonzero(np.diff(vals) <= 0)[0]
    if drop.size == 0:
        return hi
    j = int(drop[0])
    lo, up = grid[max(j - 1, 0)], grid[min(j + 1, n - 1)]
    for _ in range(200):
        m1 = lo + (up - lo) / 3
        m2 = up - (up - lo) / 3
        if f(np.array([m1]))[0] < f(np.array([m2]))[0]:
            lo = m1
        else:
            up = m2
        if up - lo <= 1e-15 * up:
            break
    return 0.5 * (lo + up)


def build_certificate(alpha1: ComparisonFn, alpha2: ComparisonFn, theta1: ComparisonFn,
                      theta2: ComparisonFn, phi: ComparisonFn, g1: TimeSignal, region: tuple,
                      repair: bool = True, n_check: int = 400) -> LiissCertificate:
    """Build the certificate from the Lyapunov data and ``region = (R', r', R)``.

    The decay rate is ``alpha = theta1(alpha2^{-1}) - theta2(alpha1^{-1})``
    when that is positive on the sampled ``(0, r']``. Otherwise, with
    ``repair=True``, the rate ``(theta1 - theta2)(alpha2^{-1})`` is used on
    ``[0, r'']`` with ``R''`` the first maximum of ``theta1 - theta2`` and
    ``r'' = alpha1(R'')``, and ``R = alpha2^{-1}(r''/2)``.
    """
    R_prime, r_prime, R = (float(v) for v in region)
    if not (R_prime > 0 and r_prime > 0 and R > 0):
        raise NoAdmissibleRegion("region constants must be positive")

    def a3(y):
        return theta1(alpha2.inverse(y))

    def a4(y):
        return theta2(alpha1.inverse(y))

    ys = np.geomspace(r_prime * 1e-12, r_prime, n_check)
    gap = a3(ys) - a4(ys)
    info = {"paper_rate_min": float(gap.min())}
    if np.all(gap > 0) and np.all(np.diff(gap) > 0):
        alpha = ComparisonFn(lambda y: a3(y) - a4(y), "K", r_prime, name="alpha3-alpha4", validate=False)
        construction, r_cert, R_cert = "paper", r_prime, R
    elif not repair:
        raise NoAdmissibleRegion(
            f"theta1(alpha2^-1) - theta2(alpha1^-1) is not positive increasing on (0, r'] "
            f"(minimum {gap.min():.3g})")
    else:
        def theta_gap(s):
            return theta1(s) - theta2(s)

        R2 = _first_peak(theta_gap, R_prime)
        if theta_gap(np.array([R2]))[0] <= 0:
            raise NoAdmissibleRegion("theta1 - theta2 is not positive near 0")
        r_cert = min(alpha1(R2), alpha2(R2))
        R_cert = bisect_monotone(alpha2, 0.5 * r_cert, 0.0, R2, Tolerance(1e-17, 1e-16, 400))
        alpha = ComparisonFn(lambda y: theta_gap(alpha2.inverse(y)), "K", r_cert,
                             name="(theta1-theta2)(alpha2^-1)", validate=False)
        construction = "repaired"
        info.update({"R_double_prime": R2})
    beta1 = kl_beta(alpha, g1, s_max=r_cert, anchor=min(1.0, r_cert))
    return LiissCertificate(beta1, alpha1, alpha2, phi, R_cert, r_cert, construction,
                            (R_prime, r_prime, R), info)


def envelope_at(cert: LiissCertificate, x0_norm: float, input_energy: float, t: float) -> float:
    """``beta(|x0|, t) + sigma(E)`` with ``E = int_0^t gamma(|u|)`` already accumulated."""
    if x0_norm < 0 or input_energy < 0 or t < 0:
        raise ValueError("envelope_at needs nonnegative arguments")
    b = cert.beta(x0_norm, t) if x0_norm > 0 else 0.0
    return b + cert.sigma(input_energy)


def check_membership_BR(cert: LiissCertificate, x0_norm: float, energy_series) -> bool:
    """``|x0| + sigma0(e) <= R`` for every accumulated ``gamma0``-energy ``e``."""
    energy = np.atleast_1d(np.asarray(energy_series, dtype=float))
    if energy.size == 0:
        energy = np.zeros(1)
    top = cert.alpha2(cert.alpha2.domain_hi)
    worst = float(np.max(energy))
    if worst > top:
        return False
    return bool(x0_norm + cert.sigma0(worst) <= cert.R)


def verify_trajectory(cert: LiissCertificate, traj: Trajectory) -> Report:
    """Check the raw and final forms of the estimate at every sample of ``traj``.

    ``traj.input_integral`` must hold ``int_0^t phi(|u|)``. Raises
    :class:`OutOfRegion` when ``|x0|`` is outside the certified level.
    """
    x0 = float(traj.norm[0])
    rep = Report("liiss_envelope")
    rows = []
    for i, (t, n, e) in enumerate(zip(traj.t, traj.norm, traj.input_integral)):
        b2 = cert.beta2(x0, float(t)) if x0 > 0 else 0.0
        raw_l, raw_r = cert.alpha1(float(n)), b2 + 2.0 * float(e)
        env = cert.sigma(b2) + cert.sigma(2.0 * float(e))
        m_raw = raw_r - raw_l
        m_fin = env - float(n)
        tol = 1e-12 * max(1.0, env)
        rep.observe(min(m_raw, m_fin))
        bad = False
        if m_raw < -1e-12 * max(1.0, raw_r):
            rep.violations.append(Violation(i, float(t), raw_l, raw_r, m_raw, "raw"))
            bad = True
        if m_fin < -tol:
            rep.violations.append(Violation(i, float(t), float(n), env, m_fin, "final"))
            bad = True
        rows.append((float(t), float(n), env, m_fin, bad))
    rep.info["construction"] = cert.construction
    rep.info["in_region"] = check_membership_BR(cert, x0, 2.0 * traj.input_integral)
    rep.rows = rows
    return rep


def write_envelope_csv(report: Report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "norm", "envelope", "margin", "violated"])
        for t, n, env, m, bad in report.rows:
            w.writerow([fmt17(t), fmt17(n), fmt17(env), fmt17(m), int(bad)])


def ode_certificate(cfg, repair: bool = True) -> LiissCertificate:
    """Certificate for the two-state closed loop of :mod:`liiss.ode_example`."""
    from .lyapunov import admissible_region, ode_sandwich_fns, ode_theta_fns

    a1, a2 = ode_sandwich_fns(cfg.M)
    theta1, theta2, phi = ode_theta_fns(cfg.M, cfg.m, cfg.n)
    region = admissible_region(a1, a2, theta1, theta2)
    return build_certificate(a1, a2, theta1, theta2, phi, cfg.g1, region, repair=repair)

