import numpy as np
import pytest

from liiss.comparison import ComparisonFn, TimeSignal
from liiss.errors import DimensionMismatch, EpsOutOfRange, InvariantViolation, NoAdmissibleRegion
from liiss.lyapunov import (DissipationSpec, LyapunovFn, QuadraticLF, admissible_region, default_eps,
                            dissipation_check, eval_ode_lf, min_quartic_bound, ode_sandwich_fns, ode_theta_fns,
                            quadratic_lf_condition_check)
from liiss.numerics import Trajectory
from liiss import ode_example as ode

H1 = TimeSignal.parse("1+0.1*sin(2*pi*t)", nonneg=True)


def const(c):
    return TimeSignal.parse(repr(float(c)), nonneg=c >= 0)


# eval_ode_lf

def test_lf_at_origin():
    assert eval_ode_lf(0.3, (0.0, 0.0), H1) == 0.0


def test_lf_paper_point():
    assert eval_ode_lf(0.0, (0.1, 0.25), H1) == pytest.approx(0.006953125, rel=1e-14)


def test_lf_unit_point():
    assert eval_ode_lf(0.0, (1.0, 1.0), H1) == pytest.approx(1.0, rel=1e-14)


def test_lf_sandwich_random():
    a1, a2 = ode_sandwich_fns(1.1)
    lf = LyapunovFn(lambda t, x: eval_ode_lf(t, x, H1), a1, a2)
    rng = np.random.default_rng(0x5EED)
    ts = rng.uniform(0, 10, 10_000)
    direction = rng.normal(size=(10_000, 2))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    xs = direction * rng.uniform(0, 5, (10_000, 1))
    rep = lf.check_sandwich(zip(ts, xs))
    assert rep.ok and rep.n_checked == 20_000


# min_quartic_bound

@pytest.mark.parametrize("x,want", [((1.0, 0.0), (1.0, 0.5, True)), ((0.0, 0.0), (0.0, 0.0, True)),
                                    ((0.0, 2.0), (16.0, 2.0, True))])
def test_min_quartic_bound(x, want):
    assert min_quartic_bound(x) == want


def test_min_quartic_bound_vectorized():
    rng = np.random.default_rng(3)
    _, _, holds = min_quartic_bound(rng.uniform(-10, 10, (1000, 2)))
    assert holds.all()


# ode_sandwich_fns / ode_theta_fns

def test_sandwich_values():
    a1, a2 = ode_sandwich_fns(1.1)
    assert a1(0.0) == 0.0
    assert a1(2.0) == pytest.approx(0.5)
    assert a2(1.0) == pytest.approx(1.05)


def test_sandwich_ordering():
    a1, a2 = ode_sandwich_fns(1.1)
    s = np.geomspace(1e-4, 1e3, 500)
    assert np.all(a1(s) <= a2(s))


def test_sandwich_inverses():
    a1, a2 = ode_sandwich_fns(1.1)
    s = np.array([1e-3, 0.5, 1.0, 4.0])
    assert np.allclose(a1.inverse(a1(s)), s, rtol=1e-12)
    assert np.allclose(a2.inverse(a2(s)), s, rtol=1e-12)


def test_theta_values():
    th1, th2, phi = ode_theta_fns(1.1, 4, 4, eps=0.25)
    assert th1(1.0) == 0.5
    assert th2(0.5) == pytest.approx(0.065625)
    assert phi(1.0) == pytest.approx(134.4)


def test_theta_default_eps():
    assert default_eps(1.1) == pytest.approx(0.5 / 2.1)


def test_theta_eps_out_of_range():
    with pytest.raises(EpsOutOfRange):
        ode_theta_fns(1.1, 4, 4, eps=0.5)


def test_theta_bad_exponents():
    with pytest.raises(ValueError):
        ode_theta_fns(1.1, 3, 4)


# admissible_region

def test_admissible_region_paper_instance():
    a1, a2 = ode_sandwich_fns(1.1)
    th1, th2, _ = ode_theta_fns(1.1, 4, 4)
    Rp, rp, R = admissible_region(a1, a2, th1, th2)
    assert Rp == pytest.approx(5 / 21, abs=1e-6)
    assert rp == pytest.approx((5 / 21) ** 4 / 8, abs=1e-9)
    assert R == pytest.approx(0.01955, abs=1e-5)
    assert abs(0.525 * (R ** 2 + R ** 4) - rp / 2) <= 1e-10
    s = np.linspace(0, Rp, 1000)
    assert np.all(th2(s) <= th1(s) + 1e-15)
    assert a2(R) <= rp / 2 + 1e-10


def test_admissible_region_none():
    a = ComparisonFn.parse("s^2", "Kinf")
    with pytest.raises(NoAdmissibleRegion):
        admissible_region(a, a, ComparisonFn.parse("s^2", "K"), ComparisonFn.parse("s", "K"))


# DissipationSpec

def test_dissipation_spec_rejects_g2_above_g1():
    th1, th2, phi = ode_theta_fns(1.1)
    with pytest.raises(InvariantViolation):
        DissipationSpec(const(1.0), const(2.0), th1, th2, phi, 0.2)


def test_dissipation_spec_rejects_theta_order():
    th1, th2, phi = ode_theta_fns(1.1)
    with pytest.raises(InvariantViolation):
        DissipationSpec(const(1.0), const(1.0), th1, th2, phi, 0.5)


# dissipation_check

def _paper_spec():
    cfg = ode.paper_config()
    return cfg, ode.ode_lyapunov(cfg), ode.ode_dissipation_spec(cfg)


def test_dissipation_zero_trajectory():
    cfg, lf, spec = _paper_spec()
    t = np.linspace(0, 5, 51)
    traj = Trajectory(t, np.zeros((51, 2)), np.zeros(51))
    assert dissipation_check(traj, lf, spec, lambda s: 0.0).ok


def test_dissipation_paper_run():
    cfg, lf, spec = _paper_spec()
    traj = ode.simulate(cfg)
    rep = dissipation_check(traj, lf, spec, lambda t: abs(cfg.d(t)))
    assert rep.ok and rep.n_checked > 100


def test_dissipation_growing_trajectory_flagged():
    cfg, lf, spec = _paper_spec()
    # spacing fine enough that the default slack 10*dt*(1+|rhs|) stays below dV/dt >= 0.01
    t = np.linspace(0, 1, 2001)
    x = np.stack([0.1 * np.exp(t), np.zeros_like(t)], axis=1)
    traj = Trajectory(t, x, np.linalg.norm(x, axis=1))
    rep = dissipation_check(traj, lf, spec, lambda s: 0.0)
    assert len(rep.violations) == traj.t.size - 2


# QuadraticLF / quadratic_lf_condition_check

def _samples(n=1):
    rng = np.random.default_rng(7)
    return [(float(t), rng.normal(size=n), 0.0) for t in np.linspace(0, 5, 20)]


def test_quadratic_equality_case():
    qlf = QuadraticLF(lambda t: np.eye(2), 1.0, 1.0)
    rep = quadratic_lf_condition_check(qlf, lambda t: -np.eye(2), lambda t, x, u: np.zeros(2),
                                       const(2.0), const(0.0), 4, 4, ComparisonFn.parse("s^2", "K"),
                                       _samples(2))
    assert rep.ok


def test_quadratic_cubic_case():
    qlf = QuadraticLF(lambda t: np.eye(1), 1.0, 1.0)
    rep = quadratic_lf_condition_check(qlf, lambda t: -np.eye(1), lambda t, x, u: x ** 3, const(2.0), const(2.0),
                                       4, 4, ComparisonFn.parse("s^2", "K"), _samples(1))
    assert rep.ok


def test_quadratic_violation_reported():
    qlf = QuadraticLF(lambda t: np.eye(1), 1.0, 1.0)
    rep = quadratic_lf_condition_check(qlf, lambda t: np.eye(1), lambda t, x, u: 0 * x, const(2.0), const(0.0),
                                       4, 4, ComparisonFn.parse("s^2", "K"), [(0.0, np.array([1.0]), 0.0)])
    assert not rep.ok


def test_quadratic_not_positive_definite():
    with pytest.raises(InvariantViolation):
        QuadraticLF(lambda t: -np.eye(1), 1.0, 1.0)


def test_quadratic_bounds_checked():
    with pytest.raises(InvariantViolation):
        QuadraticLF(lambda t: 3 * np.eye(2), 1.0, 2.0)


def test_quadratic_dimension_mismatch():
    qlf = QuadraticLF(lambda t: np.eye(2), 1.0, 1.0)
    with pytest.raises(DimensionMismatch):
        quadratic_lf_condition_check(qlf, lambda t: -np.eye(3), lambda t, x, u: np.zeros(2), const(2.0),
                                     const(0.0), 4, 4, ComparisonFn.parse("s^2", "K"), _samples(2))


def test_quadratic_fd_derivative():
    qlf = QuadraticLF(lambda t: (2 + np.sin(t)) * np.eye(2), 1.0, 3.0)
    assert np.allclose(qlf.derivative(1.0), np.cos(1.0) * np.eye(2), atol=1e-8)
