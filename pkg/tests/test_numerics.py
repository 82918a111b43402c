import math

import numpy as np
import pytest

from liiss.errors import SingularPivot, StepUnderflow, TargetOutOfRange
from liiss.numerics import (ODE_TOL, QUAD_TOL, Tolerance, Trajectory, Tridiagonal, bisect_monotone,
                            bisect_monotone_vec, fmt17, integrate_adaptive, rk45_integrate, thomas_solve)


# Tolerance / Tridiagonal invariants

def test_tolerance_rejects_zero_sum():
    with pytest.raises(ValueError):
        Tolerance(0.0, 0.0)


def test_tolerance_rejects_negative():
    with pytest.raises(ValueError):
        Tolerance(-1e-3, 1e-3)


def test_tolerance_halved():
    t = Tolerance(1e-8, 1e-6).halved()
    assert (t.abs_tol, t.rel_tol) == (5e-9, 5e-7)


def test_tridiagonal_band_lengths_checked():
    with pytest.raises(ValueError):
        Tridiagonal([1.0, 1.0], [2.0, 2.0], [1.0])


def test_tridiagonal_matvec_matches_dense():
    rng = np.random.default_rng(1)
    m = Tridiagonal(rng.normal(size=4), rng.normal(size=5), rng.normal(size=4))
    x = rng.normal(size=5)
    assert np.allclose(m.matvec(x), m.to_dense() @ x)


# integrate_adaptive

def test_quad_linear():
    assert integrate_adaptive(lambda t: 2 * t, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_quad_rational():
    assert integrate_adaptive(lambda t: 5 / (1 + t), 0.0, 2.0) == pytest.approx(5 * math.log(3), abs=1e-9)


def test_quad_zero():
    assert integrate_adaptive(lambda t: 0.0 * t, 0.0, 7.0) == 0.0


def test_quad_rejects_reversed_interval():
    with pytest.raises(ValueError):
        integrate_adaptive(lambda t: 2 * t, 1.0, 0.0)


def test_quad_breakpoint_kink():
    val = integrate_adaptive(lambda t: np.abs(t - 0.3), 0.0, 1.0, breakpoints=[0.3])
    assert val == pytest.approx(0.5 * 0.09 + 0.5 * 0.49, abs=1e-12)


@pytest.mark.parametrize("c", [0.1, 0.5, 1.7, 2.9])
def test_quad_additive(c):
    f = lambda t: np.exp(-t) * np.sin(3 * t)  # noqa: E731
    whole = integrate_adaptive(f, 0.0, 3.0)
    parts = integrate_adaptive(f, 0.0, c) + integrate_adaptive(f, c, 3.0)
    assert abs(whole - parts) <= 3 * QUAD_TOL.abs_tol


# bisect_monotone

def test_bisect_square():
    assert bisect_monotone(lambda s: s * s, 4.0, 0.0, 10.0) == pytest.approx(2.0, abs=1e-10)


def test_bisect_exp():
    assert bisect_monotone(math.exp, math.e, 0.0, 5.0) == pytest.approx(1.0, abs=1e-10)


def test_bisect_decreasing():
    assert bisect_monotone(lambda s: 1 / s - 1, 3.0, 0.01, 1.0) == pytest.approx(0.25, abs=1e-10)


def test_bisect_target_out_of_range():
    with pytest.raises(TargetOutOfRange):
        bisect_monotone(lambda s: s, 5.0, 0.0, 1.0)


def test_bisect_vectorized_matches_scalar():
    targets = np.array([0.25, 1.0, 4.0, 9.0])
    out = bisect_monotone_vec(lambda s: s * s, targets, 0.0, 10.0)
    assert np.allclose(out, np.sqrt(targets), atol=1e-10)


# rk45_integrate

def test_rk45_decay():
    traj = rk45_integrate(lambda t, y: -y, [1.0], (0.0, 1.0))
    assert traj.states[-1, 0] == pytest.approx(math.exp(-1), rel=10 * ODE_TOL.rel_tol)


def test_rk45_constant():
    traj = rk45_integrate(lambda t, y: 0 * y, [3.5], (0.0, 4.0), t_eval=np.linspace(0, 4, 9))
    assert np.all(traj.states[:, 0] == 3.5)


def test_rk45_blow_up():
    traj = rk45_integrate(lambda t, y: y * y, [2.0], (0.0, 1.0), blowup_threshold=1e6)
    assert traj.blew_up
    assert traj.blow_up_time == pytest.approx(0.5, abs=1e-5)


@pytest.mark.parametrize("lam", [-2.0, -1.0, 0.0])
def test_rk45_linear_growth_rates(lam):
    grid = np.linspace(0, 5, 51)[1:]
    traj = rk45_integrate(lambda t, y: lam * y, [1.3], (0.0, 5.0), t_eval=grid)
    got = traj.at(grid)[:, 0]
    assert np.allclose(got, 1.3 * np.exp(lam * grid), rtol=10 * ODE_TOL.rel_tol, atol=1e-9)


def test_rk45_hits_t_eval_exactly():
    grid = np.array([0.1, 0.37, 1.0])
    traj = rk45_integrate(lambda t, y: -y, [1.0], (0.0, 1.0), t_eval=grid)
    assert set(grid) <= set(traj.t)


def test_rk45_step_underflow_attaches_partial_trajectory():
    # y' = y^3 from 1 is singular at t = 0.5; a huge threshold is never reached
    with pytest.raises(StepUnderflow) as info:
        rk45_integrate(lambda t, y: y ** 3, [1.0], (0.0, 1.0), blowup_threshold=1e300, min_step=1e-6)
    part = info.value.trajectory
    assert part.t[-1] == pytest.approx(0.5, abs=1e-6) and part.final_norm > 10


def test_rk45_rejects_bad_span():
    with pytest.raises(ValueError):
        rk45_integrate(lambda t, y: y, [1.0], (1.0, 1.0))


# thomas_solve

def test_thomas_identity():
    r = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(thomas_solve(Tridiagonal(np.zeros(2), np.ones(3), np.zeros(2)), r), r)


def test_thomas_decoupled():
    assert np.allclose(thomas_solve(Tridiagonal([0.0], [2.0, 2.0], [0.0]), np.array([4.0, 6.0])), [2.0, 3.0])


def test_thomas_coupled():
    assert np.allclose(thomas_solve(Tridiagonal([1.0], [2.0, 2.0], [1.0]), np.array([3.0, 3.0])), [1.0, 1.0])


def test_thomas_singular_pivot():
    with pytest.raises(SingularPivot):
        thomas_solve(Tridiagonal([1.0], [0.0, 1.0], [1.0]), np.array([1.0, 1.0]))


@pytest.mark.parametrize("n", [1, 2, 17, 1024])
def test_thomas_roundtrip_diagonally_dominant(n):
    rng = np.random.default_rng(n)
    lo, up = rng.normal(size=n - 1), rng.normal(size=n - 1)
    diag = 2.5 + np.abs(rng.normal(size=n))
    m = Tridiagonal(lo, diag, up)
    x = rng.normal(size=n)
    back = thomas_solve(m, m.matvec(x))
    assert np.max(np.abs(back - x)) <= 1e-12 * max(1.0, np.max(np.abs(x)))


# Trajectory helpers

def test_trajectory_csv_uses_17_digits(tmp_path):
    traj = Trajectory([0.0, 0.1], [[1 / 3, 2.0], [0.5, 1.0]], [1.0, 2.0])
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    text = path.read_bytes().decode()
    assert "\r" not in text
    assert text.splitlines()[0] == "t,x1,x2,norm,input_integral"
    assert fmt17(1 / 3) in text and float(fmt17(1 / 3)) == 1 / 3
