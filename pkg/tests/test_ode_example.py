import numpy as np
import pytest

from liiss import ode_example as ode
from liiss.comparison import TimeSignal
from liiss.errors import InvariantViolation
from liiss.lyapunov import eval_ode_lf
from liiss.numerics import ODE_TOL


@pytest.fixture(scope="module")
def cfg():
    return ode.paper_config()


# right-hand sides

def test_open_loop_origin(cfg):
    assert np.array_equal(ode.open_loop_rhs(0.3, (0.0, 0.0), cfg), [0.0, 0.0])


def test_open_loop_paper_point(cfg):
    assert np.allclose(ode.open_loop_rhs(0.0, (0.1, 0.25), cfg), [-0.015525, 0.00370625], rtol=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.7, 3.0])
def test_open_loop_x2_zero(cfg, t):
    assert np.allclose(ode.open_loop_rhs(t, (1.0, 0.0), cfg), [cfg.g(t), 0.0])


def test_control_origin(cfg):
    assert np.array_equal(ode.control_law(0.0, (0.0, 0.0), cfg), [0.0, 0.0])


def test_control_paper_point(cfg):
    assert np.allclose(ode.control_law(0.0, (0.1, 0.25), cfg), [-0.5, -1.45], rtol=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.7, 3.0])
def test_control_x2_zero(cfg, t):
    assert np.allclose(ode.control_law(t, (1.0, 0.0), cfg), [-cfg.g1(t), cfg.h2(t)])


def test_closed_loop_paper_point(cfg):
    assert np.allclose(ode.closed_loop_rhs(0.0, (0.1, 0.25), cfg), [-0.515525, -1.44629375], rtol=1e-12)


@pytest.mark.parametrize("t", [0.0, 1.3, 19.0])
def test_closed_loop_origin_fixed(cfg, t):
    assert np.array_equal(ode.closed_loop_rhs(t, (0.0, 0.0), cfg), [0.0, 0.0])


def test_closed_loop_disturbance_at_origin():
    c = ode.paper_config(A=3.0)
    assert np.allclose(ode.closed_loop_rhs(0.0, (0.0, 0.0), c), [0.0, 5.4])


# OdeConfig invariants

def test_config_rejects_nonpositive_b(cfg):
    with pytest.raises(InvariantViolation):
        cfg.with_(b=TimeSignal.parse("0.01*sin(t)"))


def test_config_rejects_h1_above_M(cfg):
    with pytest.raises(InvariantViolation):
        cfg.with_(M=1.0)


def test_config_rejects_h1_prime_above_h1():
    h1 = TimeSignal.parse("1+0.5*sin(5*t)", nonneg=True)
    others = {k: TimeSignal.parse(v, nonneg=True) for k, v in ode.PAPER_SIGNALS.items() if k != "h1"}
    with pytest.raises(InvariantViolation):
        ode.OdeConfig(**others, h1=h1, M=1.5)


def test_config_rejects_negative_amplitude():
    with pytest.raises(InvariantViolation):
        ode.paper_config(A=-1.0)


# validate_gains

def test_gains_paper_pass(cfg):
    rep = ode.validate_gains(cfg)
    assert rep.ok and rep.info["failed"] == []


def test_gains_con2_fails(cfg):
    rep = ode.validate_gains(cfg.with_(g2=cfg.g1))
    assert rep.info["failed"] == ["con-2"]


def test_gains_con3_fails(cfg):
    rep = ode.validate_gains(cfg.with_(h2=cfg.h1))
    assert rep.info["failed"] == ["con-3"]


def test_gains_con1_fails(cfg):
    rep = ode.validate_gains(cfg.with_(g1=TimeSignal.parse("0.5/(1+t)", nonneg=True),
                                       g2=TimeSignal.parse("1+0.5/(1+t)", nonneg=True)))
    assert rep.info["failed"] == ["con-1"]


# simulate

def test_simulate_zero():
    traj = ode.simulate(ode.paper_config(x0=(0.0, 0.0)))
    assert np.all(traj.norm == 0.0)


@pytest.mark.parametrize("x0", ode.PAPER_X0)
def test_simulate_closed_converges(x0):
    traj = ode.simulate(ode.paper_config(x0=x0))
    assert not traj.blew_up and traj.final_norm < 1e-3


def test_simulate_blow_up():
    traj = ode.simulate(ode.paper_config(x0=(1.2, 2.4)))
    assert traj.blew_up and traj.blow_up_time < 10


@pytest.mark.parametrize("x0", ode.PAPER_X0)
def test_simulate_open_loop_does_not_converge(x0):
    traj = ode.simulate(ode.paper_config(x0=x0, T=50.0), "open")
    assert traj.final_norm > 0.05


def test_simulate_bad_mode(cfg):
    with pytest.raises(ValueError):
        ode.simulate(cfg, "sideways")


def test_lyapunov_nonincreasing_without_input(cfg):
    traj = ode.simulate(cfg)
    V = np.array([eval_ode_lf(t, x, cfg.h1) for t, x in zip(traj.t, traj.states)])
    dt = np.diff(traj.t)
    assert np.all(np.diff(V) <= 10 * dt * (1 + np.abs(V[1:])))


@pytest.mark.parametrize("x0", ode.PAPER_X0)
def test_disturbance_ordering(x0):
    sups = [ode.simulate(ode.paper_config(A=A, x0=x0, T=40.0)).sup_norm for A in (0.0, 3.0, 4.0)]
    assert sups[0] <= sups[1] <= sups[2]


@pytest.mark.parametrize("A", [0.0, 3.0])
def test_refinement_stability(A):
    a = ode.paper_config(A=A)
    b = ode.paper_config(A=A, tol=ODE_TOL.halved())
    ta, tb = ode.simulate(a), ode.simulate(b)
    grid = a.output_grid()
    assert np.max(np.abs(ta.norm_at(grid) - tb.norm_at(grid))) < 1e-6


def test_input_integral_is_monotone():
    traj = ode.simulate(ode.paper_config(A=3.0))
    assert traj.input_integral[0] == 0.0 and np.all(np.diff(traj.input_integral) >= 0)
