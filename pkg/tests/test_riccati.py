import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _params import random_param_sets
from optoent.errors import NotHurwitz, StepSizeTooLarge, ZeroMeasurementRate
from optoent.model import (Channel, FilterCoefficients, ModeLabel, ModeSpec, both_modes,
                           conditional_decay, filter_coefficients, mode_quantities, table_one)
from optoent.riccati import (Cov2, SystemMatrices, conditional_steady_state, integrate_riccati,
                             kalman_gain, lyapunov_generic, lyapunov_steady_state, riccati_rhs,
                             steady_state_analytic, steady_state_residuals, system_matrices,
                             system_matrices_si)

linalg = pytest.importorskip("scipy.linalg")


def care(system: SystemMatrices) -> np.ndarray:
    """Filter Riccati fixed point via the control-form solver (duality A -> A^T)."""
    return linalg.solve_continuous_are(system.A.T, system.C.reshape(2, 1), system.N,
                                       np.array([[system.M]]), s=system.L.reshape(2, 1))


@pytest.fixture(scope="module")
def minus():
    return mode_quantities(table_one(), "differential")


def _rel_frob(a, b):
    a = a.as_array() if isinstance(a, Cov2) else np.asarray(a)
    b = b.as_array() if isinstance(b, Cov2) else np.asarray(b)
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# -- analytic steady state -------------------------------------------------

@pytest.mark.parametrize("label", ["common", "differential"])
@pytest.mark.parametrize("channel", list(Channel))
def test_analytic_matches_care(label, channel):
    mode = mode_quantities(table_one(), label)
    V = steady_state_analytic(filter_coefficients(mode, channel), mode.Q)
    assert _rel_frob(V, care(system_matrices(mode, channel))) < 1e-8


@pytest.mark.parametrize("channel", list(Channel))
def test_residuals_table_one(minus, channel):
    c = filter_coefficients(minus, channel)
    V = steady_state_analytic(c, minus.Q)
    assert max(abs(r) for r in steady_state_residuals(V, c, minus.Q)) <= 1e-9 * c.nbar_p


def test_table_one_differential_triple(minus):
    V = conditional_steady_state(minus, Channel.X)
    assert (V.v11, V.v12, V.v22) == pytest.approx((2.91157, 2.68927, 3.26125), rel=1e-5)
    assert V.v11 * V.v22 - V.v12 ** 2 >= 1.0


def test_zero_measurement_rate(minus):
    c = filter_coefficients(ModeSpec(ModeLabel.SINGLE, minus.Q, minus.C, minus.n_th, 0.0,
                                     0.9, 0.0, minus.omega_m, minus.gamma_m), Channel.X)
    with pytest.raises(ZeroMeasurementRate):
        steady_state_analytic(c, minus.Q)


def test_v11_grows_as_measurement_vanishes():
    Q, nbar = 1e3, 50.0
    v11 = []
    for lam in np.geomspace(1.0, 1e-6, 13):
        c = FilterCoefficients(lam, 0.0, nbar, conditional_decay(lam, 0.0, nbar, Q))
        v11.append(steady_state_analytic(c, Q).v11)
    assert np.all(np.diff(v11) > 0)


@pytest.mark.parametrize("Q", [1e3, 1e8])
def test_large_q_limit(Q):
    lam, nbar = 2.0, 40.0
    c = FilterCoefficients(lam, 0.0, nbar, conditional_decay(lam, 0.0, nbar, Q))
    V = steady_state_analytic(c, Q)
    system = SystemMatrices(A=np.array([[0.0, Q], [-Q, -1.0]]), C=np.array([math.sqrt(lam), 0.0]),
                            N=np.diag([0.0, nbar]), L=np.zeros(2), M=1.0)
    assert _rel_frob(V, care(system)) < 1e-7
    # leading-order behaviour: V11 -> sqrt(nbar / lam) / sqrt(2 ...) scaling stays finite
    assert V.v11 == pytest.approx((c.gamma_p - 1) / lam)
    if Q <= 1e3:
        traj = integrate_riccati(Cov2(nbar, 0.0, nbar), system, t_end=1e3)
        assert traj.converged
        assert _rel_frob(traj.final, V) < 1e-6


def test_residuals_random_sets():
    worst = 0.0
    for p in random_param_sets(100, seed=11):
        for mode in both_modes(p):
            for ch in Channel:
                c = filter_coefficients(mode, ch)
                V = steady_state_analytic(c, mode.Q)
                worst = max(worst, max(map(abs, steady_state_residuals(V, c, mode.Q))) / c.nbar_p)
    assert worst <= 1e-9


# -- Riccati right-hand side -----------------------------------------------

def test_rhs_vanishes_at_steady_state(minus):
    system = system_matrices(minus, Channel.X)
    V = conditional_steady_state(minus, Channel.X)
    d = riccati_rhs(V, system)
    nbar = system.N[1, 1]
    assert np.abs(d).max() <= 1e-9 * max(nbar, 1.0)
    assert np.array_equal(d, d.T)


def test_rhs_pure_diffusion():
    system = SystemMatrices(A=np.array([[0.0, 3.0], [-3.0, -1.0]]), C=np.zeros(2),
                            N=np.diag([0.0, 7.0]), L=np.zeros(2), M=1.0)
    assert np.array_equal(riccati_rhs(np.zeros((2, 2)), system), system.N)


@given(st.floats(0.1, 5.0), st.floats(-0.9, 0.9), st.floats(0.1, 5.0))
def test_rhs_is_derivative_of_step_map(a, rho, b):
    system = SystemMatrices(A=np.array([[0.0, 2.0], [-2.0, -0.5]]), C=np.array([0.3, 0.0]),
                            N=np.diag([0.0, 4.0]), L=np.array([0.0, 0.2]), M=1.0)
    V = np.array([[a, rho * math.sqrt(a * b)], [rho * math.sqrt(a * b), b]])
    d = riccati_rhs(V, system)
    errs = []
    for h in (1e-3, 5e-4):
        V1 = integrate_riccati(V, system, t_end=h, dt=h, stop_at_steady=False).final.as_array()
        errs.append(np.abs(V1 - V - h * d).max())
    # one-step defect is second order in h
    assert errs[0] < 1e-4 * max(1.0, np.abs(d).max())
    assert errs[1] <= errs[0] / 3.0 + 1e-15


# -- integration -----------------------------------------------------------

@pytest.mark.parametrize("channel", list(Channel))
def test_ode_from_thermal_state(minus, channel):
    s = 2.0 * minus.n_th + 1.0
    traj = integrate_riccati(Cov2(s, 0.0, s), system_matrices(minus, channel), t_end=1e6)
    assert traj.converged
    assert _rel_frob(traj.final, conditional_steady_state(minus, channel)) < 1e-6
    covs = traj.covs
    assert np.array_equal(covs, np.transpose(covs, (0, 2, 1)))


def test_unmeasured_lyapunov_state_is_stationary(minus):
    mode = ModeSpec(ModeLabel.SINGLE, 50.0, 5.0, 10.0, 0.2, 0.0, 0.0, 50.0, 1.0)
    system = system_matrices(mode, Channel.X)
    assert system.C[0] == 0.0 and system.L[1] == 0.0
    V0 = lyapunov_steady_state(system)
    traj = integrate_riccati(V0, system, t_end=5.0, stop_at_steady=False)
    assert np.allclose(traj.covs, V0.as_array(), rtol=1e-12, atol=0)


def test_zero_duration_returns_initial(minus):
    V0 = Cov2(5.0, 1.0, 4.0)
    traj = integrate_riccati(V0, system_matrices(minus, Channel.X), t_end=0.0)
    assert traj.final == V0


def test_step_size_guard(minus):
    system = system_matrices(minus, Channel.X)
    with pytest.raises(StepSizeTooLarge):
        integrate_riccati(Cov2.identity(), system, t_end=1.0, dt=1.0)


def test_initial_state_must_be_psd(minus):
    with pytest.raises(ValueError):
        integrate_riccati(Cov2(1.0, 2.0, 1.0), system_matrices(minus, Channel.X), t_end=1.0)


# -- Lyapunov --------------------------------------------------------------

def test_lyapunov_zero_noise():
    system = SystemMatrices(A=np.array([[0.0, 2.0], [-2.0, -1.0]]), C=np.zeros(2),
                            N=np.zeros((2, 2)), L=np.zeros(2), M=1.0)
    assert lyapunov_steady_state(system).as_array().tolist() == [[0.0, 0.0], [0.0, 0.0]]


@given(st.floats(1e-2, 1e6), st.floats(1e-2, 1e2), st.floats(0.0, 1e6))
def test_lyapunov_closed_form_vs_generic(w, g, n):
    system = SystemMatrices(A=np.array([[0.0, w], [-w, -g]]), C=np.zeros(2),
                            N=np.diag([0.0, n]), L=np.zeros(2), M=1.0)
    closed = lyapunov_steady_state(system).as_array()
    generic = lyapunov_generic(system.A, system.N)
    assert np.allclose(closed, generic, rtol=1e-9, atol=1e-12 * max(n / g, 1.0))


def test_lyapunov_generic_residual():
    rng = np.random.default_rng(3)
    A = np.array([[0.0, 4.0], [-4.0, -0.3]])
    B = rng.normal(size=(2, 2))
    N = B @ B.T
    V = lyapunov_generic(A, N)
    assert np.abs(A @ V + V @ A.T + N).max() < 1e-12
    assert np.allclose(V, linalg.solve_continuous_lyapunov(A, -N), rtol=1e-10)


def test_lyapunov_dominates_conditional(minus):
    for ch in Channel:
        system = system_matrices(minus, ch)
        Vl = lyapunov_steady_state(system).as_array()
        Vc = conditional_steady_state(minus, ch).as_array()
        assert np.all(np.diag(Vl) > np.diag(Vc))
        assert np.linalg.eigvalsh(Vl - Vc).min() >= -1e-9


def test_not_hurwitz():
    system = SystemMatrices(A=np.array([[0.0, 1.0], [-1.0, 0.0]]), C=np.zeros(2),
                            N=np.diag([0.0, 1.0]), L=np.zeros(2), M=1.0)
    with pytest.raises(NotHurwitz):
        lyapunov_steady_state(system)


def test_zero_detuning_falls_back_to_reduced_lyapunov(minus):
    mode = ModeSpec(ModeLabel.SINGLE, minus.Q, minus.C, minus.n_th, 0.0, minus.eta, 0.5,
                    minus.omega_m, minus.gamma_m)
    system = system_matrices(mode, Channel.X)
    V = conditional_steady_state(mode, Channel.X)
    assert np.abs(riccati_rhs(V, system)).max() <= 1e-9 * system.N[1, 1]
    reduced = system.N - np.outer(system.L, system.L) / system.M
    assert np.allclose(V.as_array(), lyapunov_generic(system.A, reduced), rtol=1e-10)


# -- gain ------------------------------------------------------------------

def test_gain_trivial_cases(minus):
    system = system_matrices(minus, Channel.X)
    zero_l = SystemMatrices(system.A, system.C, system.N, np.zeros(2), system.M)
    assert np.array_equal(kalman_gain(np.zeros((2, 2)), zero_l), np.zeros(2))
    blind = system_matrices(ModeSpec(ModeLabel.SINGLE, 10.0, 5.0, 1.0, 0.2, 0.0, 0.0, 10.0, 1.0), "x")
    assert np.array_equal(kalman_gain(Cov2(3.0, 1.0, 2.0), blind), np.zeros(2))


def test_gain_table_one(minus):
    system = system_matrices(minus, Channel.X)
    V = conditional_steady_state(minus, Channel.X)
    K = kalman_gain(V, system)
    assert K[0] == pytest.approx(V.v11 * system.C[0] / system.M, rel=1e-14)
    assert K[1] == pytest.approx((V.v12 * system.C[0] + system.L[1]) / system.M, rel=1e-14)


def test_closed_loop_stability_random():
    for p in random_param_sets(60, seed=5):
        for mode in both_modes(p):
            for ch in Channel:
                system = system_matrices(mode, ch)
                K = kalman_gain(conditional_steady_state(mode, ch), system)
                eig = np.linalg.eigvals(system.A - np.outer(K, system.C))
                assert eig.real.max() <= -0.5 * (1 - 1e-9)


# -- physicality and units -------------------------------------------------

def test_heisenberg_bound_and_dominance_random():
    for p in random_param_sets(150, seed=9):
        for mode in both_modes(p):
            for ch in Channel:
                V = conditional_steady_state(mode, ch)
                assert V.det >= 1 - 1e-9
                Vl = lyapunov_steady_state(system_matrices(mode, ch))
                assert np.linalg.eigvalsh(Vl.as_array() - V.as_array()).min() >= -1e-9


@pytest.mark.parametrize("channel", list(Channel))
def test_si_and_normalized_units_agree(minus, channel):
    si = system_matrices_si(minus, channel)
    norm = system_matrices(minus, channel)
    assert _rel_frob(care(si), care(norm)) < 1e-7
    V = conditional_steady_state(minus, channel)
    assert np.abs(riccati_rhs(V, si)).max() <= 1e-9 * si.N[1, 1]
    assert si.conditional_rate() / minus.gamma_m == pytest.approx(
        filter_coefficients(minus, channel).gamma_p, rel=1e-9)
