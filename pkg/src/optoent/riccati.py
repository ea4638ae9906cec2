"""Conditional (Kalman-Bucy) and unconditional steady-state covariances of one mode.

Covariances are vacuum-normalized: the mechanical ground state has V = I.
Two unit systems are supported for :class:`SystemMatrices`: time measured in
units of 1/gamma_m (``units="gamma_m"``), which is what the analytic formulas
use, and plain rad/s (``units="rad/s"``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotHurwitz, StepSizeTooLarge, ZeroMeasurementRate
from .model import Channel, FilterCoefficients, ModeSpec, conditional_decay, filter_coefficients


@dataclass(frozen=True)
class Cov2:
    v11: float
    v12: float
    v22: float

    @classmethod
    def from_array(cls, a) -> "Cov2":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), float(0.5 * (a[0, 1] + a[1, 0])), float(a[1, 1]))

    @classmethod
    def identity(cls) -> "Cov2":
        return cls(1.0, 0.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([[self.v11, self.v12], [self.v12, self.v22]])

    @property
    def det(self) -> float:
        return self.v11 * self.v22 - self.v12 * self.v12

    def is_psd(self, tol: float = 0.0) -> bool:
        return self.v11 >= -tol and self.v22 >= -tol and self.det >= -tol


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Linear model dr = A r dt + (0, dw), dY = C r dt + dv.

    ``N`` and ``M`` are the intensities of w and v, ``L`` their
    cross-correlation (only the momentum entry is non-zero here).
    """

    A: np.ndarray
    C: np.ndarray  # shape (2,)
    N: np.ndarray
    L: np.ndarray  # shape (2,)
    M: float
    units: str = "gamma_m"

    @property
    def omega(self) -> float:
        return float(self.A[0, 1])

    @property
    def gamma(self) -> float:
        return float(-self.A[1, 1])

    @property
    def measurement_rate(self) -> float:
        return float(self.C[0] ** 2 / self.M)

    def conditional_rate(self) -> float:
        """gamma_I in the matrices' own time unit."""
        gamma = self.gamma
        lam = self.C[0] ** 2 / self.M
        Lam = self.C[0] * self.L[1] / self.M
        return gamma * conditional_decay(lam / gamma, Lam / gamma, self.N[1, 1] / gamma,
                                         self.omega / gamma)

    def noise_intensity(self) -> np.ndarray:
        """Joint intensity of (w, v)."""
        return np.array([[self.N[1, 1], self.L[1]], [self.L[1], self.M]])


def _couplings(mode: ModeSpec, channel: Channel) -> tuple[float, float]:
    # dimensionless observation coefficient and noise cross-correlation (gamma_m units)
    root = math.sqrt(mode.C * mode.eta) / (1.0 + 4.0 * mode.delta ** 2)
    twoN = 2.0 * mode.N_th + 1.0
    if channel is Channel.X:
        return -4.0 * mode.delta * root, 2.0 * root * twoN
    return 2.0 * root, 4.0 * mode.delta * root * twoN


def system_matrices(mode: ModeSpec, channel: "Channel | str") -> SystemMatrices:
    """Model matrices with time measured in units of 1/gamma_m."""
    channel = Channel.parse(channel)
    c, l = _couplings(mode, channel)
    nbar = filter_coefficients(mode, channel).nbar_p
    return SystemMatrices(
        A=np.array([[0.0, mode.Q], [-mode.Q, -1.0]]),
        C=np.array([c, 0.0]),
        N=np.array([[0.0, 0.0], [0.0, nbar]]),
        L=np.array([0.0, l]),
        M=2.0 * mode.eta * mode.N_th + 1.0,
        units="gamma_m",
    )


def system_matrices_si(mode: ModeSpec, channel: "Channel | str") -> SystemMatrices:
    """Model matrices in rad/s, assembled from g_m, kappa and Delta directly."""
    channel = Channel.parse(channel)
    if not (math.isfinite(mode.kappa) and math.isfinite(mode.g_m)):
        raise ValueError("mode must carry kappa and g_m (use model.mode_quantities)")
    kappa, g_m, eta = mode.kappa, mode.g_m, mode.eta
    Delta = mode.delta * kappa
    lor = kappa ** 2 + 4.0 * Delta ** 2
    twoN = 2.0 * mode.N_th + 1.0
    if channel is Channel.X:
        c = -8.0 * g_m * Delta * math.sqrt(eta * kappa) / lor
        l = 4.0 * g_m * kappa * math.sqrt(kappa * eta) / lor * twoN
    else:
        c = 4.0 * g_m * kappa * math.sqrt(eta * kappa) / lor
        l = 8.0 * g_m * Delta * math.sqrt(kappa * eta) / lor * twoN
    nbar = 2.0 * mode.gamma_m * (2.0 * mode.n_th + 1.0) + 16.0 * g_m ** 2 * kappa / lor * twoN
    w, gm = mode.omega_m, mode.gamma_m
    return SystemMatrices(
        A=np.array([[0.0, w], [-w, -gm]]),
        C=np.array([c, 0.0]),
        N=np.array([[0.0, 0.0], [0.0, nbar]]),
        L=np.array([0.0, l]),
        M=2.0 * eta * mode.N_th + 1.0,
        units="rad/s",
    )


def steady_state_analytic(coeffs: FilterCoefficients, Q: float) -> Cov2:
    """Closed-form steady state of the filter Riccati equation (gamma_m units)."""
    lam, Lam, nbar, gp = coeffs.lambda_p, coeffs.Lambda_p, coeffs.nbar_p, coeffs.gamma_p
    if not lam > 0:
        raise ZeroMeasurementRate("measurement rate is zero; use lyapunov_steady_state")
    # gamma' - 1 from the cancellation-free form of gamma'^2 - 1
    a = Lam / Q
    b = nbar * lam / Q ** 2
    gm1 = 2.0 * (nbar * lam - Lam * Lam) / (1.0 + a + math.sqrt(1.0 + 2.0 * a + b)) / (gp + 1.0)
    v11 = gm1 / lam
    v12 = gm1 * gm1 / (2.0 * lam * Q)
    v22 = gm1 * (2.0 * Q * (Q + Lam) + gp * gp - gp) / (2.0 * lam * Q * Q)
    return Cov2(v11, v12, v22)


def steady_state_residuals(V: Cov2, coeffs: FilterCoefficients, Q: float) -> tuple[float, float, float]:
    """Left-hand sides of the three scalar steady-state equations (gamma_m units)."""
    lam, Lam, nbar = coeffs.lambda_p, coeffs.Lambda_p, coeffs.nbar_p
    r1 = 2.0 * Q * V.v12 - lam * V.v11 ** 2
    r2 = (1.0 + lam * V.v11) * V.v12 + (V.v11 - V.v22) * Q + Lam * V.v11
    r3 = 2.0 * V.v22 + 2.0 * Q * V.v12 + (math.sqrt(lam) * V.v12 + Lam / math.sqrt(lam)) ** 2 - nbar
    return r1, r2, r3


def riccati_rhs(V, system: SystemMatrices) -> np.ndarray:
    """dV/dt = AV + VA^T + N - (VC^T + L) M^-1 (VC^T + L)^T."""
    V = V.as_array() if isinstance(V, Cov2) else np.asarray(V, dtype=float)
    A = system.A
    k = V @ system.C + system.L
    out = A @ V + V @ A.T + system.N - np.outer(k, k) / system.M
    return 0.5 * (out + out.T)


def kalman_gain(V, system: SystemMatrices) -> np.ndarray:
    V = V.as_array() if isinstance(V, Cov2) else np.asarray(V, dtype=float)
    return (V @ system.C + system.L) / system.M


@dataclass(frozen=True)
class RiccatiTrajectory:
    times: np.ndarray
    covs: np.ndarray  # (n, 2, 2)
    converged: bool

    @property
    def final(self) -> Cov2:
        return Cov2.from_array(self.covs[-1])


def default_step(system: SystemMatrices) -> float:
    return 0.01 / max(abs(system.omega), system.gamma, system.conditional_rate())


def integrate_riccati(V0, system: SystemMatrices, t_end: float, dt: float | None = None,
                      record_every: int = 100, stop_at_steady: bool = True,
                      max_steps: int = 50_000_000) -> RiccatiTrajectory:
    """Classical RK4 integration of the filter Riccati equation.

    ``dt`` is the step cap (default 0.01/max(omega, gamma, gamma_I)).  While
    the covariance is far above its steady state the quadratic term relaxes
    much faster than that, so each step is additionally limited to 1% of the
    local relaxation time 1/(2|C| |K|).  The step sequence is a deterministic
    function of the state.
    """
    V0 = V0 if isinstance(V0, Cov2) else Cov2.from_array(V0)
    if not V0.is_psd(1e-12):
        raise ValueError("initial covariance must be positive semidefinite")
    rate = max(abs(system.omega), system.gamma, system.conditional_rate())
    if dt is None:
        dt = 0.01 / rate
    elif dt > 0.05 / rate:
        raise StepSizeTooLarge(f"dt={dt!r} exceeds 0.05/max(omega, gamma_I) = {0.05 / rate!r}")

    w, gam = system.omega, system.gamma
    c, l, n, M = float(system.C[0]), float(system.L[1]), float(system.N[1, 1]), float(system.M)
    n11, n12 = float(system.N[0, 0]), float(system.N[0, 1])
    tol = 1e-10 * max(n, gam)

    def rhs(v11, v12, v22):
        k1 = c * v11
        k2 = c * v12 + l
        return (2.0 * w * v12 + n11 - k1 * k1 / M,
                w * (v22 - v11) - gam * v12 + n12 - k1 * k2 / M,
                -2.0 * w * v12 - 2.0 * gam * v22 + n - k2 * k2 / M)

    v11, v12, v22 = V0.v11, V0.v12, V0.v22
    t = 0.0
    times, covs = [0.0], [(v11, v12, v22)]
    converged = False
    steps = 0
    # the quadratic term relaxes at 2|c||K|; keep each step below 1% of that
    cap = 0.01 / (2.0 * abs(c)) if c != 0 else math.inf
    while t < t_end and steps < max_steps:
        a1, b1, c1 = rhs(v11, v12, v22)
        if stop_at_steady and math.sqrt(a1 * a1 + 2.0 * b1 * b1 + c1 * c1) <= tol:
            converged = True
            break
        h = min(dt, t_end - t)
        if c != 0:
            k_norm = math.hypot(c * v11, c * v12 + l) / M
            if k_norm > 0:
                h = min(h, cap / k_norm)
        hh = 0.5 * h
        a2, b2, c2 = rhs(v11 + hh * a1, v12 + hh * b1, v22 + hh * c1)
        a3, b3, c3 = rhs(v11 + hh * a2, v12 + hh * b2, v22 + hh * c2)
        a4, b4, c4 = rhs(v11 + h * a3, v12 + h * b3, v22 + h * c3)
        h6 = h / 6.0
        v11 += h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        v12 += h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        v22 += h6 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        t += h
        steps += 1
        if v11 * v22 - v12 * v12 < -1e-9 or v11 < -1e-9 or v22 < -1e-9:
            raise StepSizeTooLarge(f"covariance lost positivity at t={t!r}; reduce dt")
        if steps % record_every == 0:
            times.append(t)
            covs.append((v11, v12, v22))
    v = (v11, v12, v22)
    if not converged and stop_at_steady:
        d = rhs(*v)
        converged = math.sqrt(d[0] ** 2 + 2 * d[1] ** 2 + d[2] ** 2) <= tol
    if times[-1] != t:
        times.append(t)
        covs.append(v)
    arr = np.array([[[a, b], [b, d]] for a, b, d in covs])
    return RiccatiTrajectory(np.array(times), arr, converged)


def lyapunov_generic(A, N) -> np.ndarray:
    """Solve A V + V A^T + N = 0 through the vectorized (Kronecker) linear system."""
    A = np.asarray(A, dtype=float)
    N = np.asarray(N, dtype=float)
    n = A.shape[0]
    eye = np.eye(n)
    op = np.kron(eye, A) + np.kron(A, eye)
    vec = np.linalg.solve(op, -N.reshape(-1, order="F"))
    V = vec.reshape((n, n), order="F")
    return 0.5 * (V + V.T)


def lyapunov_steady_state(system: SystemMatrices, noise=None) -> Cov2:
    """Unconditional steady state A V + V A^T + N = 0.

    For A = [[0, w], [-w, -g]] and noise only on the momentum, the solution
    is isotropic: V = N22 / (2 g) * I.  Other noise shapes fall back to the
    generic solve.
    """
    N = system.N if noise is None else np.asarray(noise, dtype=float)
    if not system.gamma > 0 or not system.omega > 0:
        raise NotHurwitz(f"drift is not Hurwitz (omega={system.omega!r}, gamma={system.gamma!r})")
    if N[0, 0] == 0.0 and N[0, 1] == 0.0 and N[1, 0] == 0.0:
        s = N[1, 1] / (2.0 * system.gamma)
        return Cov2(s, 0.0, s)
    return Cov2.from_array(lyapunov_generic(system.A, N))


def conditional_steady_state(mode: ModeSpec, channel: "Channel | str") -> Cov2:
    """Steady conditional covariance of ``mode``, gamma_m units.

    Falls back to the Lyapunov equation with noise reduced by L L^T / M when
    the measurement carries no signal (lambda' = 0): with C = 0 the Riccati
    equation is linear and that is its exact fixed point.
    """
    coeffs = filter_coefficients(mode, channel)
    if coeffs.lambda_p > 0:
        return steady_state_analytic(coeffs, mode.Q)
    system = system_matrices(mode, channel)
    reduced = system.N - np.outer(system.L, system.L) / system.M
    return lyapunov_steady_state(system, reduced)
