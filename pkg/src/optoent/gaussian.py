"""Two-mirror Gaussian state: beam-splitter assembly, entanglement, squeezing, purity.

Single-mode covariances enter vacuum-normalized in their own frequency frame
(ground state = identity).  Two-mode matrices are either ``"vacuum"``
normalized in a shared reference-frequency frame, or ``"dimensional"`` (SI,
basis Q1, P1, Q2, P2).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEllipse, NonPhysicalState
from .model import HBAR, FilterCoefficients
from .riccati import Cov2

PHYS_TOL = 1e-9

# half beam splitter, (Q+, P+, Q-, P-) -> (Q1, P1, Q2, P2); symmetric and involutory
BEAM_SPLITTER = np.array([
    [1.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0, 0.0],
    [0.0, 1.0, 0.0, -1.0],
]) / math.sqrt(2.0)


def _mat(V) -> np.ndarray:
    if isinstance(V, Cov2):
        return V.as_array()
    if isinstance(V, Cov4):
        return V.matrix
    return np.asarray(V, dtype=float)


@dataclass(frozen=True, eq=False)
class Cov4:
    matrix: np.ndarray
    normalization: str = "vacuum"  # or "dimensional"
    omega_ref: float | None = None

    def __post_init__(self):
        if self.normalization not in ("vacuum", "dimensional"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.matrix.shape != (4, 4):
            raise ValueError("Cov4 must be 4x4")

    def block(self, i: int, j: int) -> np.ndarray:
        return self.matrix[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    @property
    def unit(self) -> float:
        """Variance scale of the vacuum: hbar/2 in SI, 1 when normalized."""
        return HBAR / 2.0 if self.normalization == "dimensional" else 1.0


@dataclass(frozen=True)
class EntanglementReport:
    epsilon_cr: float
    E_N: float
    Sigma: float
    detV: float
    nu_tilde: float

    @property
    def entangled(self) -> bool:
        return self.epsilon_cr > 0


def dimensional_covariance(V, omega_m: float, m: float) -> np.ndarray:
    """SI covariance of (Q, P) from a vacuum-normalized single-mode covariance."""
    V = _mat(V)
    sq = math.sqrt(HBAR / (2.0 * m * omega_m))
    sp = math.sqrt(m * HBAR * omega_m / 2.0)
    S = np.diag([sq, sp])
    return S @ V @ S


def reframe(V, omega_m: float, omega_ref: float) -> np.ndarray:
    """Re-express a vacuum-normalized covariance in the frame of ``omega_ref``."""
    r = math.sqrt(omega_ref / omega_m)
    S = np.diag([r, 1.0 / r])
    return S @ _mat(V) @ S


def combine_modes(V_plus, V_minus, omega_plus: float, omega_minus: float,
                  m: float | None = None, omega_ref: float | None = None) -> Cov4:
    """Individual-mirror covariance from common (+) and differential (-) modes.

    With ``m`` the result is dimensional; otherwise vacuum-normalized in the
    frame of ``omega_ref`` (default: mean of the two mode frequencies).
    """
    if m is not None:
        Vp = dimensional_covariance(V_plus, omega_plus, m)
        Vm = dimensional_covariance(V_minus, omega_minus, m)
        tag, ref = "dimensional", None
    else:
        ref = 0.5 * (omega_plus + omega_minus) if omega_ref is None else omega_ref
        Vp = reframe(V_plus, omega_plus, ref)
        Vm = reframe(V_minus, omega_minus, ref)
        tag = "vacuum"
    block = np.zeros((4, 4))
    block[:2, :2] = Vp
    block[2:, 2:] = Vm
    full = BEAM_SPLITTER @ block @ BEAM_SPLITTER
    return Cov4(0.5 * (full + full.T), tag, ref)


_PT = np.diag([1.0, 1.0, 1.0, -1.0])


def _balanced(V: np.ndarray) -> np.ndarray:
    """Local symplectic map bringing each mode's diagonal block to sqrt(det) * I.

    Per mode S = det(A)^(1/4) A^(-1/2), which is symplectic and leaves the
    symplectic spectrum unchanged while removing local squeezing from the
    conditioning of the matrix square root below.
    """
    n = V.shape[0] // 2
    S = np.zeros_like(V)
    for k in range(n):
        sl = slice(2 * k, 2 * k + 2)
        d, U = np.linalg.eigh(V[sl, sl])
        if d.min() <= 0:
            raise NonPhysicalState("covariance is not positive definite")
        S[sl, sl] = (U * (np.sqrt(np.sqrt(d[0] * d[1]) / d))) @ U.T
    return S @ V @ S.T


def _symplectic_spectrum(V: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues (ascending) of a positive-definite covariance.

    Uses the Hermitian form i V^1/2 Omega V^1/2, whose eigenvalues are
    +-nu_k; unlike eig(i Omega V) this stays accurate when the spectrum is
    (nearly) degenerate, e.g. for pure states.
    """
    V = _balanced(V)
    n = V.shape[0] // 2
    d, U = np.linalg.eigh(0.5 * (V + V.T))
    if d.min() <= 0:
        raise NonPhysicalState("covariance is not positive definite")
    root = (U * np.sqrt(d)) @ U.T
    omega = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    ev = np.linalg.eigvalsh(1j * (root @ omega @ root))
    return np.sort(ev[n:])


def entanglement_from_matrix(cov: Cov4) -> EntanglementReport:
    """Logarithmic negativity of a two-mode Gaussian state.

    ``Sigma`` and ``detV`` are reported and used for the physicality check
    Sigma^2 >= 4 det V; the smallest partial-transpose symplectic eigenvalue
    itself, (Sigma - sqrt(Sigma^2 - 4 det V)) / 2 in closed form, is taken
    from a Hermitian eigenproblem because the closed form loses half the
    digits when the two partial-transpose eigenvalues coincide.
    """
    A, B, Cc = cov.block(0, 0), cov.block(1, 1), cov.block(0, 1)
    Sigma = float(np.linalg.det(A) + np.linalg.det(B) - 2.0 * np.linalg.det(Cc))
    detV = float(np.linalg.det(cov.matrix))
    disc = Sigma * Sigma - 4.0 * detV
    if disc < -PHYS_TOL * Sigma * Sigma:
        raise NonPhysicalState(f"Sigma^2 - 4 det V = {disc!r} < 0")
    if not Sigma > 0 or not detV > 0:
        raise NonPhysicalState(f"degenerate covariance (Sigma = {Sigma!r}, det V = {detV!r})")
    nu = float(_symplectic_spectrum(_PT @ (cov.matrix / cov.unit) @ _PT)[0])
    eps = -math.log2(nu)
    return EntanglementReport(eps, max(0.0, eps), Sigma, detV, nu)


def epsilon_cr_closed_form(plus: FilterCoefficients, minus: FilterCoefficients,
                           Q_plus: float, Q_minus: float) -> float:
    """Critical value of the log-negativity directly from dimensionless coefficients."""
    gp, gm = plus.gamma_p, minus.gamma_p
    lp, lm = plus.lambda_p, minus.lambda_p
    Lp, Lm = plus.Lambda_p, minus.Lambda_p
    Qp, Qm = Q_plus, Q_minus
    if not (lp > 0 and lm > 0):
        raise ValueError("closed form needs non-zero measurement rates on both modes")
    prefactor = (gp - 1.0) * (gm - 1.0) / (4.0 * lp * lm)
    wp = (Lp + Qp) / Qm
    wm = (Lm + Qm) / Qp
    bracket = (gp * gp + gm * gm - gp * gm - 1.0) / (Qp * Qm) + 2.0 * wp + 2.0 * wm
    inner = ((gp * gp + gm * gm - 1.0) * (gp - gm) ** 2 / (Qp * Qp * Qm * Qm)
             + 4.0 * (wp - wm) ** 2
             + 4.0 * gp * (gp - gm) * (Lp + Qp) / (Qp * Qm * Qm)
             + 4.0 * gm * (gm - gp) * (Lm + Qm) / (Qp * Qp * Qm))
    return -0.5 * math.log2(prefactor * (bracket - math.sqrt(inner)))


def squeeze_eigenvalues(V) -> tuple[float, float]:
    V = _mat(V)
    v11, v12, v22 = V[0, 0], V[0, 1], V[1, 1]
    half_trace = 0.5 * (v11 + v22)
    radius = 0.5 * math.hypot(v11 - v22, 2.0 * v12)
    return float(half_trace - radius), float(half_trace + radius)


def squeezing_angle(V) -> float:
    """Squeezing angle in [0, pi/2].

    For V12 >= 0 (always the case for the conditional steady states) rotating
    by -theta brings V to diag(E_min, E_max).  Isotropic input issues a
    :class:`DegenerateEllipse` warning and returns 0.
    """
    V = _mat(V)
    e_min, e_max = squeeze_eigenvalues(V)
    if e_max - e_min < 1e-12 * abs(e_max):
        warnings.warn("isotropic covariance: squeezing angle undefined, returning 0",
                      DegenerateEllipse, stacklevel=2)
        return 0.0
    diff = V[0, 0] - V[1, 1]
    off2 = 4.0 * V[0, 1] ** 2
    D = math.hypot(diff, 2.0 * V[0, 1])
    # the smaller of D +- diff is formed as a quotient to avoid cancellation
    if diff >= 0:
        big, small = D + diff, off2 / (D + diff)
        return math.atan2(math.sqrt(big), math.sqrt(small))
    big, small = D - diff, off2 / (D - diff)
    return math.atan2(math.sqrt(small), math.sqrt(big))


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def purity(V) -> float:
    """Gaussian purity 1/sqrt(det V) of a vacuum-normalized covariance (any mode count)."""
    if isinstance(V, Cov4):
        det = float(np.linalg.det(V.matrix)) / V.unit ** 4
    else:
        det = float(np.linalg.det(_mat(V)))
    if det < 1.0 - PHYS_TOL:
        raise NonPhysicalState(f"det V = {det!r} < 1")
    return 1.0 / math.sqrt(det)


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum of a vacuum-normalized covariance, ascending."""
    return _symplectic_spectrum(_mat(V))


@dataclass(frozen=True)
class WignerEllipse:
    semi_major: float
    semi_minor: float
    angle: float  # direction of the squeezed (minor) axis from the q axis, [0, pi)
    omega_ref: float | None = None

    def contour(self, n_points: int = 256) -> np.ndarray:
        """(n, 2) array of (q, p) points on the ellipse, uniform in parameter angle."""
        t = np.linspace(0.0, 2.0 * math.pi, n_points, endpoint=False)
        local = np.stack([self.semi_minor * np.cos(t), self.semi_major * np.sin(t)])
        return (rotation(self.angle) @ local).T


def wigner_ellipse(V, omega_m: float | None = None, omega_ref: float | None = None) -> WignerEllipse:
    """Level curve W = W_max / e, scaled so the vacuum is the unit circle.

    The curve is {r : r^T V^-1 r = 1}.  Pass both ``omega_m`` and
    ``omega_ref`` to view the mode in another frequency frame; otherwise the
    mode's own frame is used.
    """
    V = _mat(V)
    if np.linalg.det(V) < 1.0 - PHYS_TOL:
        raise NonPhysicalState("covariance violates the uncertainty bound")
    if omega_m is not None and omega_ref is not None:
        V = reframe(V, omega_m, omega_ref)
    evals, evecs = np.linalg.eigh(V)
    minor = evecs[:, 0]
    angle = math.atan2(minor[1], minor[0]) % math.pi
    if math.isclose(angle, math.pi):
        angle = 0.0
    return WignerEllipse(math.sqrt(evals[1]), math.sqrt(evals[0]), angle, omega_ref)
