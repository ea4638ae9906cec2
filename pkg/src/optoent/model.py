"""Physical parameters, per-mode dimensionless quantities and filter coefficients.

All rates and frequencies are angular (rad/s).  Use :func:`hz` to convert
laboratory values quoted in Hz.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import ConditionalInstability, DomainError, NonPositiveFrequency

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

TWO_PI = 2.0 * math.pi


def hz(f: float) -> float:
    """Angular frequency in rad/s for a frequency given in Hz."""
    return TWO_PI * f


class ModeLabel(str, enum.Enum):
    COMMON = "common"
    DIFFERENTIAL = "differential"
    SINGLE = "single"


class Channel(str, enum.Enum):
    """Homodyne measurement channel: amplitude (X) or phase (Y) quadrature."""

    X = "x"
    Y = "y"

    @classmethod
    def parse(cls, value: "str | Channel") -> "Channel":
        if isinstance(value, Channel):
            return value
        key = str(value).strip().lower()
        aliases = {"x": cls.X, "amplitude": cls.X, "amplitudex": cls.X,
                   "y": cls.Y, "phase": cls.Y, "phasey": cls.Y}
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown measurement channel {value!r}") from None


DAMPING_MODELS = ("structural", "velocity")


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory-frame inputs, SI units with angular rates.

    ``Gamma`` is the bare mechanical decay rate at ``Omega``; ``gamma_m`` the
    feedback-broadened one.  ``zeta`` is kappa_minus / kappa_plus and
    ``delta_minus`` the detuning normalized by kappa_minus.
    """

    m: float
    Omega: float
    Gamma: float
    T: float
    gamma_m: float
    kappa_minus: float
    zeta: float
    delta_minus: float
    g: float
    eta: float
    N_th: float = 0.0
    damping: str = "structural"
    # only needed by coupling_from_cavity
    ell: float | None = None
    omega_L: float | None = None
    P_in: float | None = None
    abar: float | None = None

    def __post_init__(self):
        for name in ("m", "Omega", "Gamma", "T", "gamma_m", "kappa_minus"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not (self.zeta >= 1 and math.isfinite(self.zeta)):
            raise DomainError(f"zeta must be >= 1, got {self.zeta!r}")
        if not (0.0 <= self.eta <= 1.0):
            raise DomainError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not self.N_th >= 0:
            raise DomainError(f"N_th must be >= 0, got {self.N_th!r}")
        if not (self.delta_minus >= 0 and math.isfinite(self.delta_minus)):
            raise DomainError(
                f"delta_minus must be >= 0 (anti-spring detuning is not supported), "
                f"got {self.delta_minus!r}")
        if not (self.g >= 0 and math.isfinite(self.g)):
            raise DomainError(f"g must be >= 0, got {self.g!r}")
        if self.damping not in DAMPING_MODELS:
            raise DomainError(f"damping must be one of {DAMPING_MODELS}, got {self.damping!r}")

    @property
    def kappa_plus(self) -> float:
        return self.kappa_minus / self.zeta

    @property
    def Delta(self) -> float:
        return self.delta_minus * self.kappa_minus

    def replace(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)


def table_one(**overrides) -> PhysicalParams:
    """Experimental reference point: 7.71 mg suspended mirrors, finesse ~1.8e3."""
    params = dict(
        m=7.71e-6,
        Omega=hz(2.2),
        Gamma=hz(1e-6),
        T=300.0,
        gamma_m=hz(6.9e-3),
        kappa_minus=hz(1.64e6),
        zeta=3.0,
        delta_minus=0.2,
        g=hz(2.68e5),
        eta=0.92,
        N_th=0.0,
        ell=0.1,
        omega_L=hz(300e12),
        P_in=30e-3,
        abar=1.27e5,
    )
    params.update(overrides)
    return PhysicalParams(**params)


@dataclass(frozen=True)
class ModeSpec:
    """Dimensionless description of one mechanical mode."""

    label: ModeLabel
    Q: float
    C: float
    n_th: float
    delta: float
    eta: float
    N_th: float
    omega_m: float
    gamma_m: float
    kappa: float = field(default=float("nan"))
    g_m: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.Q > 0:
            raise DomainError(f"Q must be > 0, got {self.Q!r}")
        if not self.C > 0:
            raise DomainError(f"C must be > 0, got {self.C!r}")
        if not self.n_th >= 0:
            raise DomainError(f"n_th must be >= 0, got {self.n_th!r}")
        if not self.delta >= 0:
            raise DomainError(f"delta must be >= 0, got {self.delta!r}")
        if not (0.0 <= self.eta <= 1.0):
            raise DomainError(f"eta must lie in [0, 1], got {self.eta!r}")
        if self.delta > 0 and not self.Q * (1 + 4 * self.delta ** 2) > 4 * self.C * self.delta:
            raise NonPositiveFrequency(
                "Q(1+4 delta^2) <= 4 C delta: bare mechanical frequency would be imaginary")

    @property
    def quantum_cooperativity(self) -> float:
        return self.C / self.n_th if self.n_th > 0 else math.inf


def effective_frequency(Omega: float, g: float, kappa: float, Delta: float) -> float:
    """Mechanical frequency stiffened by the optical spring, rad/s."""
    if not (Omega > 0 and kappa > 0):
        raise DomainError("Omega and kappa must be > 0")
    radicand = Omega ** 2 + Omega * 16.0 * Delta * g ** 2 / (kappa ** 2 + 4.0 * Delta ** 2)
    if not radicand > 0:
        raise NonPositiveFrequency(f"omega_m^2 = {radicand!r} <= 0")
    return math.sqrt(radicand)


def thermal_occupation(params: PhysicalParams, omega_m: float) -> float:
    """Thermal phonon number of a mode at frequency ``omega_m``.

    Structural damping scales the loss as Gamma(Omega) * Omega / omega_m,
    which adds one more power of omega_m to the denominator.
    """
    base = K_B * params.T * params.Gamma / (HBAR * params.gamma_m * omega_m)
    if params.damping == "structural":
        return base * params.Omega / omega_m
    return base


def mode_quantities(params: PhysicalParams, label: "ModeLabel | str") -> ModeSpec:
    label = ModeLabel(label)
    kappa = params.kappa_plus if label is ModeLabel.COMMON else params.kappa_minus
    Delta = params.Delta
    omega_m = effective_frequency(params.Omega, params.g, kappa, Delta)
    g_m = params.g * math.sqrt(params.Omega / omega_m)
    return ModeSpec(
        label=label,
        Q=omega_m / params.gamma_m,
        C=4.0 * g_m ** 2 / (params.gamma_m * kappa),
        n_th=thermal_occupation(params, omega_m),
        delta=Delta / kappa,
        eta=params.eta,
        N_th=params.N_th,
        omega_m=omega_m,
        gamma_m=params.gamma_m,
        kappa=kappa,
        g_m=g_m,
    )


def both_modes(params: PhysicalParams) -> tuple[ModeSpec, ModeSpec]:
    """(common, differential) mode specs."""
    return (mode_quantities(params, ModeLabel.COMMON),
            mode_quantities(params, ModeLabel.DIFFERENTIAL))


def common_from_differential(minus: ModeSpec, zeta: float) -> tuple[float, float]:
    """Closed-form (Q_plus, C_plus) from the differential mode and zeta."""
    d = minus.delta
    s = math.sqrt(1.0 + 4.0 * minus.C * d * (zeta ** 2 - 1.0)
                  / (minus.Q * (1.0 + 4.0 * d ** 2) * (1.0 + 4.0 * zeta ** 2 * d ** 2)))
    return minus.Q * s, zeta * minus.C / s


def zeta_from_reflectivity(R: float) -> float:
    """Decay-rate ratio produced by a power-recycling mirror of reflectivity R."""
    if not (0.0 <= R < 1.0):
        raise DomainError(f"power reflectivity must lie in [0, 1), got {R!r}")
    r = math.sqrt(R)
    return (1.0 + r) / (1.0 - r)


def reflectivity_from_zeta(zeta: float) -> float:
    if not zeta >= 1:
        raise DomainError(f"zeta must be >= 1, got {zeta!r}")
    return ((zeta - 1.0) / (zeta + 1.0)) ** 2


def coupling_from_cavity(ell: float, omega_L: float, m: float, Omega: float,
                         abar: float) -> float:
    """Linearized optomechanical coupling g (rad/s), taking omega_c ~ omega_L."""
    for name, value in (("ell", ell), ("omega_L", omega_L), ("m", m), ("Omega", Omega)):
        if not value > 0:
            raise DomainError(f"{name} must be > 0, got {value!r}")
    if abar < 0:
        raise DomainError(f"abar must be >= 0, got {abar!r}")
    return abar * (omega_L / ell) * math.sqrt(HBAR / (2.0 * m * Omega))


@dataclass(frozen=True)
class FilterCoefficients:
    """Measurement/noise coefficients in units of gamma_m."""

    lambda_p: float
    Lambda_p: float
    nbar_p: float
    gamma_p: float
    channel: Channel = Channel.X


def filter_coefficients(mode: ModeSpec, channel: "Channel | str") -> FilterCoefficients:
    channel = Channel.parse(channel)
    C, d, eta, N = mode.C, mode.delta, mode.eta, mode.N_th
    M = 2.0 * eta * N + 1.0
    lorentz2 = (1.0 + 4.0 * d * d) ** 2
    if channel is Channel.X:
        lam = 16.0 * C * d * d * eta / (M * lorentz2)
        Lam = -8.0 * C * d * eta * (2.0 * N + 1.0) / (lorentz2 * M)
    else:
        lam = 4.0 * C * eta / (M * lorentz2)
        Lam = 8.0 * C * d * eta * (2.0 * N + 1.0) / (lorentz2 * M)
    nbar = 4.0 * mode.n_th + 2.0 + 4.0 * C * (2.0 * N + 1.0) / (1.0 + 4.0 * d * d)
    return FilterCoefficients(lam, Lam, nbar, conditional_decay(lam, Lam, nbar, mode.Q), channel)


def conditional_decay(lam: float, Lam: float, nbar: float, Q: float) -> float:
    """gamma_I / gamma_m.

    Evaluated as 1 + 2(nbar*lam - Lam^2) / (1 + a + sqrt(1 + 2a + b)) with
    a = Lam/Q, b = nbar*lam/Q^2, which is algebraically identical to the
    nested-root form but does not cancel catastrophically at large Q.
    """
    a = Lam / Q
    b = nbar * lam / Q ** 2
    inner = 1.0 + 2.0 * a + b
    if inner < 0:
        raise ConditionalInstability(f"inner radicand {inner!r} < 0")
    denom = 1.0 + a + math.sqrt(inner)
    if not denom > 0:
        raise ConditionalInstability("steady-state filter does not exist (1 + Lambda/Q <= 0)")
    outer = 1.0 + 2.0 * (nbar * lam - Lam * Lam) / denom
    if outer < 0:
        raise ConditionalInstability(f"outer radicand {outer!r} < 0")
    return math.sqrt(outer)
