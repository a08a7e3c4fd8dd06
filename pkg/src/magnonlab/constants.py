"""Physical constants, material parameters, and derived frequency scales.

Single source of truth for unit conventions:

* every frequency handled internally is *angular* (rad/s);
* ``hbar = 1`` for dynamics — Planck's constant only enters the
  dipolar frequency scales (``omega_d`` family) and thermal occupation
  (through ``k_B/hbar``);
* all I/O surfaces (CLI, CSV) use ordinary frequency in MHz/GHz and
  magnetic fields in mT. Conversion helpers live here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * np.pi

# CODATA SI values.
HBAR_SI = 1.054571817e-34        # J s
MU0_SI = 1.25663706212e-6        # T m / A
KB_SI = 1.380649e-23             # J / K


class DomainError(ValueError):
    """An argument is outside the physically meaningful domain."""


# ---------------------------------------------------------------------------
# unit conversions (exact to machine precision for representable values)
# ---------------------------------------------------------------------------

def mhz_to_rad(f_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/s."""
    return TWO_PI * 1e6 * np.asarray(f_mhz, dtype=float)


def rad_to_mhz(omega):
    """Angular frequency in rad/s -> ordinary frequency in MHz."""
    return np.asarray(omega, dtype=float) / (TWO_PI * 1e6)


def ghz_to_rad(f_ghz):
    return TWO_PI * 1e9 * np.asarray(f_ghz, dtype=float)


def rad_to_ghz(omega):
    return np.asarray(omega, dtype=float) / (TWO_PI * 1e9)


def mt_to_tesla(b_mt):
    return np.asarray(b_mt, dtype=float) * 1e-3


def tesla_to_mt(b_t):
    return np.asarray(b_t, dtype=float) * 1e3


def nm_to_m(x_nm):
    return np.asarray(x_nm, dtype=float) * 1e-9


def m_to_nm(x_m):
    return np.asarray(x_m, dtype=float) * 1e9


def um_to_m(x_um):
    return np.asarray(x_um, dtype=float) * 1e-6


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalConstants:
    """Spin-qubit and fundamental constants (angular-frequency units).

    gamma
        Absolute value of the electron gyromagnetic ratio, rad s^-1 T^-1
        (2*pi*28 MHz per mT).
    d_nv
        Spin-1 defect zero-field splitting, rad/s.
    boltzmann_over_hbar
        k_B/hbar in rad s^-1 K^-1, used for thermal occupations.
    """

    gamma: float = TWO_PI * 28.0e9
    d_nv: float = TWO_PI * 2.877e9
    boltzmann_over_hbar: float = KB_SI / HBAR_SI

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise DomainError("gamma must be positive (absolute-value convention)")
        if self.d_nv <= 0:
            raise DomainError("d_nv must be positive")


@dataclass(frozen=True)
class MaterialParams:
    """Ferromagnet material parameters.

    mu0_ms
        Saturation magnetization as mu0*M_s, tesla.
    d_ex
        Exchange stiffness, rad m^2 / s.
    alpha
        Dimensionless Gilbert damping.
    """

    mu0_ms: float
    d_ex: float
    alpha: float

    def __post_init__(self) -> None:
        if self.mu0_ms <= 0:
            raise DomainError("mu0_ms must be positive")
        if self.d_ex <= 0:
            raise DomainError("d_ex must be positive")
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError("alpha must satisfy 0 <= alpha < 1")

    def exchange_length_sq(self, constants: PhysicalConstants = PhysicalConstants()) -> float:
        """lambda_ex^2 = D_ex / (gamma * mu0_ms), m^2 (always positive)."""
        return self.d_ex / (constants.gamma * self.mu0_ms)


def yig(alpha: float = 1e-5,
        constants: PhysicalConstants = PhysicalConstants()) -> MaterialParams:
    """Default low-damping garnet parameters.

    The exchange stiffness is quoted in the composite unit
    ``gamma * mT * um^2`` = (2*pi*28e9 rad/s/T * 1e-3 T) * 1e-12 m^2
    = 2*pi*28e6 rad/s * 1e-12 m^2, so

        D_ex = 5.39e-2 * (2*pi*28e6 rad/s) * 1e-12 m^2
             = 9.4826e-6 rad m^2 / s.

    Misreading this conversion rescales every dispersion curve, hence the
    explicit spelled-out arithmetic.
    """
    d_ex = 5.39e-2 * (constants.gamma * 1e-3) * 1e-12
    return MaterialParams(mu0_ms=245.8e-3, d_ex=d_ex, alpha=alpha)


@dataclass(frozen=True)
class FrequencyScales:
    """Derived angular-frequency scales for a given geometry.

    omega_m    = gamma * mu0_ms                  (magnetization scale)
    omega_d    = mu0 * hbar * gamma^2 / d^3      (thin-direction dipolar scale)
    omega_dbar = mu0 * hbar * gamma^2 / (d*w*xi0)
    omega_dwl  = mu0 * hbar * gamma^2 / (d*w*l)
    """

    omega_m: float
    omega_d: float
    omega_dbar: Optional[float] = None
    omega_dwl: Optional[float] = None


def frequency_scales(material: MaterialParams,
                     d: float,
                     w: float,
                     l: Optional[float] = None,
                     xi0: Optional[float] = None,
                     constants: PhysicalConstants = PhysicalConstants()) -> FrequencyScales:
    """Compute the derived frequency scales in rad/s from SI inputs.

    ``l`` is required for omega_dwl; ``xi0`` for omega_dbar.
    """
    if d <= 0 or w <= 0:
        raise DomainError("dimensions must be positive")
    if l is not None and l <= 0:
        raise DomainError("length must be positive")
    if xi0 is not None and xi0 <= 0:
        raise DomainError("correlation length must be positive")
    mu0_hbar_gamma2 = MU0_SI * HBAR_SI * constants.gamma**2
    omega_m = constants.gamma * material.mu0_ms
    omega_d = mu0_hbar_gamma2 / d**3
    omega_dbar = mu0_hbar_gamma2 / (d * w * xi0) if xi0 is not None else None
    omega_dwl = mu0_hbar_gamma2 / (d * w * l) if l is not None else None
    return FrequencyScales(omega_m=omega_m, omega_d=omega_d,
                           omega_dbar=omega_dbar, omega_dwl=omega_dwl)


def nv_transition_frequencies(h_ext: float,
                              constants: PhysicalConstants = PhysicalConstants()):
    """Lower/upper spin-1 transition frequencies at field mu0*H = h_ext tesla.

    lower = d_nv - gamma*h_ext (|0> <-> |-1>), upper = d_nv + gamma*h_ext.
    Raises if the Zeeman shift reaches the level crossing.
    """
    zeeman = constants.gamma * h_ext
    if zeeman >= constants.d_nv:
        raise DomainError("field beyond the level-crossing regime")
    if h_ext < 0:
        raise DomainError("h_ext must be non-negative")
    return constants.d_nv - zeeman, constants.d_nv + zeeman


def thermal_occupation(omega: float, temperature: float,
                       constants: PhysicalConstants = PhysicalConstants()) -> float:
    """Bose-Einstein occupation n = 1/(exp(hbar*omega/kB*T) - 1); 0 at T=0."""
    if temperature < 0:
        raise DomainError("temperature must be non-negative")
    if omega <= 0:
        raise DomainError("omega must be positive")
    if temperature == 0.0:
        return 0.0
    x = omega / (constants.boltzmann_over_hbar * temperature)
    return 1.0 / np.expm1(x)


__all__ = [
    "TWO_PI", "HBAR_SI", "MU0_SI", "KB_SI", "DomainError",
    "PhysicalConstants", "MaterialParams", "FrequencyScales",
    "yig", "frequency_scales", "nv_transition_frequencies",
    "thermal_occupation",
    "mhz_to_rad", "rad_to_mhz", "ghz_to_rad", "rad_to_ghz",
    "mt_to_tesla", "tesla_to_mt", "nm_to_m", "m_to_nm", "um_to_m",
]
