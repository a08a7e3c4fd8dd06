"""Infinitely long rectangular waveguide physics.

Lowest transverse band: dispersion from boundary-integral matrix elements,
spin-qubit/magnon coupling g(rho, k), field calibration, virtual-magnon
effective qubit-qubit coupling (numeric and analytic), validity and
cooperativity diagnostics.

Conventions: the magnet occupies x in [0, d] (thickness), y in [0, w]
(width), infinite along z; the static field and magnetization point along z.
All frequencies angular (rad/s), lengths in meters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from .constants import (DomainError, MaterialParams, PhysicalConstants,
                        frequency_scales, nv_transition_frequencies)
from .numerics import bessel_k0, bessel_k1, gauss_panel_nodes, graded_edges
from .paraunitary import InstabilityError

__all__ = [
    "WaveguideModel", "DispersionCurve", "WaveguideCouplingProfile",
    "matrix_elements_00", "dispersion", "find_field_for_detuning",
    "coupling_g", "coupling_profile", "effective_coupling", "analytic_geff",
    "perturbation_validity", "equivalent_cooperativity", "er_gdr",
    "default_k_grid",
]

K_FLOOR = 1.0  # rad/m; kernel degenerates at k = 0, integrand negligible there


@dataclass(frozen=True)
class WaveguideModel:
    d: float
    w: float
    material: MaterialParams
    h_ext: float
    constants: PhysicalConstants = PhysicalConstants()
    quad_level: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.d <= self.w:
            raise DomainError("geometry requires 0 < d <= w")
        if self.h_ext < 0:
            raise DomainError("h_ext must be non-negative")
        if self.quad_level < 1:
            raise DomainError("quad_level >= 1")


@dataclass(frozen=True)
class DispersionCurve:
    k: np.ndarray            # rad/m
    omega: np.ndarray        # rad/s
    a_k: np.ndarray          # rad/s
    b_k: np.ndarray          # rad/s
    lam: np.ndarray          # Bogoliubov cosh factor
    mu: np.ndarray           # Bogoliubov sinh factor (real for this geometry)
    omega_min: float
    k_min: float


@dataclass(frozen=True)
class WaveguideCouplingProfile:
    rho: Tuple[float, float]
    k: np.ndarray
    g_of_k: np.ndarray       # complex, dimensionless
    prefactor: float         # rad/s, sqrt(omega_m * omega_d / (w/d^2))


# ---------------------------------------------------------------------------
# matrix elements of the lowest transverse mode
# ---------------------------------------------------------------------------

def _edge_pair_integral(length: float, offset: float, kabs: np.ndarray,
                        level: int) -> np.ndarray:
    """I(offset) = (1/pi) * Int_0^length (length-u) K0(|k| sqrt(offset^2+u^2)) du

    for every |k| in ``kabs`` (vectorized). For offset = 0 the integrand has
    a log singularity at u = 0, absorbed by the geometric grading.
    """
    n_geo = 14 + 4 * level
    edges = graded_edges(0.0, length, singular_at=0.0,
                         min_frac=1e-9, n_geometric=n_geo,
                         max_len=length / (8.0 * level))
    u, wts = gauss_panel_nodes(edges, order=8 + 2 * level)
    r = np.sqrt(offset * offset + u * u)
    vals = bessel_k0(np.multiply.outer(kabs, r))       # (nk, nu)
    return (vals * ((length - u) * wts)[None, :]).sum(axis=1) / np.pi


def _h_elements(d: float, w: float, k, level: int = 1):
    """Dimensionless (H00, H01) of the lowest transverse mode, vectorized in k.

    The transverse-derivative terms reduce the cross-section double integral
    to edge-pair integrals; the mixed (XY/YX) elements vanish identically by
    the mirror symmetries of the uniform transverse profile, so H00 and H01
    are real: H00 = (HXX + HYY)/2, H01 = (HXX - HYY)/2.
    """
    kabs = np.maximum(np.abs(np.atleast_1d(np.asarray(k, dtype=float))), K_FLOOR)
    ix0 = _edge_pair_integral(w, 0.0, kabs, level)
    ixd = _edge_pair_integral(w, d, kabs, level)
    iy0 = _edge_pair_integral(d, 0.0, kabs, level)
    iyw = _edge_pair_integral(d, w, kabs, level)
    hxx = (2.0 / (d * w)) * (ix0 - ixd)
    hyy = (2.0 / (d * w)) * (iy0 - iyw)
    return 0.5 * (hxx + hyy), 0.5 * (hxx - hyy)


def matrix_elements_00(model: WaveguideModel, k):
    """(a_k, b_k) in rad/s for the lowest transverse band.

    a_k = omega_H + D_ex k^2 + omega_M H00,  b_k = omega_M H01.
    """
    scales = frequency_scales(model.material, model.d, model.w,
                              constants=model.constants)
    omega_h = model.constants.gamma * model.h_ext
    karr = np.atleast_1d(np.asarray(k, dtype=float))
    h00, h01 = _h_elements(model.d, model.w, karr, model.quad_level)
    a = omega_h + model.material.d_ex * karr**2 + scales.omega_m * h00
    b = scales.omega_m * h01
    if np.isscalar(k) or np.ndim(k) == 0:
        return float(a[0]), float(b[0])
    return a, b


def dispersion(model: WaveguideModel, k_grid: Optional[np.ndarray] = None) -> DispersionCurve:
    """Band omega(k) with Bogoliubov factors and refined minimum."""
    if k_grid is None:
        k_grid = default_k_grid(model)
    k_grid = np.asarray(k_grid, dtype=float)
    a, b = matrix_elements_00(model, k_grid)
    if np.any(a <= np.abs(b)):
        bad = k_grid[np.argmax(a <= np.abs(b))]
        raise InstabilityError(f"unstable mode at k = {bad:.4e} rad/m")
    omega = np.sqrt((a - np.abs(b)) * (a + np.abs(b)))
    lam = np.sqrt((a + omega) / (2.0 * omega))
    mu = np.sign(b) * np.sqrt(np.maximum(a - omega, 0.0) / (2.0 * omega))

    pos = k_grid > 0
    kp, wp = k_grid[pos], omega[pos]
    i = int(np.argmin(wp))
    if 0 < i < len(kp) - 1:
        # 3-point parabolic refinement
        x0, x1, x2 = kp[i - 1], kp[i], kp[i + 1]
        y0, y1, y2 = wp[i - 1], wp[i], wp[i + 1]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        a2 = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        b1 = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
        if a2 > 0:
            k_min = -b1 / (2 * a2)
            am, bm = matrix_elements_00(model, float(k_min))
            omega_min = float(np.sqrt(am**2 - bm**2))
        else:
            k_min, omega_min = float(kp[i]), float(wp[i])
    else:
        k_min, omega_min = float(kp[i]), float(wp[i])
    return DispersionCurve(k=k_grid, omega=omega, a_k=a, b_k=b, lam=lam, mu=mu,
                           omega_min=omega_min, k_min=k_min)


def default_k_grid(model: WaveguideModel, n: int = 400,
                   k_max: Optional[float] = None) -> np.ndarray:
    """Symmetric log-spaced search grid (used for locating the band minimum)."""
    if k_max is None:
        k_max = 40.0 / model.d
    half = np.geomspace(1e3, k_max, n // 2)
    return np.concatenate([-half[::-1], half])


def find_field_for_detuning(model: WaveguideModel, delta_omega_target: float,
                            h_lo: float = 1e-4, h_hi: float = 0.1,
                            tol: float = 2.0 * np.pi * 1e3) -> float:
    """Field h_c (tesla) where omega_min(H) - omega_nv(H) equals the target.

    omega_nv falls and omega_min rises with H, so the residual is monotone;
    solved by bisection to |residual| < tol.
    """
    search = default_k_grid(model, n=240)

    def residual(h: float) -> float:
        m = replace(model, h_ext=h)
        curve = dispersion(m, search)
        omega_nv, _ = nv_transition_frequencies(h, model.constants)
        return curve.omega_min - omega_nv - delta_omega_target

    r_lo, r_hi = residual(h_lo), residual(h_hi)
    if r_lo * r_hi > 0:
        raise DomainError("no bracketing interval for the target detuning")
    lo, hi = h_lo, h_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(r) < tol:
            return mid
        if r * r_lo < 0:
            hi = mid
        else:
            lo, r_lo = mid, r
    raise DomainError("field bisection did not converge")


# ---------------------------------------------------------------------------
# qubit-magnon coupling
# ---------------------------------------------------------------------------

def _edge_mesh(length: float, near: float, level: int):
    """Composite mesh on [0, length], graded toward ``near`` (clipped)."""
    t = float(np.clip(near, 0.0, length))
    pieces = []
    if t > 1e-15 * length:
        e = graded_edges(0.0, t, singular_at=t, min_frac=1e-6,
                         n_geometric=10 + 3 * level, max_len=t)
        pieces.append(e)
    if t < length * (1 - 1e-15):
        e = graded_edges(t, length, singular_at=t, min_frac=1e-6,
                         n_geometric=10 + 3 * level, max_len=length)
        pieces.append(e[1:] if pieces else e)
    edges = np.concatenate(pieces)
    return gauss_panel_nodes(edges, order=8 + 2 * level)


def _gamma_combos(model: WaveguideModel, rho, kabs: np.ndarray):
    """Dimensionless dipolar edge integrals for the uniform transverse mode.

    Returns (gpp, gpm, gmp, gmm) = (Gamma^{+,+}, Gamma^{+,-},
    Gamma^{-,+}, Gamma^{-,-}) arrays over kabs; all real here because the
    mixed elements combine with real transverse profiles.
    """
    x, y = rho
    d, w, level = model.d, model.w, model.quad_level

    # x-face integrals (x' = 0 and x' = d), integration over y' in [0, w]
    yq, ywt = _edge_mesh(w, y, level)
    def xface(x0):
        dx = x - x0
        dy = y - yq
        r = np.hypot(dx, dy)
        k1 = bessel_k1(np.multiply.outer(kabs, r))
        fx = (k1 * ((dx / r) * ywt)[None, :]).sum(axis=1)
        fy = (k1 * ((dy / r) * ywt)[None, :]).sum(axis=1)
        return fx, fy

    fx0, fy0 = xface(0.0)
    fxd, fyd = xface(d)
    gxx = -(kabs / (2 * np.pi)) * (fx0 - fxd)
    gyx = -(kabs / (2 * np.pi)) * (fy0 - fyd)

    # y-face integrals (y' = 0 and y' = w), integration over x' in [0, d]
    xq, xwt = _edge_mesh(d, x, level)
    def yface(y0):
        dy = y - y0
        dx = x - xq
        r = np.hypot(dx, dy)
        k1 = bessel_k1(np.multiply.outer(kabs, r))
        fx = (k1 * ((dx / r) * xwt)[None, :]).sum(axis=1)
        fy = (k1 * ((dy / r) * xwt)[None, :]).sum(axis=1)
        return fx, fy

    gx0, gy0 = yface(0.0)
    gxw, gyw = yface(w)
    gxy = -(kabs / (2 * np.pi)) * (gx0 - gxw)
    gyy = -(kabs / (2 * np.pi)) * (gy0 - gyw)

    gpp = gxx - gyy + 1j * (gxy + gyx)
    gpm = gxx + gyy - 1j * (gxy - gyx)
    gmp = gxx + gyy + 1j * (gxy - gyx)
    gmm = gxx - gyy - 1j * (gxy + gyx)
    return gpp, gpm, gmp, gmm


def _inside(model: WaveguideModel, rho) -> bool:
    x, y = rho
    return (0.0 <= x <= model.d) and (0.0 <= y <= model.w)


def coupling_profile(model: WaveguideModel, rho, k,
                     curve: Optional[DispersionCurve] = None) -> WaveguideCouplingProfile:
    """Dimensionless g(rho, k) on a k array, with the dimensional prefactor."""
    if _inside(model, rho):
        raise DomainError("qubit position must lie outside the magnet")
    karr = np.atleast_1d(np.asarray(k, dtype=float))
    kabs = np.maximum(np.abs(karr), K_FLOOR)
    if curve is None or curve.k.shape != karr.shape or not np.allclose(curve.k, karr):
        a, b = matrix_elements_00(model, karr)
        a = np.atleast_1d(a)
        b = np.atleast_1d(b)
        omega = np.sqrt((a - np.abs(b)) * (a + np.abs(b)))
        lam = np.sqrt((a + omega) / (2 * omega))
        mu = np.sign(b) * np.sqrt(np.maximum(a - omega, 0.0) / (2 * omega))
    else:
        lam, mu = curve.lam, curve.mu
    gpp, gpm, _, _ = _gamma_combos(model, rho, kabs)
    g = 0.5 * gpp * lam - 0.5 * gpm * np.conj(mu)
    scales = frequency_scales(model.material, model.d, model.w,
                              constants=model.constants)
    prefactor = float(np.sqrt(scales.omega_m * scales.omega_d
                              / (model.w / model.d**2)))
    return WaveguideCouplingProfile(rho=tuple(rho), k=karr, g_of_k=g,
                                    prefactor=prefactor)


def coupling_g(model: WaveguideModel, rho, k) -> complex:
    """Dimensionless coupling at a single wavenumber."""
    prof = coupling_profile(model, rho, np.atleast_1d(float(k)))
    return complex(prof.g_of_k[0])


# ---------------------------------------------------------------------------
# effective qubit-qubit coupling
# ---------------------------------------------------------------------------

def _geff_k_grid(model: WaveguideModel, curve: DispersionCurve,
                 delta_omega: float, delta_z: float) -> np.ndarray:
    xi0 = np.sqrt(model.material.d_ex / delta_omega)
    k_lor = 1.0 / xi0
    k_max = 3.0 * curve.k_min + 20.0 * k_lor
    dk_lor = k_lor / 20.0
    dk_osc = (2 * np.pi / delta_z) / 20.0 if delta_z > 0 else np.inf
    dk = min(dk_lor, dk_osc)
    n = int(np.ceil(k_max / dk))
    n = min(max(n, 800), 40000)
    return np.linspace(K_FLOOR, k_max, n)


def _geff_integrals(model: WaveguideModel, rho, delta_z: float,
                    curve_min: DispersionCurve, g_scale: float = 1.0):
    """Common k-integrals for the effective coupling and its validity check.

    Returns (geff, validity) where geff already carries the dimensional
    prefactor omega_m*omega_d*d^2/w. ``g_scale`` rescales the dimensionless
    coupling (used by scaling property tests).
    """
    omega_nv, _ = nv_transition_frequencies(model.h_ext, model.constants)
    delta_omega = curve_min.omega_min - omega_nv
    if delta_omega <= 0:
        raise DomainError("requires positive detuning omega_min - omega_nv")
    kq = _geff_k_grid(model, curve_min, delta_omega, abs(delta_z))
    a, b = matrix_elements_00(model, kq)
    omega = np.sqrt((a - np.abs(b)) * (a + np.abs(b)))
    prof = coupling_profile(model, rho, kq)
    g2 = np.abs(prof.g_of_k * g_scale) ** 2
    denom = omega - omega_nv
    scales = frequency_scales(model.material, model.d, model.w,
                              constants=model.constants)
    pref = scales.omega_m * scales.omega_d * model.d**2 / model.w
    # even integrand in k: Int dk/2pi e^{ik dz} ... = (1/pi) Int_0^inf cos(k dz)
    integ1 = np.trapezoid(g2 * np.cos(kq * delta_z) / denom, kq) / np.pi
    integ2 = np.trapezoid(g2 / denom**2, kq) / np.pi
    return pref * integ1, pref * integ2


def effective_coupling(model: WaveguideModel, rho, delta_z: float,
                       curve: Optional[DispersionCurve] = None,
                       validity_warn: float = 0.05) -> float:
    """Virtual-magnon-mediated qubit-qubit coupling g_eff (rad/s) between two
    qubits at the same transverse position rho, separated by delta_z."""
    if curve is None:
        curve = dispersion(model)
    geff, validity = _geff_integrals(model, rho, delta_z, curve)
    if validity > validity_warn:
        warnings.warn(f"perturbative validity marginal: {validity:.3e}",
                      stacklevel=2)
    return float(geff)


def perturbation_validity(model: WaveguideModel, rho,
                          curve: Optional[DispersionCurve] = None) -> float:
    """||first-order magnon dressing||^2; must be << 1 for the effective
    coupling to be trustworthy."""
    if curve is None:
        curve = dispersion(model)
    _, validity = _geff_integrals(model, rho, 0.0, curve)
    return float(validity)


def analytic_geff(g_kmin: complex, k_min: float, delta_z: float,
                  delta_omega: float, model: WaveguideModel) -> float:
    """Saddle-point closed form:

    g_eff = (omega_m * omega_dbar / delta_omega) |g(k_min)|^2
            * cos(k_min dz) * exp(-dz/xi0),  xi0 = sqrt(D_ex/delta_omega).

    (The decaying exponential is the physical branch of the Lorentzian
    k-integral; see the repository notes for the sign discussion.)
    """
    xi0 = np.sqrt(model.material.d_ex / delta_omega)
    scales = frequency_scales(model.material, model.d, model.w, xi0=xi0,
                              constants=model.constants)
    return float((scales.omega_m * scales.omega_dbar / delta_omega)
                 * abs(g_kmin) ** 2 * np.cos(k_min * delta_z)
                 * np.exp(-abs(delta_z) / xi0))


def equivalent_cooperativity(model: WaveguideModel, rho, l: float,
                             alpha: float, t2_star: float,
                             curve: Optional[DispersionCurve] = None):
    """(g_bar, c_eq): the coupling of an equivalent finite segment of length l
    and its cooperativity g_bar^2 / (alpha*omega_min/T2*)."""
    if curve is None:
        curve = dispersion(model)
    g_kmin = coupling_g(model, rho, curve.k_min)
    scales = frequency_scales(model.material, model.d, model.w,
                              constants=model.constants)
    g_bar = np.sqrt(scales.omega_m * scales.omega_d
                    / (l * model.w / model.d**2)) * abs(g_kmin)
    c_eq = g_bar**2 / (alpha * curve.omega_min / t2_star)
    return float(g_bar), float(c_eq)


def er_gdr(g_eff: float, t2_star: float):
    """Entangling gate rate ER = 4|g_eff|/pi (the inverse of the
    sqrt(iSWAP) gate time) and gate-to-decoherence ratio GDR = ER * T2*."""
    er = 4.0 * abs(g_eff) / np.pi
    return er, er * t2_star
