"""Finite-length rectangular bar physics.

Standing-wave magnon modes of a bar magnetized along its long axis:
demagnetizing field, truncated quadratic Hamiltonian of the lowest
transverse band, paraunitary spectrum, spin-qubit coupling maps for both
qubit transitions, resonance-field calibration, dispersive qubit-qubit
coupling, cooperativity, and thermal decoherence estimates.

Geometry: the magnet occupies x in [0, d], y in [0, w], z in [0, l]; the
static field and magnetization are along z. The longitudinal basis is
f_p(z) = N_p cos(kappa_p z), kappa_p = p*pi/l, N_p = sqrt(2/((1+delta_p0) l)).
All frequencies angular (rad/s), lengths in meters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .constants import (DomainError, MaterialParams, PhysicalConstants,
                        frequency_scales, nv_transition_frequencies,
                        thermal_occupation)
from .numerics import gauss_panel_nodes, graded_edges
from .paraunitary import (ParaunitaryDecomposition, QuadraticBosonForm,
                          colpa_diagonalize)

__all__ = [
    "BarModel", "BarSpectrum", "BarCouplingSet", "DecoherenceEstimates",
    "demag_field_z", "assemble_bar_hamiltonian", "bar_spectrum",
    "find_resonant_field", "bar_coupling", "cooperativity", "bar_geff",
    "dephasing_higher_order", "dephasing_stark", "t1_decay_rates",
    "clear_geometry_cache",
]


@dataclass(frozen=True)
class BarModel:
    d: float
    w: float
    l: float
    material: MaterialParams
    h_ext: float
    n_trunc: int = 40
    constants: PhysicalConstants = PhysicalConstants()
    quad_level: int = 1

    def __post_init__(self) -> None:
        if not (0 < self.d <= self.w < self.l):
            raise DomainError("geometry requires 0 < d <= w < l")
        if self.l < 5.0 * max(self.d, self.w):
            warnings.warn("bar is not slender (l < 5 max(d, w)); the "
                          "lowest-transverse-band truncation degrades",
                          stacklevel=3)
        if self.n_trunc < 10:
            raise DomainError("n_trunc >= 10 required")
        if self.h_ext < 0:
            raise DomainError("h_ext must be non-negative")

    def kappa(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) * np.pi / self.l

    def mode_amplitude(self, p) -> np.ndarray:
        """c_p = sqrt(l) * N_p = sqrt(2/(1+delta_p0)): dimensionless
        amplitude of the normalized longitudinal profile."""
        p = np.asarray(p)
        return np.sqrt(2.0 / (1.0 + (p == 0)))


@dataclass(frozen=True)
class BarSpectrum:
    frequencies: np.ndarray        # rad/s, indexed by dominant mode label p
    decomposition: ParaunitaryDecomposition
    field: float                   # tesla

    def omega_of(self, p: int) -> float:
        return float(self.frequencies[p])


@dataclass(frozen=True)
class BarCouplingSet:
    position: Tuple[float, float, float]
    g_lower: np.ndarray            # complex rad/s, per mode label p
    g_upper: np.ndarray            # complex rad/s, per mode label p
    static_demag_shift: float      # rad/s: gamma*mu0*Ms*Hdz~ at the position


@dataclass(frozen=True)
class DecoherenceEstimates:
    tau2_gaussian: float
    t2_lorentzian: float
    t1_rates: Tuple[float, float]
    temperature: float


# ---------------------------------------------------------------------------
# demagnetizing field of the uniformly magnetized prism
# ---------------------------------------------------------------------------

def _corner_sum(x, y, zeta, d: float, w: float):
    """S(zeta) = sum_{ij} (-1)^{i+j} atan[(x-X_i)(y-Y_j)/(zeta R_ij)]
    with X in {0, d}, Y in {0, w}; broadcasts over array inputs."""
    total = 0.0
    for i, xi in enumerate((0.0, d)):
        for j, yj in enumerate((0.0, w)):
            dx = x - xi
            dy = y - yj
            r = np.sqrt(dx * dx + dy * dy + zeta * zeta)
            with np.errstate(divide="ignore", invalid="ignore"):
                arg = (dx * dy) / (zeta * r)
                term = np.arctan(arg)
            term = np.where(zeta * r == 0.0,
                            np.sign(dx * dy) * (np.pi / 2.0), term)
            total = total + (-1.0) ** (i + j) * term
    return total


def demag_field_z(model: BarModel, r) -> float:
    """z-component of the demagnetizing field of the uniformly z-magnetized
    bar, normalized by the saturation magnetization (dimensionless,
    -1/3 at the center of a cube). Valid inside and outside."""
    x, y, z = (float(v) for v in r)
    eps = 1e-12 * model.l
    # nudge off edge/corner log singularities
    for xi in (0.0, model.d):
        for yj in (0.0, model.w):
            if abs(x - xi) < eps and abs(y - yj) < eps:
                x += eps if x <= model.d / 2 else -eps
                y += eps if y <= model.w / 2 else -eps
    s0 = _corner_sum(x, y, z, model.d, model.w)
    s1 = _corner_sum(x, y, z - model.l, model.d, model.w)
    return float(-(s0 - s1) / (4.0 * np.pi))


# ---------------------------------------------------------------------------
# Hamiltonian assembly (geometry matrices cached per model geometry)
# ---------------------------------------------------------------------------

_GEOM_CACHE: Dict[tuple, tuple] = {}


def clear_geometry_cache() -> None:
    _GEOM_CACHE.clear()


def _phi_strip(length: float, c):
    """(1/4pi) Int_0^length (length - v)/sqrt(c^2 + v^2) dv, the pairwise
    1/r reduction along one transverse direction."""
    c = np.asarray(c, dtype=float)
    return (length * np.arcsinh(length / c)
            - np.sqrt(c * c + length * length) + c) / (4.0 * np.pi)


def _ccc(a: float, b: float, z):
    """Int_0^z cos(a t) cos(b t) dt."""
    z = np.asarray(z, dtype=float)
    if a == b:
        if a == 0.0:
            return z.copy()
        return z / 2.0 + np.sin(2.0 * a * z) / (4.0 * a)
    return (np.sin((a - b) * z) / (2.0 * (a - b))
            + np.sin((a + b) * z) / (2.0 * (a + b)))


def _ccs(a: float, b: float, z):
    """Int_0^z cos(a t) sin(b t) dt."""
    z = np.asarray(z, dtype=float)
    if b == 0.0:
        return np.zeros_like(z)
    if a == b:
        return (1.0 - np.cos(2.0 * a * z)) / (4.0 * a)
    return 0.5 * ((1.0 - np.cos((a + b) * z)) / (a + b)
                  + (1.0 - np.cos((b - a) * z)) / (b - a))


def _pair_weight(a: float, b: float, l: float, u):
    """W_ab(u) = Int over the square [0,l]^2 of cos(a z1) cos(b z2)
    restricted to |z1 - z2| = u (both orderings)."""
    b1 = (np.cos(b * u) * (_ccc(a, b, l) - _ccc(a, b, u))
          + np.sin(b * u) * (_ccs(a, b, l) - _ccs(a, b, u)))
    b2 = (np.cos(a * u) * (_ccc(a, b, l) - _ccc(a, b, u))
          + np.sin(a * u) * (_ccs(b, a, l) - _ccs(b, a, u)))
    return b1 + b2


def _geometry_matrices(model: BarModel):
    """(hxx, hyy, nmat): dimensionless geometry matrices of the lowest
    transverse band, independent of the applied field (cached)."""
    key = (model.d, model.w, model.l, model.n_trunc, model.quad_level)
    hit = _GEOM_CACHE.get(key)
    if hit is not None:
        return hit

    d, w, l, nt = model.d, model.w, model.l, model.n_trunc
    level = model.quad_level
    npd = np.sqrt(2.0 / ((1.0 + (np.arange(nt + 1) == 0)) * l))
    kap = np.arange(nt + 1) * np.pi / l

    # longitudinal separation mesh: log grading absorbs the u -> 0 log
    # singularity of the transverse reductions; panel cap resolves the
    # fastest cosine in W.
    cap = l / (4.0 * nt * level) if nt > 0 else l / 40.0
    edges = graded_edges(0.0, l, singular_at=0.0, min_frac=1e-9,
                         n_geometric=16 + 4 * level, max_len=cap)
    u, wu = gauss_panel_nodes(edges, order=8 + 2 * level)
    fx = 4.0 * (_phi_strip(w, u) - _phi_strip(w, np.sqrt(u * u + d * d)))
    fy = 4.0 * (_phi_strip(d, u) - _phi_strip(d, np.sqrt(u * u + w * w)))
    fxw = fx * wu
    fyw = fy * wu

    hxx = np.zeros((nt + 1, nt + 1))
    hyy = np.zeros((nt + 1, nt + 1))
    for p1 in range(nt + 1):
        for p2 in range(p1, nt + 1):
            wab = _pair_weight(kap[p1], kap[p2], l, u)
            scale = npd[p1] * npd[p2] / (d * w)
            hxx[p1, p2] = hxx[p2, p1] = scale * float(wab @ fxw)
            hyy[p1, p2] = hyy[p2, p1] = scale * float(wab @ fyw)

    nmat = _demag_matrix(model, npd)
    _GEOM_CACHE[key] = (hxx, hyy, nmat)
    return hxx, hyy, nmat


def _demag_matrix(model: BarModel, npd: np.ndarray) -> np.ndarray:
    """N_{p1p2} = -(1/dw) N_p1 N_p2 (J_|p1-p2| + J_{p1+p2})/2 with
    J_q = Int_V Hdz~(r) cos(q pi z / l) dV (positive: the internal demag
    field opposes the magnetization and lowers the mode frequencies)."""
    d, w, l, nt = model.d, model.w, model.l, model.n_trunc
    level = model.quad_level

    def transverse_mesh(length):
        mid = length / 2.0
        e1 = graded_edges(0.0, mid, singular_at=0.0, min_frac=1e-4,
                          n_geometric=6 + 2 * level, max_len=mid)
        e2 = graded_edges(mid, length, singular_at=length, min_frac=1e-4,
                          n_geometric=6 + 2 * level, max_len=mid)
        return gauss_panel_nodes(np.concatenate([e1, e2[1:]]), order=4 + level)

    xq, wx = transverse_mesh(d)
    yq, wy = transverse_mesh(w)
    # z mesh: graded toward both end faces, capped for cos(2 pi nt z / l)
    cap = l / (2.0 * max(2 * nt, 1))
    mid = l / 2.0
    e1 = graded_edges(0.0, mid, singular_at=0.0, min_frac=1e-6,
                      n_geometric=10 + 2 * level, max_len=cap)
    e2 = graded_edges(mid, l, singular_at=l, min_frac=1e-6,
                      n_geometric=10 + 2 * level, max_len=cap)
    zq, wz = gauss_panel_nodes(np.concatenate([e1, e2[1:]]), order=6 + level)

    x = xq[:, None, None]
    y = yq[None, :, None]
    z = zq[None, None, :]
    s0 = _corner_sum(x, y, z, d, w)
    s1 = _corner_sum(x, y, z - l, d, w)
    hd = -(s0 - s1) / (4.0 * np.pi)
    hbar_z = np.einsum("i,j,ijk->k", wx, wy, hd)   # transverse integral

    q = np.arange(2 * nt + 1)
    cosmat = np.cos(np.outer(q, zq) * np.pi / l)
    jq = cosmat @ (hbar_z * wz)

    p = np.arange(nt + 1)
    jsum = 0.5 * (jq[np.abs(p[:, None] - p[None, :])]
                  + jq[p[:, None] + p[None, :]])
    return -(np.outer(npd, npd) / (d * w)) * jsum


def assemble_bar_hamiltonian(model: BarModel) -> QuadraticBosonForm:
    """Truncated quadratic form of the lowest transverse band:
    A = (omega_H + D_ex kappa_p^2) delta - omega_M N + omega_M H00,
    B = omega_M H01 with H00/H01 the half sum/difference of the
    longitudinal dipolar matrices."""
    hxx, hyy, nmat = _geometry_matrices(model)
    scales = frequency_scales(model.material, model.d, model.w,
                              constants=model.constants)
    omega_h = model.constants.gamma * model.h_ext
    kap = model.kappa(np.arange(model.n_trunc + 1))
    delta = np.diag(omega_h + model.material.d_ex * kap**2)
    h00 = 0.5 * (hxx + hyy)
    h01 = 0.5 * (hxx - hyy)
    a = delta + scales.omega_m * (h00 - nmat)
    b = scales.omega_m * h01
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    return QuadraticBosonForm(a_block=a.astype(complex),
                              b_block=b.astype(complex),
                              labels=tuple(range(model.n_trunc + 1)))


def bar_spectrum(model: BarModel) -> BarSpectrum:
    form = assemble_bar_hamiltonian(model)
    dec = colpa_diagonalize(form)
    freqs = np.array([dec.energy_of_label(p)
                      for p in range(model.n_trunc + 1)])
    return BarSpectrum(frequencies=freqs, decomposition=dec,
                       field=model.h_ext)


def find_resonant_field(model: BarModel, p: int,
                        h_lo: float = 5e-4, h_hi: float = 0.1,
                        tol: float = 2.0 * np.pi * 1e4) -> float:
    """Field (tesla) where omega_(00p) crosses the lower qubit transition.

    omega_(00p) rises and the transition falls with field, so the residual
    is monotone; bisection to |residual| < tol.
    """
    if not 0 <= p <= model.n_trunc:
        raise DomainError(f"mode index p={p} outside truncation")

    def residual(h: float) -> float:
        spec = bar_spectrum(replace(model, h_ext=h))
        omega_nv, _ = nv_transition_frequencies(h, model.constants)
        return spec.omega_of(p) - omega_nv

    r_lo = residual(h_lo)
    r_hi = residual(h_hi)
    if r_lo * r_hi > 0:
        raise DomainError("no resonance crossing in the scanned field range")
    lo, hi = h_lo, h_hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(r) < tol:
            return mid
        if r * r_lo < 0:
            hi = mid
        else:
            lo, r_lo = mid, r
    raise DomainError("resonant-field bisection did not converge")


# ---------------------------------------------------------------------------
# qubit-magnon coupling
# ---------------------------------------------------------------------------

def _face_mesh(length: float, near: float, level: int, cap: float):
    """Mesh on [0, length], graded toward the foot point, panels <= cap."""
    t = float(np.clip(near, 0.0, length))
    pieces = []
    if t > 1e-12 * length:
        pieces.append(graded_edges(0.0, t, singular_at=t, min_frac=1e-6,
                                   n_geometric=8 + 3 * level, max_len=cap))
    if t < length * (1 - 1e-12):
        e = graded_edges(t, length, singular_at=t, min_frac=1e-6,
                         n_geometric=8 + 3 * level, max_len=cap)
        pieces.append(e[1:] if pieces else e)
    edges = np.concatenate(pieces)
    return gauss_panel_nodes(edges, order=6 + 2 * level)


def _face_cos_integrals(model: BarModel, r, kappas: np.ndarray):
    """Dipolar-kernel face integrals against cos(kappa z') for all kappas.

    Returns dict with, per face, the x- and y-component integrals
    Int_face (r - r')_c / (4 pi R^3) cos(kappa_q z') dA'.
    """
    x, y, z = r
    d, w, l, level = model.d, model.w, model.l, model.quad_level
    zcap = (np.pi / (4.0 * kappas[-1])) if kappas[-1] > 0 else l
    zq, wz = _face_mesh(l, z, level, cap=zcap)
    cosmat = np.cos(np.outer(kappas, zq))          # (nq, nz)

    def face(norm_axis: str, offset: float):
        if norm_axis == "x":
            tq, wt = _face_mesh(w, y, level, cap=w)
            dx = np.full_like(tq, x - offset)
            dy = y - tq
        else:
            tq, wt = _face_mesh(d, x, level, cap=d)
            dx = x - tq
            dy = np.full_like(tq, y - offset)
        dz = z - zq
        r3 = (dx[:, None] ** 2 + dy[:, None] ** 2
              + dz[None, :] ** 2) ** 1.5 * (4.0 * np.pi)
        kern_x = dx[:, None] / r3
        kern_y = dy[:, None] / r3
        ix = cosmat @ (wt @ kern_x * wz)
        iy = cosmat @ (wt @ kern_y * wz)
        return ix, iy

    return {"x0": face("x", 0.0), "xd": face("x", d),
            "y0": face("y", 0.0), "yw": face("y", w)}


def _inside_bar(model: BarModel, r) -> bool:
    x, y, z = r
    return (0.0 <= x <= model.d and 0.0 <= y <= model.w
            and 0.0 <= z <= model.l)


def _gamma_combos_bar(model: BarModel, r, n_modes: int):
    """Gamma^{+,+}, ^{+,-}, ^{-,+}, ^{-,-} arrays over mode index q."""
    q = np.arange(n_modes)
    kappas = model.kappa(q)
    cq = model.mode_amplitude(q)
    faces = _face_cos_integrals(model, r, kappas)
    gxx = -cq * (faces["x0"][0] - faces["xd"][0])
    gyx = -cq * (faces["x0"][1] - faces["xd"][1])
    gxy = -cq * (faces["y0"][0] - faces["yw"][0])
    gyy = -cq * (faces["y0"][1] - faces["yw"][1])
    gpp = gxx - gyy + 1j * (gxy + gyx)
    gpm = gxx + gyy - 1j * (gxy - gyx)
    gmp = gxx + gyy + 1j * (gxy - gyx)
    gmm = gxx - gyy - 1j * (gxy + gyx)
    return gpp, gpm, gmp, gmm


def bar_coupling(model: BarModel, spectrum: BarSpectrum, r) -> BarCouplingSet:
    """Qubit-magnon couplings (rad/s) at position r for every mode label p,
    for both the lower and upper qubit transitions."""
    if _inside_bar(model, r):
        raise DomainError("qubit position must lie outside the magnet")
    n = model.n_trunc + 1
    gpp, gpm, gmp, gmm = _gamma_combos_bar(model, r, n)
    dec = spectrum.decomposition
    cols = np.array([dec.column_of_label(p) for p in range(n)])
    tpp = dec.t_pp[:, cols]
    tnp_ = dec.t_np[:, cols]
    scales = frequency_scales(model.material, model.d, model.w, l=model.l,
                              constants=model.constants)
    pref = np.sqrt(scales.omega_m * scales.omega_dwl)
    g_lower = pref * (0.5 * gpp @ tpp + 0.5 * gpm @ tnp_)
    g_upper = pref * (0.5 * gmp @ tpp + 0.5 * gmm @ tnp_)
    shift = (model.constants.gamma * model.material.mu0_ms
             * demag_field_z(model, r))
    return BarCouplingSet(position=tuple(r), g_lower=g_lower,
                          g_upper=g_upper, static_demag_shift=shift)


def cooperativity(g_mu: float, omega_mu: float, alpha: float,
                  t2_star: float) -> float:
    """C = |g|^2 / (alpha * omega / T2*)."""
    return float(abs(g_mu) ** 2 * t2_star / (alpha * omega_mu))


def bar_geff(g1: complex, g2: complex, delta_omega: float) -> complex:
    """Dispersive qubit-qubit coupling g1 g2* / delta_omega; warns when the
    virtual-magnon population parameter |g1 g2| / delta_omega^2 > 0.1."""
    if delta_omega == 0:
        raise DomainError("dispersive coupling requires nonzero detuning")
    if abs(g1 * g2) / delta_omega**2 > 0.1:
        warnings.warn("dispersive approximation marginal: "
                      f"|g1 g2|/detuning^2 = {abs(g1*g2)/delta_omega**2:.3f}",
                      stacklevel=2)
    return complex(g1 * np.conj(g2) / delta_omega)


# ---------------------------------------------------------------------------
# decoherence estimates
# ---------------------------------------------------------------------------

def _default_probe(model: BarModel):
    return (model.d + 5e-9, model.w, 400e-9)


def _extended_frequencies(model: BarModel, spectrum: BarSpectrum,
                          temperature: float):
    """Mode frequencies up to the thermal cutoff 10 kB T / hbar; beyond the
    truncation the exchange parabola continues the spectrum (warned)."""
    cutoff = 10.0 * model.constants.boltzmann_over_hbar * temperature
    freqs = list(spectrum.frequencies)
    nt = model.n_trunc
    if freqs[-1] < cutoff:
        warnings.warn(
            "spectrum truncation below thermal cutoff; extending with the "
            "exchange parabola", stacklevel=3)
        kap_n = model.kappa(nt)
        p = nt + 1
        while True:
            omega = freqs[nt] + model.material.d_ex * (model.kappa(p) ** 2
                                                       - kap_n ** 2)
            if omega >= cutoff or p > 20 * nt:
                break
            freqs.append(omega)
            p += 1
    return np.array(freqs)


def _theta_diagonal(model: BarModel, r, n_modes: int) -> np.ndarray:
    """Theta_pp: dimensionless longitudinal-field second-order matrix
    elements at r: c_p^2 [ -Hdz~(r) - kappa_p V_p ] with
    V_p = Int_V (z - z')/(4 pi R^3) sin(2 kappa_p z') dr'."""
    x, y, z = r
    d, w, l, level = model.d, model.w, model.l, model.quad_level
    p = np.arange(n_modes)
    kap = model.kappa(p)
    cq2 = model.mode_amplitude(p) ** 2

    zcap = l / (4.0 * max(n_modes - 1, 1))
    zq, wz = _face_mesh(l, z, level, cap=zcap)
    xq, wx = _face_mesh(d, x, level, cap=d)
    yq, wy = _face_mesh(w, y, level, cap=w)
    dx = x - xq
    dy = y - yq
    dz = z - zq
    r3 = (dx[:, None, None] ** 2 + dy[None, :, None] ** 2
          + dz[None, None, :] ** 2) ** 1.5 * (4.0 * np.pi)
    kern = dz[None, None, :] / r3
    kz = np.einsum("i,j,ijk->k", wx, wy, kern)
    sinmat = np.sin(2.0 * np.outer(kap, zq))
    vp = sinmat @ (kz * wz)
    return cq2 * (-demag_field_z(model, r) - kap * vp)


def dephasing_higher_order(model: BarModel, spectrum: BarSpectrum,
                           temperature: float, alpha: float,
                           r=None):
    """(tau2, t2_star): qubit dephasing times from thermal magnon-number
    fluctuations of the longitudinal second-order field at position r
    (default: 5 nm above the bar corner at z = 400 nm).

    tau2 is the Gaussian (static-noise) timescale; t2_star the motionally
    narrowed exponential one (valid when magnon damping is fast).
    """
    if r is None:
        r = _default_probe(model)
    if temperature < 0 or alpha <= 0:
        raise DomainError("temperature >= 0 and alpha > 0 required")
    if temperature == 0.0:
        return np.inf, np.inf
    freqs = _extended_frequencies(model, spectrum, temperature)
    theta = _theta_diagonal(model, r, len(freqs))
    nbar = np.array([thermal_occupation(f, temperature, model.constants)
                     for f in freqs])
    var = nbar * (nbar + 1.0)
    scales = frequency_scales(model.material, model.d, model.w, l=model.l,
                              constants=model.constants)
    wdwl = scales.omega_dwl
    rate_gauss = wdwl * np.sqrt(np.sum(theta**2 * var))
    rate_lorentz = wdwl**2 * np.sum(theta**2 * var / (2.0 * alpha * freqs))
    tau2 = np.inf if rate_gauss == 0 else 1.0 / rate_gauss
    t2s = np.inf if rate_lorentz == 0 else 1.0 / rate_lorentz
    return float(tau2), float(t2s)


def dephasing_stark(coupling: BarCouplingSet, spectrum: BarSpectrum,
                    omega_nv: float, temperature: float, alpha: float):
    """(tau2, t2_star): dephasing from thermal fluctuations of the dispersive
    (Stark) shifts 2|g_p|^2/(omega_nv - omega_p); the resonant mode (closest
    to omega_nv) is excluded."""
    if temperature < 0 or alpha <= 0:
        raise DomainError("temperature >= 0 and alpha > 0 required")
    if temperature == 0.0:
        return np.inf, np.inf
    freqs = spectrum.frequencies
    res = int(np.argmin(np.abs(freqs - omega_nv)))
    mask = np.arange(len(freqs)) != res
    shifts = 2.0 * np.abs(coupling.g_lower[mask]) ** 2 / (omega_nv - freqs[mask])
    constants = PhysicalConstants()
    nbar = np.array([thermal_occupation(f, temperature, constants)
                     for f in freqs[mask]])
    var = nbar * (nbar + 1.0)
    rate_gauss = np.sqrt(np.sum(shifts**2 * var))
    rate_lorentz = np.sum(shifts**2 * var / (2.0 * alpha * freqs[mask]))
    tau2 = np.inf if rate_gauss == 0 else 1.0 / rate_gauss
    t2s = np.inf if rate_lorentz == 0 else 1.0 / rate_lorentz
    return float(tau2), float(t2s)


def t1_decay_rates(coupling: BarCouplingSet, spectrum: BarSpectrum,
                   transition: str, h_ext: float, temperature: float,
                   alpha: float,
                   constants: PhysicalConstants = PhysicalConstants()):
    """(gamma_minus, gamma_plus): qubit energy relaxation/excitation rates
    from off-resonant magnon modes,
    gamma_- = sum_p |g_p|^2 (n_p + 1) 2 kappa_p / ((Omega - omega_p)^2 +
    kappa_p^2) and gamma_+ with n_p; kappa_p = alpha omega_p. For the lower
    transition the resonant mode is excluded (it is treated dynamically)."""
    if transition not in ("lower", "upper"):
        raise DomainError("transition must be 'lower' or 'upper'")
    lower, upper = nv_transition_frequencies(h_ext, constants)
    if transition == "lower":
        omega_q = lower
        g = coupling.g_lower
    else:
        omega_q = upper
        g = coupling.g_upper
    freqs = spectrum.frequencies
    mask = np.ones(len(freqs), dtype=bool)
    if transition == "lower":
        mask[int(np.argmin(np.abs(freqs - omega_q)))] = False
    kappa = alpha * freqs[mask]
    lor = 2.0 * kappa / ((omega_q - freqs[mask]) ** 2 + kappa**2)
    nbar = np.array([thermal_occupation(f, temperature, constants)
                     for f in freqs[mask]]) if temperature > 0 else np.zeros(mask.sum())
    g2 = np.abs(g[mask]) ** 2
    gamma_minus = float(np.sum(g2 * (nbar + 1.0) * lor))
    gamma_plus = float(np.sum(g2 * nbar * lor))
    return gamma_minus, gamma_plus
