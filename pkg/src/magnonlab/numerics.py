"""Shared numerical contracts.

Modified Bessel functions of the second kind, singular quadrature for
magnetostatic kernels, Cholesky factorization and Hermitian
eigendecomposition. Bessel functions and dense linear algebra delegate to
scipy/LAPACK behind explicit pre/postcondition checks; the quadrature
routines are implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import integrate, linalg, special

from .constants import DomainError

__all__ = [
    "Panel", "QuadratureSpec", "ConvergenceError", "FactorizationError",
    "bessel_k0", "bessel_k1",
    "log_singular_quad_1d", "coulomb_panel_quad",
    "cholesky_hermitian", "eigh",
    "gauss_panel_nodes", "graded_edges",
]


class ConvergenceError(RuntimeError):
    """Quadrature budget exhausted before tolerance; carries best estimate."""

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class FactorizationError(RuntimeError):
    """Cholesky failure; ``pivot`` is the first non-positive pivot (0-based)."""

    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-300
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("tolerances must be positive")


@dataclass(frozen=True)
class Panel:
    """Axis-aligned rectangle in 3D.

    ``normal_axis`` is the outward normal direction (0=x, 1=y, 2=z);
    ``origin`` gives the coordinate along the normal axis; ``u_axis`` and
    ``v_axis`` span the rectangle with bounds in meters.
    """

    normal_axis: int
    origin: float
    u_axis: int
    u_bounds: Tuple[float, float]
    v_axis: int
    v_bounds: Tuple[float, float]

    def __post_init__(self) -> None:
        axes = {self.normal_axis, self.u_axis, self.v_axis}
        if axes != {0, 1, 2}:
            raise DomainError("panel axes must be a permutation of {0,1,2}")
        if self.u_bounds[1] <= self.u_bounds[0] or self.v_bounds[1] <= self.v_bounds[0]:
            raise DomainError("panel bounds must be nonempty")

    @property
    def area(self) -> float:
        return ((self.u_bounds[1] - self.u_bounds[0])
                * (self.v_bounds[1] - self.v_bounds[0]))

    def point(self, u, v) -> np.ndarray:
        """3D coordinates for in-plane points (u, v); broadcasts."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.zeros(np.broadcast(u, v).shape + (3,))
        out[..., self.normal_axis] = self.origin
        out[..., self.u_axis] = u
        out[..., self.v_axis] = v
        return out


# ---------------------------------------------------------------------------
# Bessel functions
# ---------------------------------------------------------------------------

def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("argument must be strictly positive")
    return x


def bessel_k0(x):
    """Modified Bessel function K0 for x > 0 (scalar or array)."""
    return special.k0(_check_positive(x))


def bessel_k1(x):
    """Modified Bessel function K1 for x > 0 (scalar or array)."""
    return special.k1(_check_positive(x))


# ---------------------------------------------------------------------------
# composite Gauss-Legendre machinery
# ---------------------------------------------------------------------------

def graded_edges(a: float, b: float, *, singular_at: float,
                 min_frac: float = 1e-7, n_geometric: int = 18,
                 max_len: float | None = None) -> np.ndarray:
    """Panel edges on [a, b], geometrically graded toward ``singular_at``.

    ``singular_at`` must be one of the endpoints. Interior panels are capped
    at ``max_len`` when given.
    """
    if b <= a:
        raise DomainError("empty interval")
    length = b - a
    frac = np.geomspace(min_frac, 1.0, n_geometric + 1)
    if np.isclose(singular_at, a):
        edges = a + frac * length
        edges = np.concatenate(([a], edges))
    elif np.isclose(singular_at, b):
        edges = b - frac[::-1] * length
        edges = np.concatenate((edges, [b]))
    else:
        raise DomainError("singular point must be an endpoint")
    if max_len is not None and max_len < length:
        refined = [edges[0]]
        for right in edges[1:]:
            left = refined[-1]
            n_split = max(1, int(np.ceil((right - left) / max_len)))
            refined.extend(np.linspace(left, right, n_split + 1)[1:])
        edges = np.asarray(refined)
    return np.asarray(edges)


def gauss_panel_nodes(edges: np.ndarray, order: int = 10):
    """Gauss-Legendre nodes/weights for a composite mesh given by ``edges``."""
    x, w = np.polynomial.legendre.leggauss(order)
    lefts = edges[:-1]
    rights = edges[1:]
    half = 0.5 * (rights - lefts)
    mid = 0.5 * (rights + lefts)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _uniform_edges(a: float, b: float, n: int) -> np.ndarray:
    return np.linspace(a, b, n + 1)


# ---------------------------------------------------------------------------
# log-singular 1D x 1D quadrature
# ---------------------------------------------------------------------------

def log_singular_quad_1d(f: Callable[[float, float], float],
                         kernel: Callable[[float, float], float],
                         interval_a: Tuple[float, float],
                         interval_b: Tuple[float, float],
                         spec: QuadratureSpec = QuadratureSpec()) -> Tuple[float, float]:
    """Integrate f(s, t)*kernel(s, t) over interval_a x interval_b.

    The kernel may carry an integrable logarithmic singularity on the
    diagonal s == t (overlapping intervals). Returns (value, error_estimate).
    Raises ConvergenceError when the budget is exhausted first.
    """
    a0, a1 = interval_a
    b0, b1 = interval_b
    if a1 <= a0 or b1 <= b0:
        raise DomainError("empty integration interval")

    def inner(s: float) -> Tuple[float, float]:
        pts = [s] if b0 < s < b1 else None
        val, err = integrate.quad(lambda t: f(s, t) * kernel(s, t), b0, b1,
                                  points=pts, limit=spec.max_subdivisions,
                                  epsrel=spec.rel_tol, epsabs=spec.abs_tol)
        return val, err

    inner_errors = []

    def outer_integrand(s: float) -> float:
        val, err = inner(s)
        inner_errors.append(err)
        return val

    val, outer_err = integrate.quad(outer_integrand, a0, a1,
                                    limit=spec.max_subdivisions,
                                    epsrel=spec.rel_tol, epsabs=spec.abs_tol)
    inner_err = (a1 - a0) * (max(inner_errors) if inner_errors else 0.0)
    err = outer_err + inner_err
    tol = max(spec.abs_tol, spec.rel_tol * abs(val))
    if err > max(tol * 50.0, 1e-12):
        raise ConvergenceError("quadrature did not reach tolerance", val, err)
    return val, err


# ---------------------------------------------------------------------------
# 1/r panel-pair quadrature
# ---------------------------------------------------------------------------

def _rect_potential_in_plane(u: np.ndarray, v: np.ndarray,
                             u_bounds, v_bounds) -> np.ndarray:
    """Potential (1/4pi) * Int dA' / |r - r'| of a unit-density rectangle,
    evaluated at in-plane points (u, v). Closed form via corner sums."""
    total = np.zeros(np.broadcast(u, v).shape)
    for i, ub in enumerate(u_bounds):
        for j, vb in enumerate(v_bounds):
            du = np.asarray(ub - u, dtype=float)
            dv = np.asarray(vb - v, dtype=float)
            r = np.hypot(du, dv)
            sign = (-1.0) ** (i + j)
            with np.errstate(divide="ignore", invalid="ignore"):
                term = (dv * np.log(np.where(du + r > 0, du + r, 1.0))
                        + du * np.log(np.where(dv + r > 0, dv + r, 1.0)))
            term = np.where(r == 0.0, 0.0, np.nan_to_num(term))
            # du+r == 0 happens on the axis behind a corner: the limit of
            # dv*log(du+r) is 0 there because dv == 0 too; guard above.
            total += sign * term
    return total / (4.0 * np.pi)


def _panel_min_distance(pa: Panel, pb: Panel) -> float:
    def bounds(p: Panel):
        b = np.empty((3, 2))
        b[p.normal_axis] = (p.origin, p.origin)
        b[p.u_axis] = p.u_bounds
        b[p.v_axis] = p.v_bounds
        return b
    ba, bb = bounds(pa), bounds(pb)
    gap = np.maximum(0.0, np.maximum(bb[:, 0] - ba[:, 1], ba[:, 0] - bb[:, 1]))
    return float(np.linalg.norm(gap))


def _tensor_gauss_pair(pa: Panel, pb: Panel, fa, fb, order: int) -> float:
    ua, wa = gauss_panel_nodes(_uniform_edges(*pa.u_bounds, 2), order)
    va, qa = gauss_panel_nodes(_uniform_edges(*pa.v_bounds, 2), order)
    ub, wb = gauss_panel_nodes(_uniform_edges(*pb.u_bounds, 2), order)
    vb, qb = gauss_panel_nodes(_uniform_edges(*pb.v_bounds, 2), order)
    UA, VA = np.meshgrid(ua, va, indexing="ij")
    UB, VB = np.meshgrid(ub, vb, indexing="ij")
    ra = pa.point(UA, VA).reshape(-1, 3)
    rb = pb.point(UB, VB).reshape(-1, 3)
    wAB = (np.outer(wa, qa).ravel()[:, None]
           * np.outer(wb, qb).ravel()[None, :])
    dens_a = np.asarray(fa(UA, VA), dtype=float).ravel()
    dens_b = np.asarray(fb(UB, VB), dtype=float).ravel()
    diff = ra[:, None, :] - rb[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    kern = 1.0 / (4.0 * np.pi * dist)
    return float(np.einsum("i,j,ij,ij->", dens_a, dens_b, wAB, kern))


def _self_panel(panel: Panel, fa, fb, order: int) -> float:
    """Self-interaction with singularity subtraction:

    II fa(r) fb(r') G dA dA' =
        II fa(r) [fb(r') - fb(r)] G dA dA'   (bounded integrand)
      + I  fa(r) fb(r) V_panel(r) dA         (closed-form rectangle potential)
    """
    u, wu = gauss_panel_nodes(_uniform_edges(*panel.u_bounds, 3), order)
    v, wv = gauss_panel_nodes(_uniform_edges(*panel.v_bounds, 3), order)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    fb_vals = np.asarray(fb(U, V), dtype=float)
    fa_vals = np.asarray(fa(U, V), dtype=float)

    pts = np.stack([U.ravel(), V.ravel()], axis=-1)
    dens_b = fb_vals.ravel()
    dens_a = fa_vals.ravel()
    wts = W.ravel()
    du = pts[:, None, 0] - pts[None, :, 0]
    dv = pts[:, None, 1] - pts[None, :, 1]
    dist = np.hypot(du, dv)
    with np.errstate(divide="ignore"):
        kern = np.where(dist > 0, 1.0 / (4.0 * np.pi * dist), 0.0)
    corr = (dens_b[None, :] - dens_b[:, None]) * kern
    part_smooth = float(np.einsum("i,i,ij,j->", dens_a, wts, corr, wts))

    vpot = _rect_potential_in_plane(U, V, panel.u_bounds, panel.v_bounds)
    part_singular = float(np.sum(W * fa_vals * fb_vals * vpot))
    return part_smooth + part_singular


def coulomb_panel_quad(panel_a: Panel, panel_b: Panel,
                       fa: Callable = None, fb: Callable = None,
                       spec: QuadratureSpec = QuadratureSpec()) -> Tuple[float, float]:
    """II fa(r) fb(r') / (4 pi |r - r'|) dA dA' over a panel pair.

    Disjoint panels use tensor Gauss quadrature with two-level refinement;
    a coincident pair uses the closed-form rectangle self-potential with
    singularity subtraction. Returns (value, error_estimate).
    """
    if fa is None:
        fa = lambda u, v: np.ones_like(np.asarray(u, dtype=float))
    if fb is None:
        fb = lambda u, v: np.ones_like(np.asarray(u, dtype=float))

    if panel_a == panel_b:
        lo = _self_panel(panel_a, fa, fb, order=8)
        hi = _self_panel(panel_a, fa, fb, order=12)
        err = abs(hi - lo)
        return hi, max(err, abs(hi) * 1e-14)

    dist = _panel_min_distance(panel_a, panel_b)
    scale = max(np.sqrt(panel_a.area), np.sqrt(panel_b.area))
    if dist == 0.0:
        # touching (shared edge/corner): bounded but non-smooth; use a
        # refined tensor rule and report the two-level difference.
        lo = _tensor_gauss_pair(panel_a, panel_b, fa, fb, order=12)
        hi = _tensor_gauss_pair(panel_a, panel_b, fa, fb, order=18)
    else:
        order = 10 if dist > 0.5 * scale else 14
        lo = _tensor_gauss_pair(panel_a, panel_b, fa, fb, order=order - 4)
        hi = _tensor_gauss_pair(panel_a, panel_b, fa, fb, order=order)
    err = abs(hi - lo)
    tol = max(spec.abs_tol, spec.rel_tol * abs(hi))
    if err > max(tol * 100.0, 1e-12 * abs(hi)):
        raise ConvergenceError("panel quadrature did not converge", hi, err)
    return hi, max(err, abs(hi) * 1e-14)


# ---------------------------------------------------------------------------
# dense linear algebra
# ---------------------------------------------------------------------------

def _require_hermitian(h: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError("matrix must be square")
    scale = max(float(np.linalg.norm(h)), 1.0e-300)
    if np.linalg.norm(h - h.conj().T) > tol * scale * 10:
        raise DomainError("matrix is not Hermitian within tolerance")
    return 0.5 * (h + h.conj().T)


def cholesky_hermitian(h: np.ndarray) -> np.ndarray:
    """Upper-triangular K with h = K^dagger K for Hermitian PD input.

    Raises FactorizationError identifying the failing pivot otherwise
    (this signals mode instability / a bad equilibrium assumption upstream).
    """
    h = _require_hermitian(h)
    c, info = linalg.lapack.zpotrf(h, lower=0, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(
            f"matrix not positive definite; pivot {info - 1} failed", info - 1)
    if info < 0:
        raise DomainError(f"invalid argument {-info} to Cholesky")
    return c


def eigh(h: np.ndarray):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
    matrix, with residual postconditions enforced."""
    h = _require_hermitian(h)
    vals, vecs = np.linalg.eigh(h)
    scale = max(float(np.linalg.norm(h)), 1e-300)
    resid = np.linalg.norm(h @ vecs - vecs * vals[None, :])
    if resid > 1e-10 * scale * max(1, h.shape[0]):
        raise ConvergenceError("eigendecomposition residual too large",
                               float(vals[0]), float(resid))
    return vals, vecs
