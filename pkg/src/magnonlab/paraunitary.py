"""Symplectic diagonalization of quadratic bosonic Hamiltonians.

Closed-form 2x2 Bogoliubov transformation, the Cholesky-based paraunitary
algorithm for the general M-mode case, and first-order perturbation of an
existing paraunitary decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .constants import DomainError
from .numerics import FactorizationError, cholesky_hermitian, eigh

__all__ = [
    "InstabilityError", "BogoliubovFactors", "QuadraticBosonForm",
    "ParaunitaryDecomposition", "bogoliubov_2x2", "colpa_diagonalize",
    "perturb_paraunitary",
]


class InstabilityError(RuntimeError):
    """The quadratic form is not positive definite (mode softening)."""


@dataclass(frozen=True)
class BogoliubovFactors:
    """Single-mode squeezing factors: omega (rad/s), lambda >= 1, mu complex,
    with lambda^2 - |mu|^2 = 1."""

    omega: float
    lam: float
    mu: complex

    def __post_init__(self) -> None:
        if abs(self.lam**2 - abs(self.mu) ** 2 - 1.0) > 1e-8 * self.lam**2:
            raise DomainError("factors violate lambda^2 - |mu|^2 = 1")


@dataclass(frozen=True)
class QuadraticBosonForm:
    """Blocks of the 2M x 2M bosonic Hamiltonian [[A, B], [B*, A*]].

    A must be Hermitian and B symmetric (both rad/s); ``labels`` identifies
    the modes (defaults to 0..M-1).
    """

    a_block: np.ndarray
    b_block: np.ndarray
    labels: Tuple = ()

    def __post_init__(self) -> None:
        a = np.asarray(self.a_block, dtype=complex)
        b = np.asarray(self.b_block, dtype=complex)
        if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError("A and B must be square with matching shapes")
        scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
        if np.linalg.norm(a - a.conj().T) > 1e-10 * scale:
            raise DomainError("A block must be Hermitian")
        if np.linalg.norm(b - b.T) > 1e-10 * scale:
            raise DomainError("B block must be symmetric")
        object.__setattr__(self, "a_block", a)
        object.__setattr__(self, "b_block", b)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(a.shape[0])))

    @property
    def n_modes(self) -> int:
        return self.a_block.shape[0]

    def full_matrix(self) -> np.ndarray:
        a, b = self.a_block, self.b_block
        return np.block([[a, b], [b.conj(), a.conj()]])


@dataclass(frozen=True)
class ParaunitaryDecomposition:
    """T, energies and residuals of a symplectic diagonalization.

    ``t_matrix`` is 2M x 2M with blocks [[T_pp, T_pn], [T_np, T_nn]];
    ``energies`` are the M positive mode frequencies ascending;
    ``label_permutation[j]`` is the dominant basis index of energy column j;
    ``residual`` is the max of the symplectic and diagonalization residuals.
    """

    t_matrix: np.ndarray
    energies: np.ndarray
    residual: float
    label_permutation: Tuple[int, ...]
    degenerate: bool = False

    @property
    def n_modes(self) -> int:
        return self.energies.shape[0]

    @property
    def t_pp(self) -> np.ndarray:
        m = self.n_modes
        return self.t_matrix[:m, :m]

    @property
    def t_np(self) -> np.ndarray:
        m = self.n_modes
        return self.t_matrix[m:, :m]

    def energy_of_label(self, label_index: int) -> float:
        """Energy of the mode whose dominant basis index is ``label_index``."""
        cols = [j for j, p in enumerate(self.label_permutation) if p == label_index]
        if len(cols) != 1:
            raise DomainError(f"mode label {label_index} not uniquely tracked")
        return float(self.energies[cols[0]])

    def column_of_label(self, label_index: int) -> int:
        cols = [j for j, p in enumerate(self.label_permutation) if p == label_index]
        if len(cols) != 1:
            raise DomainError(f"mode label {label_index} not uniquely tracked")
        return cols[0]


def _sigma3(m: int) -> np.ndarray:
    return np.diag(np.concatenate([np.ones(m), -np.ones(m)]))


def bogoliubov_2x2(a: float, b: complex) -> BogoliubovFactors:
    """Diagonalize the single-mode form [[a, b], [b*, a]].

    omega = sqrt(a^2 - |b|^2), lambda = sqrt((a+omega)/2omega),
    mu = (b/|b|) sqrt((a-omega)/2omega) (mu = 0 when b = 0).
    Raises InstabilityError when a <= |b|.
    """
    a = float(a)
    babs = abs(b)
    if a <= babs:
        raise InstabilityError(f"unstable mode: a={a!r} <= |b|={babs!r}")
    omega = np.sqrt((a - babs) * (a + babs))
    lam = np.sqrt((a + omega) / (2.0 * omega))
    mu_mag = np.sqrt(max(a - omega, 0.0) / (2.0 * omega))
    if babs == 0.0 or mu_mag == 0.0:
        mu = 0.0 + 0.0j
    else:
        # phase factor via cmath to avoid overflow for subnormal |b|
        mu = complex(b) / babs * mu_mag
    return BogoliubovFactors(omega=float(omega), lam=float(lam), mu=complex(mu))


def colpa_diagonalize(form: QuadraticBosonForm,
                      degeneracy_tol: float = 1e-9) -> ParaunitaryDecomposition:
    """Cholesky-based paraunitary diagonalization of a stable quadratic form.

    Steps: Hhat = K^dag K (Cholesky);  W = K sigma3 K^dag;  unitary
    eigendecomposition of W; positive branch columns build
    Ttilde = K^-1 U diag(sqrt(E)); the negative branch is reconstructed from
    the exact particle-hole symmetry, which enforces T sigma3-paraunitarity.
    """
    m = form.n_modes
    hhat = form.full_matrix()
    scale = float(np.linalg.norm(hhat))
    evals = np.linalg.eigvalsh(hhat)
    if evals[0] < 1e-10 * scale:
        raise InstabilityError(
            f"form not positive definite within margin (min eig {evals[0]:.3e})")
    try:
        k = cholesky_hermitian(hhat)
    except FactorizationError as exc:
        raise InstabilityError(f"Cholesky failed at pivot {exc.pivot}") from exc

    sigma3 = _sigma3(m)
    w = k @ sigma3 @ k.conj().T
    wvals, wvecs = eigh(w)
    pos = wvals > 0
    if int(pos.sum()) != m:
        raise InstabilityError("eigenvalue branches of K sigma3 K^dag unbalanced")
    epos = wvals[pos]
    upos = wvecs[:, pos]
    order = np.argsort(epos)
    epos = epos[order]
    upos = upos[:, order]

    tcols = np.linalg.solve(k, upos) * np.sqrt(epos)[None, :]
    tpp = tcols[:m, :]
    tnp_ = tcols[m:, :]

    # global phase per column: largest-|entry| real positive
    for j in range(m):
        col = tcols[:, j]
        idx = int(np.argmax(np.abs(col)))
        phase = col[idx] / abs(col[idx])
        tpp[:, j] = tpp[:, j] / phase
        tnp_[:, j] = tnp_[:, j] / phase

    t = np.block([[tpp, tnp_.conj()], [tnp_, tpp.conj()]])

    resid_sym = np.linalg.norm(t.conj().T @ sigma3 @ t - sigma3)
    diag_target = np.diag(np.concatenate([epos, epos]))
    resid_diag = np.linalg.norm(t.conj().T @ hhat @ t - diag_target) / max(scale, 1e-300)
    residual = float(max(resid_sym, resid_diag))
    if residual > 1e-8:
        raise InstabilityError(f"paraunitary residual too large: {residual:.3e}")

    gaps = np.diff(epos)
    degenerate = bool(np.any(gaps < degeneracy_tol * max(epos[-1], 1e-300)))

    # dominant basis index per energy column, with stable tie-breaking
    perm = []
    taken = set()
    for j in range(m):
        ranking = np.argsort(-np.abs(tpp[:, j]), kind="stable")
        pick = next(int(r) for r in ranking if int(r) not in taken)
        taken.add(pick)
        perm.append(pick)

    return ParaunitaryDecomposition(
        t_matrix=t, energies=epos, residual=residual,
        label_permutation=tuple(perm), degenerate=degenerate)


def perturb_paraunitary(t0: ParaunitaryDecomposition,
                        v: np.ndarray,
                        block_approximation: bool = False,
                        gap_tol: float = 1e-6):
    """First-order update of a paraunitary decomposition under a Hermitian
    perturbation ``v`` (2M x 2M, same particle-hole structure as the form).

    Returns (lambda1, t1): the diagonal first-order energy corrections (rad/s,
    length 2M ordered as [positive branch, negative branch]) and the matrix
    correction T1 = T0 L. With ``block_approximation`` the off-block-diagonal
    sector of L (pairings with sigma_ii*sigma_jj = -1) is dropped, which is
    accurate when mode sums omega_mu + omega_nu dominate the perturbation.
    """
    m = t0.n_modes
    v = np.asarray(v, dtype=complex)
    if v.shape != (2 * m, 2 * m):
        raise DomainError("perturbation must be 2M x 2M")
    scale = max(np.linalg.norm(v), 1e-300)
    if np.linalg.norm(v - v.conj().T) > 1e-10 * scale:
        raise DomainError("perturbation must be Hermitian")

    t = t0.t_matrix
    sigma3 = _sigma3(m)
    g = t.conj().T @ v @ t
    lambda1 = np.real(np.diag(g)).copy()

    s_lam = np.concatenate([t0.energies, -t0.energies])  # sigma3 * Lambda0 diag
    mean_e = float(np.mean(t0.energies))
    denom = s_lam[:, None] - s_lam[None, :]
    off = ~np.eye(2 * m, dtype=bool)
    small = off & (np.abs(denom) < gap_tol * max(mean_e, 1e-300))
    if np.any(small & (np.abs(g) > 1e-12 * scale)):
        raise DomainError(
            "degenerate unperturbed energies: degenerate perturbation theory "
            "is out of scope")
    l_mat = np.zeros_like(g)
    safe = off & ~small
    l_mat[safe] = -(np.diag(sigma3)[:, None] * g / np.where(safe, denom, 1.0))[safe]
    if block_approximation:
        sgn = np.diag(sigma3)
        cross = sgn[:, None] * sgn[None, :] < 0
        l_mat[cross] = 0.0
    t1 = t @ l_mat
    return lambda1, t1
