"""Open-system dynamics of two spin qubits coupled to one bosonic mode.

Lindblad master equation with thermal mode damping and qubit pure
dephasing; both entangling protocols (on-resonant transduction and
off-resonant virtual-boson exchange), entanglement measures, average
gate fidelity of the square-root-of-iSWAP gate, the protocol phase
diagram in (damping, dephasing) space, and the closed-form small-rate
fidelity limits.

Hilbert space: qubit1 (x) qubit2 (x) mode, qubit basis (|g>, |e>).
Density matrices are vectorized row-major: vec(A rho B) =
(A kron B^T) vec(rho). All rates and frequencies angular (rad/s).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.sparse import csr_matrix, identity, kron
from scipy.sparse.linalg import expm_multiply

from .constants import (DomainError, PhysicalConstants, TWO_PI,
                        thermal_occupation)

__all__ = [
    "OpenSystemModel", "ScheduleSegment", "ProtocolSchedule",
    "SimulationTrace", "PhaseDiagram", "adequate_cutoff", "thermal_state",
    "build_generator", "evolve", "reduced_qubit_state", "negativity",
    "chsh_violation", "fidelity_to_target", "run_transduction",
    "transduction_endpoint_sweep", "peak_transduction_fidelity",
    "run_virtual_exchange",
    "peak_virtual_exchange_fidelity", "average_gate_fidelity",
    "sqrt_iswap_unitary", "protocol_phase_diagram",
    "analytic_fidelity_limits", "node_detuning", "crossover_alpha",
    "thermal_occupation",
]

_CUTOFF_TAIL_TOL = 1e-6
_DENSE_LIMIT = 700         # superoperator dimension below which dense expm wins


def adequate_cutoff(n_th: float, tol: float = _CUTOFF_TAIL_TOL,
                    minimum: int = 6) -> int:
    """Smallest Fock cutoff whose thermal tail (n/(1+n))^(n_max+1) < tol."""
    if n_th <= 0:
        return minimum
    ratio = n_th / (1.0 + n_th)
    n = int(np.ceil(np.log(tol) / np.log(ratio))) - 1
    return max(minimum, n)


@dataclass(frozen=True)
class OpenSystemModel:
    """Two qubits + one damped thermal mode.

    g1, g2 are the signed complex qubit-mode couplings (rad/s); kappa the
    mode amplitude damping rate (= alpha * omega_m); n_th the thermal mode
    occupation; gamma2 the qubit pure-dephasing rate 1/T2* entering as
    (gamma2/2) D[sigma_z] per qubit; extra_dephasing is an optional
    additive rate from independently estimated sources.
    """

    g1: complex
    g2: complex
    omega_m: float
    kappa: float
    n_th: float
    gamma2: float
    n_max: int = 12
    extra_dephasing: float = 0.0

    def __post_init__(self) -> None:
        if self.kappa < 0 or self.n_th < 0 or self.gamma2 < 0:
            raise DomainError("kappa, n_th, gamma2 must be non-negative")
        if self.extra_dephasing < 0:
            raise DomainError("extra_dephasing must be non-negative")
        if self.n_max < 1:
            raise DomainError("n_max >= 1 required")
        if self.n_th > 0:
            tail = (self.n_th / (1.0 + self.n_th)) ** (self.n_max + 1)
            if tail >= _CUTOFF_TAIL_TOL:
                raise DomainError(
                    f"Fock cutoff inadequate: thermal tail {tail:.2e} >= "
                    f"{_CUTOFF_TAIL_TOL} (need n_max >= "
                    f"{adequate_cutoff(self.n_th)})")

    @property
    def dim(self) -> int:
        return 4 * (self.n_max + 1)

    @classmethod
    def from_physical(cls, g1, g2, omega_m, alpha, t2_star, temperature,
                      n_max: Optional[int] = None,
                      constants: PhysicalConstants = PhysicalConstants(),
                      **kw) -> "OpenSystemModel":
        n_th = thermal_occupation(omega_m, temperature, constants) \
            if temperature > 0 else 0.0
        if n_max is None:
            n_max = max(12, adequate_cutoff(n_th))
        gamma2 = 1.0 / t2_star if np.isfinite(t2_star) else 0.0
        return cls(g1=g1, g2=g2, omega_m=omega_m, kappa=alpha * omega_m,
                   n_th=n_th, gamma2=gamma2, n_max=n_max, **kw)


@dataclass(frozen=True)
class ScheduleSegment:
    duration: float
    detuning_1: float = 0.0
    detuning_2: float = 0.0
    magnon_detuning: float = 0.0
    coupling_on: Tuple[bool, bool] = (True, True)

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise DomainError("segment duration must be non-negative")


@dataclass(frozen=True)
class ProtocolSchedule:
    segments: Tuple[ScheduleSegment, ...]
    frame: str = "mode"        # rotating-frame reference, metadata only

    @property
    def total_time(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True)
class SimulationTrace:
    times: np.ndarray
    p1e: np.ndarray
    p2e: np.ndarray
    n_mean: np.ndarray
    negativity_norm: np.ndarray
    chsh: np.ndarray
    fidelity: np.ndarray            # vs the fixed protocol target (NaN if none)
    fidelity_phase_max: np.ndarray  # max_phi vs (|ge> + e^{i phi}|eg>)/sqrt(2)
    qubit_states: np.ndarray        # (n, 4, 4) reduced two-qubit states
    frame: str = "mode"

    @property
    def fidelity_peak(self) -> float:
        f = self.fidelity
        return float(np.nanmax(f)) if np.any(np.isfinite(f)) else float("nan")


# ---------------------------------------------------------------------------
# operators and generator
# ---------------------------------------------------------------------------

def _operators(n_max: int):
    m = n_max + 1
    iq = np.eye(2)
    im = np.eye(m)
    sm = np.array([[0.0, 1.0], [0.0, 0.0]])     # |g><e|
    ne = np.diag([0.0, 1.0])
    sz = np.diag([-1.0, 1.0])
    a_small = np.diag(np.sqrt(np.arange(1, m)), k=1)
    def three(q1, q2, mm):
        return np.kron(np.kron(q1, q2), mm)
    return {
        "sm1": three(sm, iq, im), "sm2": three(iq, sm, im),
        "n1": three(ne, iq, im), "n2": three(iq, ne, im),
        "sz1": three(sz, iq, im), "sz2": three(iq, sz, im),
        "a": three(iq, iq, a_small),
        "n_mode": three(iq, iq, a_small.T @ a_small),
    }


def _spre(op) -> csr_matrix:
    d = op.shape[0]
    return kron(csr_matrix(op), identity(d, format="csr"), format="csr")


def _spost(op) -> csr_matrix:
    d = op.shape[0]
    return kron(identity(d, format="csr"), csr_matrix(op.T), format="csr")


def _dissipator(op) -> csr_matrix:
    opd_op = op.conj().T @ op
    return (kron(csr_matrix(op), csr_matrix(op.conj()), format="csr")
            - 0.5 * (_spre(opd_op) + _spost(opd_op)))


def build_generator(model: OpenSystemModel,
                    detunings: Tuple[float, float] = (0.0, 0.0),
                    magnon_detuning: float = 0.0,
                    coupling_on: Tuple[bool, bool] = (True, True)) -> csr_matrix:
    """Vectorized Lindblad generator (sparse, dim^2 x dim^2).

    H = d1 n1 + d2 n2 + dm a^dag a + sum_i g_i (a sigma_i^+ + h.c.)
    L rho = -i[H, rho] + 2 kappa (1+n_th) D[a] + 2 kappa n_th D[a^dag]
            + (gamma2_tot/2) (D[sz1] + D[sz2]).
    """
    ops = _operators(model.n_max)
    h = (detunings[0] * ops["n1"] + detunings[1] * ops["n2"]
         + magnon_detuning * ops["n_mode"]).astype(complex)
    for g, on, sm in ((model.g1, coupling_on[0], ops["sm1"]),
                      (model.g2, coupling_on[1], ops["sm2"])):
        if on and g != 0:
            h += g * (ops["a"] @ sm.T.conj()) \
                + np.conj(g) * (ops["a"].T @ sm)
    lind = -1j * (_spre(h) - _spost(h))
    if model.kappa > 0:
        lind = lind + 2.0 * model.kappa * (1.0 + model.n_th) * _dissipator(ops["a"])
        if model.n_th > 0:
            lind = lind + 2.0 * model.kappa * model.n_th * _dissipator(ops["a"].T)
    g2tot = model.gamma2 + model.extra_dephasing
    if g2tot > 0:
        lind = lind + 0.5 * g2tot * (_dissipator(ops["sz1"])
                                     + _dissipator(ops["sz2"]))
    return csr_matrix(lind)


class _Propagator:
    """Applies exp(L t) to vectors; dense cached propagators for small
    dimensions, Krylov stepping otherwise."""

    def __init__(self, lind: csr_matrix):
        self.lind = lind
        self.dense = lind.shape[0] <= _DENSE_LIMIT ** 2 // 1 and \
            lind.shape[0] <= _DENSE_LIMIT
        self._cache = {}

    def apply(self, v: np.ndarray, dt: float) -> np.ndarray:
        if dt == 0.0:
            return v.copy()
        if self.dense:
            key = round(dt, 20)
            p = self._cache.get(key)
            if p is None:
                p = expm(self.lind.toarray() * dt)
                self._cache[key] = p
            return p @ v
        return expm_multiply(self.lind * dt, v)

    def apply_grid(self, v: np.ndarray, stop: float, num: int) -> np.ndarray:
        """States at linspace(0, stop, num) as rows."""
        if num == 1:
            return v[None, :].copy()
        if self.dense:
            out = np.empty((num, v.size), dtype=complex)
            out[0] = v
            step = stop / (num - 1)
            for i in range(1, num):
                out[i] = self.apply(out[i - 1], step)
            return out
        return expm_multiply(self.lind, v, start=0.0, stop=stop,
                             num=num, endpoint=True)


# ---------------------------------------------------------------------------
# states and measures
# ---------------------------------------------------------------------------

def thermal_state(n_th: float, n_max: int) -> np.ndarray:
    if n_th == 0:
        rho = np.zeros((n_max + 1, n_max + 1))
        rho[0, 0] = 1.0
        return rho
    n = np.arange(n_max + 1)
    p = (n_th / (1.0 + n_th)) ** n / (1.0 + n_th)
    p = p / p.sum()
    return np.diag(p)


def initial_ge_state(model: OpenSystemModel) -> np.ndarray:
    """|g>_1 |e>_2 (x) thermal mode."""
    q = np.zeros((4, 4))
    q[1, 1] = 1.0          # |ge>
    return np.kron(q, thermal_state(model.n_th, model.n_max))


def reduced_qubit_state(rho: np.ndarray, n_max: int) -> np.ndarray:
    m = n_max + 1
    r = rho.reshape(2, 2, m, 2, 2, m)
    return np.einsum("ijkLMk->ijLM", r).reshape(4, 4)


def negativity(rho4: np.ndarray) -> float:
    """Sum of |negative eigenvalues| of the partial transpose over qubit 2
    (Bell state: 1/2)."""
    pt = rho4.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    vals = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(-vals[vals < 0].sum())


_PAULIS = (np.array([[0, 1], [1, 0]], dtype=complex),
           np.array([[0, -1j], [1j, 0]]),
           np.array([[1, 0], [0, -1]], dtype=complex))


def chsh_violation(rho4: np.ndarray) -> float:
    """max[0, M(rho) - 1] with M the sum of the two largest eigenvalues of
    T^T T, T_ij = Tr[rho sigma_i (x) sigma_j]."""
    t = np.empty((3, 3))
    for i, si in enumerate(_PAULIS):
        for j, sj in enumerate(_PAULIS):
            t[i, j] = np.real(np.trace(rho4 @ np.kron(si, sj)))
    h = np.linalg.eigvalsh(t.T @ t)
    return float(max(0.0, h[-1] + h[-2] - 1.0))


def fidelity_to_target(rho4: np.ndarray, target: np.ndarray) -> float:
    psi = np.asarray(target, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ rho4 @ psi))


def _phase_max_fidelity(rho4: np.ndarray) -> float:
    """max_phi <psi(phi)|rho|psi(phi)> over (|ge> + e^{i phi}|eg>)/sqrt(2)."""
    return float(0.5 * np.real(rho4[1, 1] + rho4[2, 2]) + abs(rho4[1, 2]))


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def _check_density(rho: np.ndarray, where: str, tol: float = 1e-8) -> None:
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise RuntimeError(f"{where}: trace deviates from 1 by {abs(tr-1):.2e}")
    vals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if vals[0] < -tol:
        raise RuntimeError(f"{where}: negative eigenvalue {vals[0]:.2e}")


def _measure_rows(model: OpenSystemModel, vecs: np.ndarray,
                  target: Optional[np.ndarray], check: bool, where: str):
    ops = _operators(model.n_max)
    dim = model.dim
    rows = {k: [] for k in ("p1e", "p2e", "n_mean", "neg", "chsh",
                            "fid", "fidpm")}
    states = []
    for i, v in enumerate(np.atleast_2d(vecs)):
        rho = v.reshape(dim, dim)
        if check:
            _check_density(rho, f"{where} sample {i}")
        rho = 0.5 * (rho + rho.conj().T)
        rows["p1e"].append(np.real(np.trace(ops["n1"] @ rho)))
        rows["p2e"].append(np.real(np.trace(ops["n2"] @ rho)))
        rows["n_mean"].append(np.real(np.trace(ops["n_mode"] @ rho)))
        rho4 = reduced_qubit_state(rho, model.n_max)
        states.append(rho4)
        rows["neg"].append(negativity(rho4) / 0.5)
        rows["chsh"].append(chsh_violation(rho4))
        rows["fid"].append(fidelity_to_target(rho4, target)
                           if target is not None else np.nan)
        rows["fidpm"].append(_phase_max_fidelity(rho4))
    return rows, np.array(states)


def evolve(model: OpenSystemModel, rho0: np.ndarray,
           schedule: ProtocolSchedule, sample_times: Sequence[float],
           target: Optional[np.ndarray] = None,
           check_positivity: bool = True) -> SimulationTrace:
    """Propagate rho0 through the piecewise-constant schedule, sampling the
    state and all measures at ``sample_times`` (sorted, within the schedule).
    """
    times = np.asarray(sample_times, dtype=float)
    if times.size == 0 or np.any(np.diff(times) < 0) or times[0] < 0:
        raise DomainError("sample_times must be sorted and non-negative")
    total = schedule.total_time
    if times[-1] > total * (1 + 1e-12) + 1e-30:
        raise DomainError("sample_times exceed the schedule duration")

    rho0 = np.asarray(rho0, dtype=complex)
    _check_density(rho0, "initial state")
    v = rho0.reshape(-1)

    sampled = np.empty((times.size, v.size), dtype=complex)
    t_seg_start = 0.0
    idx = 0
    # samples exactly at t=0 (or zero-duration schedules)
    while idx < times.size and times[idx] <= 1e-300:
        sampled[idx] = v
        idx += 1
    for seg in schedule.segments:
        if seg.duration == 0.0:
            t_seg_start += 0.0
            continue
        t_end = t_seg_start + seg.duration
        lind = build_generator(model, (seg.detuning_1, seg.detuning_2),
                               seg.magnon_detuning, seg.coupling_on)
        prop = _Propagator(lind)
        t_cur = t_seg_start
        take = []
        while idx < times.size and times[idx] <= t_end * (1 + 1e-12):
            take.append(idx)
            idx += 1
        offs = times[take] - t_seg_start if take else np.array([])
        # uniform grids from the segment start propagate in one batch
        if (len(take) >= 3 and abs(offs[0]) < 1e-15 * seg.duration
                and np.allclose(np.diff(offs), offs[1] - offs[0],
                                rtol=1e-9, atol=0.0)):
            grid = prop.apply_grid(v, float(offs[-1]), len(take))
            for j, k in zip(range(len(take)), take):
                sampled[k] = grid[j]
            v = grid[-1]
            t_cur = t_seg_start + offs[-1]
        else:
            for k in take:
                v = prop.apply(v, times[k] - t_cur)
                t_cur = times[k]
                sampled[k] = v
        if t_end > t_cur:
            v = prop.apply(v, t_end - t_cur)
        t_seg_start = t_end

    rows, states = _measure_rows(model, sampled, target, check_positivity,
                                 "evolve")
    return SimulationTrace(
        times=times, p1e=np.array(rows["p1e"]), p2e=np.array(rows["p2e"]),
        n_mean=np.array(rows["n_mean"]),
        negativity_norm=np.array(rows["neg"]), chsh=np.array(rows["chsh"]),
        fidelity=np.array(rows["fid"]),
        fidelity_phase_max=np.array(rows["fidpm"]),
        qubit_states=states, frame=schedule.frame)


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------

_DELTA_IDLE_DEFAULT = TWO_PI * 5e6


def _transduction_schedule(model: OpenSystemModel, tau_var: float,
                           delta_idle: float,
                           use_idle_detuning: bool) -> ProtocolSchedule:
    tau_swap = np.pi / (2.0 * abs(model.g1))
    if use_idle_detuning:
        segs = (ScheduleSegment(tau_var, detuning_1=+delta_idle),
                ScheduleSegment(tau_swap, detuning_2=-delta_idle))
    else:
        segs = (ScheduleSegment(tau_var, coupling_on=(False, True)),
                ScheduleSegment(tau_swap, coupling_on=(True, False)))
    return ProtocolSchedule(segments=segs, frame="mode")


def transduction_target(model: OpenSystemModel,
                        delta_idle: float = _DELTA_IDLE_DEFAULT) -> np.ndarray:
    """(|ge> + e^{-i delta_idle * tau_swap} |eg>)/sqrt(2): the idled qubit's
    accumulated phase during the swap segment, in the mode rotating frame."""
    tau_swap = np.pi / (2.0 * abs(model.g1))
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1.0
    psi[2] = np.exp(-1j * delta_idle * tau_swap)
    return psi / np.sqrt(2.0)


def run_transduction(model: OpenSystemModel, tau_var: float,
                     delta_idle: float = _DELTA_IDLE_DEFAULT,
                     n_samples: int = 48,
                     use_idle_detuning: bool = True) -> SimulationTrace:
    """On-resonant transduction from |g>_1|e>_2 (x) thermal: qubit 2 swaps
    with the mode for tau_var, then qubit 1 performs a full iSWAP
    (tau_swap = pi/(2|g1|)); the trace covers both segments and ends at the
    protocol end."""
    if tau_var < 0:
        raise DomainError("tau_var must be non-negative")
    sched = _transduction_schedule(model, tau_var, delta_idle,
                                   use_idle_detuning)
    times = np.unique(np.concatenate([
        np.linspace(0.0, sched.total_time, n_samples),
        [tau_var, sched.total_time]]))
    return evolve(model, initial_ge_state(model), sched, times,
                  target=transduction_target(model, delta_idle))


def transduction_endpoint_sweep(model: OpenSystemModel,
                                tau_vars: Sequence[float],
                                delta_idle: float = _DELTA_IDLE_DEFAULT,
                                use_idle_detuning: bool = True) -> SimulationTrace:
    """End-of-protocol metrics versus the total interaction time
    tau_var + tau_swap (one protocol run per grid point, batched); the
    returned trace's ``times`` are the total interaction times."""
    tau_vars = np.asarray(tau_vars, dtype=float)
    if tau_vars.size < 2 or np.any(np.diff(tau_vars) <= 0) or tau_vars[0] < 0:
        raise DomainError("tau_vars must be increasing and non-negative")
    if not np.allclose(np.diff(tau_vars), tau_vars[1] - tau_vars[0]):
        raise DomainError("tau_vars must be uniformly spaced")
    tau_swap = np.pi / (2.0 * abs(model.g1))
    lind1 = build_generator(
        model,
        (+delta_idle, 0.0) if use_idle_detuning else (0.0, 0.0),
        coupling_on=(True, True) if use_idle_detuning else (False, True))
    lind2 = build_generator(
        model,
        (0.0, -delta_idle) if use_idle_detuning else (0.0, 0.0),
        coupling_on=(True, True) if use_idle_detuning else (True, False))
    prop1, prop2 = _Propagator(lind1), _Propagator(lind2)
    v0 = initial_ge_state(model).reshape(-1)
    v0 = prop1.apply(v0, float(tau_vars[0]))
    grid = prop1.apply_grid(v0, float(tau_vars[-1] - tau_vars[0]),
                            tau_vars.size)
    if prop2.dense:
        finals = np.array([prop2.apply(v, tau_swap) for v in grid])
    else:
        finals = expm_multiply(prop2.lind * tau_swap, grid.T).T
    rows, states = _measure_rows(model, finals,
                                 transduction_target(model, delta_idle),
                                 True, "transduction sweep")
    return SimulationTrace(
        times=tau_vars + tau_swap, p1e=np.array(rows["p1e"]),
        p2e=np.array(rows["p2e"]), n_mean=np.array(rows["n_mean"]),
        negativity_norm=np.array(rows["neg"]), chsh=np.array(rows["chsh"]),
        fidelity=np.array(rows["fid"]),
        fidelity_phase_max=np.array(rows["fidpm"]),
        qubit_states=states, frame="mode")


def _golden_max(f, lo: float, hi: float, tol: float, max_iter: int = 40):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def peak_transduction_fidelity(model: OpenSystemModel,
                               delta_idle: float = _DELTA_IDLE_DEFAULT,
                               use_idle_detuning: bool = True,
                               phase_max: bool = False,
                               n_grid: int = 81):
    """(tau_var*, peak fidelity) over the variable-segment duration, by a
    batched grid scan plus golden-section refinement."""
    tau_swap = np.pi / (2.0 * abs(model.g1))
    tau_max = 2.0 * tau_swap
    target = transduction_target(model, delta_idle)

    lind1 = build_generator(
        model,
        (+delta_idle, 0.0) if use_idle_detuning else (0.0, 0.0),
        coupling_on=(True, True) if use_idle_detuning else (False, True))
    lind2 = build_generator(
        model,
        (0.0, -delta_idle) if use_idle_detuning else (0.0, 0.0),
        coupling_on=(True, True) if use_idle_detuning else (True, False))
    prop1, prop2 = _Propagator(lind1), _Propagator(lind2)

    v0 = initial_ge_state(model).reshape(-1)
    grid = prop1.apply_grid(v0, tau_max, n_grid)           # (n_grid, dim^2)
    if prop2.dense:
        finals = np.array([prop2.apply(g, tau_swap) for g in grid])
    else:
        finals = expm_multiply(prop2.lind * tau_swap, grid.T).T

    def fid_of_vec(v):
        rho4 = reduced_qubit_state(v.reshape(model.dim, model.dim),
                                   model.n_max)
        return (_phase_max_fidelity(rho4) if phase_max
                else fidelity_to_target(rho4, target))

    fids = np.array([fid_of_vec(v) for v in finals])
    taus = np.linspace(0.0, tau_max, n_grid)
    j = int(np.argmax(fids))

    def fid_of_tau(tau):
        v = prop2.apply(prop1.apply(v0, tau), tau_swap)
        return fid_of_vec(v)

    lo = taus[max(0, j - 1)]
    hi = taus[min(n_grid - 1, j + 1)]
    tau_best, f_best = _golden_max(fid_of_tau, lo, hi,
                                   tol=(taus[1] - taus[0]) * 1e-3)
    if fids[j] > f_best:
        tau_best, f_best = taus[j], fids[j]
    return float(tau_best), float(f_best)


def virtual_exchange_target() -> np.ndarray:
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1.0
    psi[2] = -1j
    return psi / np.sqrt(2.0)


def exchange_rabi_frequency(model: OpenSystemModel,
                            delta_omega: float) -> float:
    """Generalized Rabi frequency of the single-excitation bright-state /
    mode oscillation: Omega = sqrt(delta^2 + 4(|g1|^2 + |g2|^2))."""
    return float(np.sqrt(delta_omega**2
                         + 4.0 * (abs(model.g1)**2 + abs(model.g2)**2)))


def special_sample_times(model: OpenSystemModel, delta_omega: float,
                         total_time: float) -> np.ndarray:
    """Full-revival times t_m = 2 pi m / Omega at which the fast oscillation
    returns to its envelope (fidelity nodes land exactly on these)."""
    omega = exchange_rabi_frequency(model, delta_omega)
    m_max = int(np.floor(total_time * omega / TWO_PI))
    return TWO_PI * np.arange(1, m_max + 1) / omega


def run_virtual_exchange(model: OpenSystemModel, delta_omega: float,
                         total_time: float,
                         n_samples: int = 240) -> SimulationTrace:
    """Off-resonant exchange: single segment with the mode detuned by
    +delta_omega (qubit rotating frame); sampled on a uniform grid plus the
    special full-revival times."""
    if total_time <= 0:
        raise DomainError("total_time must be positive")
    sched = ProtocolSchedule(
        segments=(ScheduleSegment(total_time, magnon_detuning=delta_omega),),
        frame="qubit")
    t_uniform = np.linspace(0.0, total_time, n_samples)
    t_special = special_sample_times(model, delta_omega, total_time)
    v0 = initial_ge_state(model).reshape(-1)
    lind = build_generator(model, magnon_detuning=delta_omega)
    prop = _Propagator(lind)
    grid_u = prop.apply_grid(v0, total_time, n_samples)
    if t_special.size:
        step = t_special[0]
        grid_s = prop.apply_grid(v0, float(t_special[-1]),
                                 t_special.size + 1)[1:]
        times = np.concatenate([t_uniform, t_special])
        vecs = np.concatenate([grid_u, grid_s], axis=0)
    else:
        times, vecs = t_uniform, grid_u
    order = np.argsort(times, kind="stable")
    rows, states = _measure_rows(model, vecs[order], virtual_exchange_target(),
                                 True, "virtual exchange")
    return SimulationTrace(
        times=times[order], p1e=np.array(rows["p1e"]),
        p2e=np.array(rows["p2e"]), n_mean=np.array(rows["n_mean"]),
        negativity_norm=np.array(rows["neg"]), chsh=np.array(rows["chsh"]),
        fidelity=np.array(rows["fid"]),
        fidelity_phase_max=np.array(rows["fidpm"]),
        qubit_states=states, frame="qubit")


def peak_virtual_exchange_fidelity(model: OpenSystemModel,
                                   delta_omega: float,
                                   total_time: Optional[float] = None,
                                   phase_max: bool = False):
    """(t*, peak fidelity) of the off-resonant protocol, maximized over the
    special sample times (plus golden refinement of the envelope)."""
    g_eff = abs(model.g1 * model.g2) / abs(delta_omega)
    if total_time is None:
        total_time = 0.75 * np.pi / g_eff
    trace = run_virtual_exchange(model, delta_omega, total_time)
    fids = trace.fidelity_phase_max if phase_max else trace.fidelity
    j = int(np.argmax(fids))
    return float(trace.times[j]), float(fids[j])


# ---------------------------------------------------------------------------
# gate fidelity
# ---------------------------------------------------------------------------

def sqrt_iswap_unitary(model: OpenSystemModel, delta_omega: float):
    """(U, t_gate): the dispersive-limit two-qubit gate
    U = exp(-i H_eff t_gate), H_eff = -(1/delta)[|g1|^2 n1 + |g2|^2 n2
    + (g1 g2* s1+ s2- + h.c.)], at t_gate = pi/(4 |g_eff|)."""
    g_eff = model.g1 * np.conj(model.g2) / delta_omega
    t_gate = np.pi / (4.0 * abs(g_eff))
    n1 = np.diag([0.0, 0.0, 1.0, 1.0])
    n2 = np.diag([0.0, 1.0, 0.0, 1.0])
    ex = np.zeros((4, 4), dtype=complex)
    ex[2, 1] = model.g1 * np.conj(model.g2)      # s1+ s2- |ge> -> |eg>
    ex = ex + ex.conj().T
    h_eff = -(abs(model.g1)**2 * n1 + abs(model.g2)**2 * n2 + ex) / delta_omega
    return expm(-1j * h_eff * t_gate), t_gate


def gate_fidelity_curve(model: OpenSystemModel, delta_omega: float,
                        temperature: Optional[float] = None,
                        t_max: Optional[float] = None,
                        n_samples: int = 241,
                        constants: PhysicalConstants = PhysicalConstants()):
    """(times, fbar): average gate fidelity against the dispersive-limit
    square-root-of-iSWAP gate as a function of the interaction time.

    F_bar = (4 F_e + 1)/5 with the entanglement fidelity
    F_e = (1/64) sum_j Tr[U P_j^dag U^dag E_t(P_j)] over the 16 two-qubit
    Pauli operators (E_t is the evolved channel with the mode traced out).
    """
    if temperature is not None:
        n_th = thermal_occupation(model.omega_m, temperature, constants) \
            if temperature > 0 else 0.0
        n_max = max(model.n_max, adequate_cutoff(n_th))
        model = replace(model, n_th=n_th, n_max=n_max)
    u_gate, t_gate = sqrt_iswap_unitary(model, delta_omega)
    if t_max is None:
        t_max = 1.6 * t_gate
    times = np.linspace(0.0, t_max, n_samples)
    lind = build_generator(model, magnon_detuning=delta_omega)
    prop = _Propagator(lind)

    paulis1 = (np.eye(2, dtype=complex),) + _PAULIS
    basis = [np.kron(p, q) for p in paulis1 for q in paulis1]
    targets = [u_gate @ p @ u_gate.conj().T for p in basis]
    rho_th = thermal_state(model.n_th, model.n_max)
    dim = model.dim

    total = np.zeros(times.size)
    for p, tgt in zip(basis, targets):
        v = np.kron(p, rho_th).reshape(-1)
        grid = prop.apply_grid(v, t_max, n_samples)
        for i in range(times.size):
            ep = reduced_qubit_state(grid[i].reshape(dim, dim), model.n_max)
            total[i] += np.real(np.trace(tgt.conj().T @ ep))
    f_e = total / 64.0
    return times, (4.0 * f_e + 1.0) / 5.0


def average_gate_fidelity(model: OpenSystemModel, delta_omega: float,
                          temperature: Optional[float] = None,
                          constants: PhysicalConstants = PhysicalConstants()) -> float:
    """Peak of the average-gate-fidelity curve over the interaction time
    (the gate is read out at the revival nearest the nominal gate time)."""
    _, fbar = gate_fidelity_curve(model, delta_omega, temperature,
                                  constants=constants)
    return float(fbar.max())


# ---------------------------------------------------------------------------
# phase diagram and closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseDiagram:
    alpha: np.ndarray
    gamma2: np.ndarray
    fid_onres: np.ndarray       # (n_alpha, n_gamma2)
    fid_offres: np.ndarray
    winner: np.ndarray          # +1 transduction, -1 exchange, 0 tie
    slope: float                # boundary fit alpha*omega/g = slope*(gamma2/g) + offset
    offset: float


def _diagram_model(g: float, omega: float, alpha: float,
                   gamma2: float) -> OpenSystemModel:
    return OpenSystemModel(g1=g, g2=g, omega_m=omega, kappa=alpha * omega,
                           n_th=0.0, gamma2=gamma2, n_max=2)


def _diagram_onres_fidelity(g, omega, alpha, gamma2) -> float:
    """T=0 transduction with gated couplings, evaluated at the fixed times
    tau_swap/2 then tau_swap (phase-maximized Bell fidelity)."""
    model = _diagram_model(g, omega, alpha, gamma2)
    tau_swap = np.pi / (2.0 * g)
    v = initial_ge_state(model).reshape(-1)
    p1 = _Propagator(build_generator(model, coupling_on=(False, True)))
    p2 = _Propagator(build_generator(model, coupling_on=(True, False)))
    v = p2.apply(p1.apply(v, tau_swap / 2.0), tau_swap)
    rho4 = reduced_qubit_state(v.reshape(model.dim, model.dim), model.n_max)
    return _phase_max_fidelity(rho4)


def _diagram_offres_fidelity(g, omega, alpha, gamma2, delta_omega) -> float:
    """T=0 exchange, maximum phase-maximized fidelity over the special
    full-revival times covering one envelope period."""
    model = _diagram_model(g, omega, alpha, gamma2)
    g_eff = g * g / delta_omega
    total = 1.05 * np.pi / (2.0 * g_eff)
    lind = build_generator(model, magnon_detuning=delta_omega)
    prop = _Propagator(lind)
    t_special = special_sample_times(model, delta_omega, total)
    v = initial_ge_state(model).reshape(-1)
    best = 0.0
    t_prev = 0.0
    for t in t_special:
        v = prop.apply(v, t - t_prev)
        t_prev = t
        rho4 = reduced_qubit_state(v.reshape(model.dim, model.dim),
                                   model.n_max)
        best = max(best, _phase_max_fidelity(rho4))
    return best


def _boundary_alpha(g, omega, gamma2, delta_omega,
                    alpha_hi: float = 1e-4) -> float:
    """alpha at which the two protocols tie, by bisection (exchange wins at
    small alpha only if dephasing is small; transduction wins there)."""
    def diff(alpha):
        return (_diagram_onres_fidelity(g, omega, alpha, gamma2)
                - _diagram_offres_fidelity(g, omega, alpha, gamma2,
                                           delta_omega))
    lo, hi = 1e-12, alpha_hi
    d_lo, d_hi = diff(lo), diff(hi)
    if d_lo * d_hi > 0:
        raise DomainError("no protocol crossover in the scanned alpha range")
    for _ in range(40):
        mid = np.sqrt(lo * hi)
        d_mid = diff(mid)
        if d_mid * d_lo <= 0:
            hi = mid
        else:
            lo, d_lo = mid, d_mid
        if hi / lo < 1.0 + 1e-3:
            break
    return float(np.sqrt(lo * hi))


def protocol_phase_diagram(alpha_grid, gamma2_grid, delta_omega: float,
                           g: float, omega: float) -> PhaseDiagram:
    """T=0 winner map over (alpha, gamma2) with the simplified coupling-gated
    scheduling, plus a linear fit of the tie boundary
    alpha*omega/g = slope*(gamma2/g) + offset in the small-rate corner."""
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    gamma2_grid = np.asarray(gamma2_grid, dtype=float)
    fon = np.empty((alpha_grid.size, gamma2_grid.size))
    foff = np.empty_like(fon)
    for i, al in enumerate(alpha_grid):
        for j, g2 in enumerate(gamma2_grid):
            fon[i, j] = _diagram_onres_fidelity(g, omega, al, g2)
            foff[i, j] = _diagram_offres_fidelity(g, omega, al, g2,
                                                  delta_omega)
    winner = np.sign(fon - foff).astype(int)

    # boundary fit at small rates (independent of the plotting grid)
    g2_points = np.array([0.0, 1e-4, 2e-4, 3e-4]) * g
    alphas = np.array([_boundary_alpha(g, omega, g2, delta_omega)
                       for g2 in g2_points])
    y = alphas * omega / g
    x = g2_points / g
    slope, offset = np.polyfit(x, y, 1)
    return PhaseDiagram(alpha=alpha_grid, gamma2=gamma2_grid,
                        fid_onres=fon, fid_offres=foff, winner=winner,
                        slope=float(slope), offset=float(offset))


def node_detuning(n: int) -> float:
    """Detuning-to-coupling ratio at which the off-resonant protocol reaches
    unit closed-system fidelity: delta/g = 2 sqrt(2) (2n-1)/sqrt(4n-1)."""
    if n < 1:
        raise DomainError("node index n >= 1")
    return float(2.0 * np.sqrt(2.0) * (2 * n - 1) / np.sqrt(4 * n - 1))


def analytic_fidelity_limits(alpha: float, omega: float, g: float,
                             gamma2: float,
                             node: Optional[int] = None) -> float:
    """Small-rate fidelity limits (alpha*omega/g << 1, gamma2/g << 1):
    transduction when ``node`` is None, else the off-resonant protocol at
    the n-th detuning node."""
    x = alpha * omega / g
    y = gamma2 / g
    if node is None:
        return float(1.0 - 0.5 * (np.pi - 1.0) * x - (15.0 * np.pi / 32.0) * y)
    n = int(node)
    if n < 1:
        raise DomainError("node index n >= 1")
    cx = (4 * n - 1) ** 1.5 * np.pi / (16.0 * np.sqrt(2.0) * n**2)
    cy = (np.sqrt(4 * n - 1)
          * (-3 + 24 * n - 80 * n**2 + 128 * n**3 + 256 * n**4)
          * np.pi / (1024.0 * np.sqrt(2.0) * n**4))
    return float(1.0 - cx * x - cy * y)


def crossover_alpha(delta_omega: float, g: float, omega: float,
                    t2_star: float) -> float:
    """Damping below which transduction outperforms the off-resonant
    protocol: alpha* = (delta/g) / (4 (1 - 1/pi)) / (omega T2*)."""
    if t2_star <= 0 or omega <= 0 or g <= 0:
        raise DomainError("positive omega, g, t2_star required")
    return float((delta_omega / g) / (4.0 * (1.0 - 1.0 / np.pi))
                 / (omega * t2_star))
