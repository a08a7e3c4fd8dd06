import numpy as np
import pytest

from magnonlab.constants import DomainError, TWO_PI
from magnonlab.lindblad import (OpenSystemModel, ProtocolSchedule,
                                ScheduleSegment, adequate_cutoff,
                                analytic_fidelity_limits, chsh_violation,
                                crossover_alpha, evolve,
                                exchange_rabi_frequency, fidelity_to_target,
                                gate_fidelity_curve, initial_ge_state,
                                negativity, node_detuning,
                                peak_transduction_fidelity,
                                peak_virtual_exchange_fidelity,
                                reduced_qubit_state, run_transduction,
                                run_virtual_exchange, special_sample_times,
                                sqrt_iswap_unitary, thermal_state,
                                transduction_endpoint_sweep,
                                transduction_target, virtual_exchange_target)

G = TWO_PI * 517e3
OMEGA = TWO_PI * 2.78e9


def _closed_model(g1=G, g2=-G, n_max=6, **kw):
    return OpenSystemModel(g1=g1, g2=g2, omega_m=OMEGA, kappa=0.0,
                           n_th=0.0, gamma2=0.0, n_max=n_max, **kw)


def _bell_ge_plus_eg():
    v = np.zeros(4, dtype=complex)
    v[1] = v[2] = 1.0 / np.sqrt(2.0)
    return v


def _qubit_mode_state(rho_q, rho_m):
    return np.kron(np.asarray(rho_q, dtype=complex),
                   np.asarray(rho_m, dtype=complex))


def _fock(n0, n_max):
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[n0, n0] = 1.0
    return rho


def _proj(index):
    rho = np.zeros((4, 4), dtype=complex)
    rho[index, index] = 1.0
    return rho


# -- states, metrics, helpers --------------------------------------------------

def test_thermal_state_and_cutoff():
    n_th = 0.3
    n_max = adequate_cutoff(n_th)
    rho = thermal_state(n_th, n_max)
    p = np.diag(rho).real
    assert np.isclose(p.sum(), 1.0, atol=1e-12)
    assert np.isclose(np.dot(p, np.arange(n_max + 1)), n_th, atol=1e-4)
    assert p[1] / p[0] == pytest.approx(n_th / (1 + n_th), rel=1e-9)
    assert np.all(np.diag(thermal_state(0.0, 4)) == [1, 0, 0, 0, 0])


def test_cutoff_adequacy_enforced():
    with pytest.raises(DomainError):
        OpenSystemModel(g1=G, g2=G, omega_m=OMEGA, kappa=1.0, n_th=5.0,
                        gamma2=0.0, n_max=6)
    assert adequate_cutoff(0.0) >= 1
    assert adequate_cutoff(1.0) > adequate_cutoff(0.1)
    n = adequate_cutoff(0.4)
    assert (0.4 / 1.4) ** (n + 1) < 1e-6


def test_negativity_reference_states():
    bell = np.outer(_bell_ge_plus_eg(), _bell_ge_plus_eg().conj())
    assert negativity(bell) == pytest.approx(0.5, abs=1e-12)
    assert negativity(_proj(1)) == pytest.approx(0.0, abs=1e-12)
    half = 0.5 * bell + 0.5 * np.eye(4) / 4
    assert 0.0 < negativity(half) < 0.5


def test_chsh_reference_states():
    bell = np.outer(_bell_ge_plus_eg(), _bell_ge_plus_eg().conj())
    assert chsh_violation(bell) == pytest.approx(1.0, abs=1e-9)
    assert chsh_violation(np.eye(4) / 4) == pytest.approx(0.0, abs=1e-12)
    # Werner family: violation vanishes for p <= 1/sqrt(2)
    for p, expect_pos in ((0.5, False), (0.6, False), (0.8, True)):
        w = p * bell + (1 - p) * np.eye(4) / 4
        assert (chsh_violation(w) > 1e-9) == expect_pos


def test_fidelity_trivial_cases():
    v = np.zeros(4, dtype=complex)
    v[1] = 1.0
    rho = np.outer(v, v.conj())
    assert fidelity_to_target(rho, v) == pytest.approx(1.0)
    w = np.zeros(4, dtype=complex)
    w[2] = 1.0
    assert fidelity_to_target(rho, w) == pytest.approx(0.0, abs=1e-15)
    bell = _bell_ge_plus_eg()
    assert fidelity_to_target(np.outer(bell, bell.conj()), v) \
        == pytest.approx(0.5, abs=1e-12)


def test_initial_state_and_reduction():
    model = _closed_model(n_max=3)
    rho = initial_ge_state(model)
    red = reduced_qubit_state(rho, model.n_max)
    assert red[1, 1].real == pytest.approx(1.0, abs=1e-12)
    assert np.trace(red).real == pytest.approx(1.0, abs=1e-12)


# -- open-system structural physics ----------------------------------------------

def _single_segment(duration, **kw):
    return ProtocolSchedule(
        segments=(ScheduleSegment(duration=duration, **kw),), frame="mode")


def test_thermal_relaxation_of_mode_population():
    # <n>(t) = n_th + (n0 - n_th) exp(-2 kappa t) for the linearly damped
    # mode; start in Fock |1> with both couplings off
    kappa = 2e5
    n_th = 0.4
    model = OpenSystemModel(g1=0.0, g2=0.0, omega_m=OMEGA, kappa=kappa,
                            n_th=n_th, gamma2=0.0, n_max=12)
    rho0 = _qubit_mode_state(_proj(1), _fock(1, model.n_max))
    sched = _single_segment(4e-6, coupling_on=(False, False))
    times = np.linspace(0.0, 4e-6, 40)
    trace = evolve(model, rho0, sched, times)
    expected = n_th + (1.0 - n_th) * np.exp(-2 * kappa * times)
    assert np.allclose(trace.n_mean, expected, atol=2e-6)


def test_two_qubit_coherence_decays_at_twice_gamma2():
    gamma2 = 5e4
    model = OpenSystemModel(g1=0.0, g2=0.0, omega_m=OMEGA, kappa=0.0,
                            n_th=0.0, gamma2=gamma2, n_max=2)
    v = _bell_ge_plus_eg()
    rho0 = _qubit_mode_state(np.outer(v, v.conj()), _fock(0, model.n_max))
    sched = _single_segment(8e-6, coupling_on=(False, False))
    times = np.linspace(0.0, 8e-6, 30)
    trace = evolve(model, rho0, sched, times, target=v)
    # F(t) = (1 + exp(-2 gamma2 t))/2: both qubits dephase the joint coherence
    expected = 0.5 * (1.0 + np.exp(-2 * gamma2 * times))
    assert np.allclose(trace.fidelity, expected, atol=1e-8)


def test_detailed_balance_stationarity():
    n_th = 0.25
    model = OpenSystemModel(g1=0.0, g2=0.0, omega_m=OMEGA, kappa=3e5,
                            n_th=n_th, gamma2=0.0, n_max=10)
    rho0 = _qubit_mode_state(_proj(3), thermal_state(n_th, model.n_max))
    sched = _single_segment(5e-6, coupling_on=(False, False))
    times = np.linspace(0.0, 5e-6, 15)
    trace = evolve(model, rho0, sched, times)
    assert np.allclose(trace.n_mean, trace.n_mean[0], atol=1e-9)


def test_vacuum_rabi_oscillation():
    # qubit 1 excited, mode vacuum: p1e(t) = cos^2(|g| t)
    model = OpenSystemModel(g1=G, g2=0.0, omega_m=OMEGA, kappa=0.0,
                            n_th=0.0, gamma2=0.0, n_max=4)
    rho0 = _qubit_mode_state(_proj(2), _fock(0, model.n_max))
    total = np.pi / G
    sched = _single_segment(total)
    times = np.linspace(0.0, total, 60)
    trace = evolve(model, rho0, sched, times)
    assert np.allclose(trace.p1e, np.cos(G * times) ** 2, atol=1e-8)


def test_trace_and_positivity_preserved_hot():
    model = OpenSystemModel(g1=G, g2=-G, omega_m=OMEGA, kappa=1e4,
                            n_th=0.5, gamma2=1e3, n_max=12)
    trace = run_transduction(model, np.pi / (4 * G), n_samples=12)
    # evolve() raises if any sampled state loses trace or positivity;
    # additionally every probability-like output stays in [0, 1 + eps]
    for arr in (trace.p1e, trace.p2e):
        assert np.all(arr > -1e-9) and np.all(arr < 1 + 1e-9)
    assert np.all(trace.n_mean >= -1e-9)


def test_zero_duration_schedule_identity():
    model = _closed_model(n_max=2)
    rho0 = initial_ge_state(model)
    sched = _single_segment(0.0)
    trace = evolve(model, rho0, sched, [0.0],
                   target=transduction_target(model))
    assert trace.p2e[0] == pytest.approx(1.0, abs=1e-12)
    assert trace.n_mean[0] == pytest.approx(0.0, abs=1e-12)


# -- protocols -------------------------------------------------------------------

def test_closed_system_transduction_perfect():
    model = _closed_model(n_max=4)
    _, fid = peak_transduction_fidelity(model, use_idle_detuning=False,
                                        phase_max=True, n_grid=41)
    assert fid == pytest.approx(1.0, abs=1e-6)


def test_transduction_endpoint_sweep_consistent_with_single_runs():
    model = OpenSystemModel(g1=G, g2=-G, omega_m=OMEGA, kappa=1e3,
                            n_th=0.1, gamma2=1e3, n_max=6)
    taus = np.linspace(0.0, np.pi / (2 * G), 5)
    sweep = transduction_endpoint_sweep(model, taus)
    for i in (0, 2, 4):
        single = run_transduction(model, taus[i], n_samples=8)
        assert sweep.fidelity[i] == pytest.approx(single.fidelity[-1],
                                                  abs=1e-9)
    with pytest.raises(DomainError):
        transduction_endpoint_sweep(model, [0.0, 1e-6, 1.5e-6])


def test_closed_system_exchange_node_perfect():
    # at the first fidelity node of the dispersive protocol the residual
    # qubit-mode entanglement vanishes
    delta = node_detuning(1) * G
    model = _closed_model(n_max=4)
    _, fid = peak_virtual_exchange_fidelity(model, delta, phase_max=True)
    assert fid == pytest.approx(1.0, abs=1e-3)


def test_exchange_rabi_frequency_and_special_times():
    delta = 5.0 * G
    model = _closed_model()
    omega = exchange_rabi_frequency(model, delta)
    assert omega == pytest.approx(np.sqrt(delta**2 + 8 * G**2), rel=1e-12)
    total = 3.5 * TWO_PI / omega
    times = special_sample_times(model, delta, total)
    assert np.allclose(times, TWO_PI * np.arange(1, 4) / omega)


def test_dispersive_mode_population_suppressed():
    delta = 10 * G
    model = _closed_model(n_max=4)
    trace = run_virtual_exchange(model, delta,
                                 total_time=np.pi * delta / (4 * G**2),
                                 n_samples=200)
    bound = 8 * G**2 / (delta**2 + 8 * G**2)
    assert np.max(trace.n_mean) < 1.5 * bound


def test_exchange_oscillation_frequency_matches_geff():
    from magnonlab.bar import bar_geff
    from scipy.signal import argrelmax
    delta = 20 * G
    g_eff = abs(bar_geff(G, -G, delta))
    model = _closed_model(n_max=3)
    trace = run_virtual_exchange(model, delta,
                                 total_time=2.2 * np.pi / g_eff,
                                 n_samples=600)
    # p1e ~ sin^2(g_eff t): first maximum at pi/(2 g_eff), then every
    # pi/g_eff
    peaks = argrelmax(trace.p1e, order=5)[0]
    assert len(peaks) >= 2
    assert trace.times[peaks[0]] == pytest.approx(np.pi / (2 * g_eff),
                                                  rel=0.05)
    assert trace.times[peaks[1]] - trace.times[peaks[0]] \
        == pytest.approx(np.pi / g_eff, rel=0.05)


def test_exchange_fock_insensitivity():
    # the dispersive gate is insensitive to the mode's Fock state up to
    # O((g/Delta)^2) corrections
    delta = 15 * G
    eps = (G / delta) ** 2
    fids = []
    for n0 in (0, 1, 2):
        model = _closed_model(n_max=6)
        rho0 = _qubit_mode_state(_proj(1), _fock(n0, model.n_max))
        total = np.pi * delta / (4 * G**2)
        sched = ProtocolSchedule(
            segments=(ScheduleSegment(duration=total,
                                      magnon_detuning=delta),),
            frame="qubit")
        omega = exchange_rabi_frequency(model, delta)
        times = np.sort(np.concatenate([
            np.linspace(0.0, total, 160),
            special_sample_times(model, delta, total)]))
        trace = evolve(model, rho0, sched, times,
                       target=virtual_exchange_target())
        fids.append(np.max(trace.fidelity_phase_max))
    assert abs(fids[1] - fids[0]) < 20 * eps
    assert abs(fids[2] - fids[0]) < 40 * eps


def test_sqrt_iswap_unitary_matrix():
    delta = 12 * G
    model = _closed_model()
    u, t_gate = sqrt_iswap_unitary(model, delta)
    g_eff = G**2 / delta
    assert t_gate == pytest.approx(np.pi / (4 * g_eff), rel=1e-9)
    ref = np.array([[1, 0, 0, 0],
                    [0, (1 + 1j) / 2, (1 - 1j) / 2, 0],
                    [0, (1 - 1j) / 2, (1 + 1j) / 2, 0],
                    [0, 0, 0, 1]], dtype=complex)
    # compare up to single-qubit phases: the exchange block must swap half
    # the population with a pi/2 relative phase
    assert abs(u[1, 2]) == pytest.approx(abs(ref[1, 2]), abs=1e-9)
    assert abs(u[1, 1]) == pytest.approx(abs(ref[1, 1]), abs=1e-9)
    rel = u[1, 2] / u[1, 1]
    assert rel == pytest.approx((1 - 1j) / (1 + 1j), abs=1e-9) or \
        rel == pytest.approx((1 + 1j) / (1 - 1j), abs=1e-9)
    assert np.allclose(u @ u.conj().T, np.eye(4), atol=1e-10)
    assert abs(u[0, 0]) == pytest.approx(1.0, abs=1e-12)


# -- analytic limits and crossover -------------------------------------------------

def test_analytic_limits_closed_system():
    assert analytic_fidelity_limits(0.0, OMEGA, G, 0.0) \
        == pytest.approx(1.0, abs=1e-12)
    assert analytic_fidelity_limits(0.0, OMEGA, G, 0.0, node=1) \
        == pytest.approx(1.0, abs=1e-12)


def test_analytic_onres_linear_coefficient():
    alpha = 1e-3 * G / OMEGA      # alpha * omega / g = 1e-3
    on = analytic_fidelity_limits(alpha, OMEGA, G, 0.0)
    assert 1.0 - on == pytest.approx((np.pi - 1) / 2 * 1e-3, rel=1e-9)


def test_node_detuning_values():
    assert node_detuning(1) == pytest.approx(2 * np.sqrt(2) / np.sqrt(3),
                                             rel=1e-12)
    assert node_detuning(5) == pytest.approx(5.838, abs=2e-3)
    vals = [node_detuning(n) for n in range(1, 8)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        node_detuning(0)


def test_crossover_alpha_reference():
    t2_star = 1e-3
    delta = node_detuning(5) * G
    val = crossover_alpha(delta, G, OMEGA, t2_star)
    expected = (delta / G) / (4 * (1 - 1 / np.pi)) / (OMEGA * t2_star)
    assert val == pytest.approx(expected, rel=1e-12)
    assert val == pytest.approx(1.2e-7, rel=0.05)
    with pytest.raises(DomainError):
        crossover_alpha(delta, G, OMEGA, 0.0)


# -- frozen protocol anchors --------------------------------------------------------

@pytest.fixture(scope="module")
def fig_model():
    return OpenSystemModel.from_physical(
        g1=G, g2=-G, omega_m=OMEGA, alpha=1e-5, t2_star=1e-3,
        temperature=70e-3)


def test_transduction_peak_70mk(fig_model):
    _, fid = peak_transduction_fidelity(fig_model, n_grid=41)
    assert fid == pytest.approx(0.8085, abs=0.01)


def test_exchange_peak_70mk(fig_model):
    _, fid = peak_virtual_exchange_fidelity(fig_model, TWO_PI * 3e6)
    assert fid == pytest.approx(0.9467, abs=0.01)


def test_gate_fidelity_convergence_large_detuning():
    model = _closed_model(n_max=4)
    _, fbar = gate_fidelity_curve(model, 30 * G, n_samples=121)
    assert np.max(fbar) == pytest.approx(0.9982, abs=2e-3)
