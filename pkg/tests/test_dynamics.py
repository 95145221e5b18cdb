import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp, trapezoid
from scipy.linalg import expm

import oracles
from superrad.dynamics import (AmplitudeState, DynamicsError, IntegratorSettings,
                               initial_norm_decay_rate, markov_deviation, solve_exact,
                               solve_markov, step_moments)
from superrad.geometry import LatticeSpec, build_lattice
from superrad.hamiltonian import Model, build_single_excitation
from superrad.kernel import MEMORY_PREFACTOR, PhysicalParams

FAST = PhysicalParams(gamma=1e9)  # light crossing 20 cm takes 0.67 / gamma
SLOW = PhysicalParams(gamma=1e7)


def pair(d=20.0):
    # separation along y, dipole along z: angular factor 1
    return build_lattice(LatticeSpec((1, 2, 1), d))


def test_single_qubit_exact_and_markov_decay():
    one = build_lattice(LatticeSpec((1, 1, 1), 20.0))
    s = IntegratorSettings(dt=1e-3, t_end=1.0)
    init = AmplitudeState.basis(1, 0)
    exact = solve_exact(one, FAST, init, s)
    markov = solve_markov(one, FAST, Model.KM, init, s)
    assert abs(markov.norms[-1] - math.exp(-1.0)) < 1e-8
    assert abs(exact.norms[-1] - math.exp(-1.0)) < 1e-7
    np.testing.assert_allclose(markov.norms, np.exp(-markov.times), rtol=1e-12)


@pytest.mark.parametrize("model", list(Model))
def test_two_qubit_static_matches_closed_form(model):
    arr = pair()
    s = IntegratorSettings(dt=1e-3, t_end=0.5)
    g = build_single_excitation(arr, FAST, model).matrix[0, 1] / FAST.gamma
    traj = solve_markov(arr, FAST, model, AmplitudeState.basis(2, 0), s)
    T = traj.times
    ref = np.exp(-T / 2)[:, None] * np.stack([np.cos(g * T), -1j * np.sin(g * T)], axis=1)
    assert np.abs(traj.amplitudes - ref).max() < 1e-8


def test_four_qubit_static_matches_ode_solver():
    arr = build_lattice(LatticeSpec((1, 2, 2), 20.0, (0.3, 0.2, 1.0)))
    h = build_single_excitation(arr, FAST, Model.MEMORY_KERNEL).matrix / FAST.gamma
    c0 = np.array([0.5, 0.5j, -0.5, 0.5], dtype=complex)
    s = IntegratorSettings(dt=1e-3, t_end=0.2)
    traj = solve_markov(arr, FAST, Model.MEMORY_KERNEL, AmplitudeState(c0), s)

    def rhs(t, y):
        c = y[:4] + 1j * y[4:]
        dc = -1j * h @ c
        return np.concatenate([dc.real, dc.imag])

    sol = solve_ivp(rhs, (0, 0.2), np.concatenate([c0.real, c0.imag]), method="DOP853",
                    t_eval=traj.times, rtol=1e-12, atol=1e-14)
    ref = (sol.y[:4] + 1j * sol.y[4:]).T
    assert np.abs(traj.amplitudes - ref).max() < 1e-7


def _W_oracle(x, u_grid, log_term=True):
    """Running integral I(x, u) on a grid by adaptive quadrature, piecewise."""
    if not log_term:
        return 2 * math.pi * (np.exp(1j * np.minimum(u_grid, x)) - 1) / (1j * x)

    def piece(f, a, b):
        return quad(f, a, b, limit=200, epsabs=1e-14, epsrel=1e-12)[0]

    def c(v):
        return math.cos(v) * math.log((x + v) / abs(x - v))

    def s(v):
        return math.sin(v) * math.log((x + v) / abs(x - v))

    out = np.zeros(len(u_grid), dtype=complex)
    acc = 0j
    for k in range(1, len(u_grid)):
        a, b = u_grid[k - 1], u_grid[k]
        cuts = [a, x, b] if a < x < b else [a, b]
        for lo, hi in zip(cuts, cuts[1:]):
            acc += complex(piece(c, lo, hi), piece(s, lo, hi))
        m = min(b, x)
        box = 2 * math.pi * (np.exp(1j * m) - 1) / (1j * x)
        out[k] = box - (2j / x) * acc
    return out


def _scalar_volterra(x, alpha, a, dt, n_steps, log_term=True):
    """Trapezoid-rule solution of the symmetric two-qubit amplitude equation."""
    u = alpha * dt * np.arange(n_steps + 1)
    W = _W_oracle(x, u, log_term)
    k = MEMORY_PREFACTOR * a
    c = np.zeros(n_steps + 1, dtype=complex)
    c[0] = 1.0 / math.sqrt(2.0)
    for n in range(1, n_steps + 1):
        # W[0] = 0, so the unknown only enters the local decay term
        decay = dt * (0.5 * c[0] + c[1:n].sum())
        memory = dt * (0.5 * W[n] * c[0] + (W[n - 1:0:-1] * c[1:n]).sum())
        c[n] = (c[0] - 0.5 * decay - k * memory) / (1 + 0.25 * dt)
    return c


@pytest.mark.parametrize("log_term", [True, False])
def test_symmetric_state_vs_scalar_volterra(log_term):
    arr = pair()
    x = FAST.k_a * 20.0
    alpha = FAST.omega_a / FAST.gamma
    dt, t_end = 1e-3, 1.0
    init = AmplitudeState(np.array([1.0, 1.0]) / math.sqrt(2.0))
    traj = solve_exact(arr, FAST, init, IntegratorSettings(dt, t_end), log_term=log_term)
    n = traj.amplitudes.shape[0] - 1
    coarse = _scalar_volterra(x, alpha, 1.0, 2 * dt, n // 2, log_term)
    fine = _scalar_volterra(x, alpha, 1.0, dt, n, log_term)
    ref = (4 * fine[::2] - coarse) / 3
    np.testing.assert_allclose(traj.amplitudes[:, 0], traj.amplitudes[:, 1], rtol=0, atol=1e-14)
    assert np.abs(traj.amplitudes[::2, 0] - ref).max() < 1e-6


def test_convergence_order():
    arr = pair()
    init = AmplitudeState.basis(2, 0)
    finals = [solve_exact(arr, FAST, init, IntegratorSettings(dt, 1.0)).amplitudes[-1]
              for dt in (1e-3, 5e-4, 2.5e-4)]
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    order = math.log2(e1 / e2)
    assert 1.7 <= order <= 2.3


def test_first_order_scheme_converges_linearly():
    arr = pair()
    init = AmplitudeState.basis(2, 0)
    finals = [solve_exact(arr, FAST, init, IntegratorSettings(dt, 0.5, scheme_order=1)).amplitudes[-1]
              for dt in (1e-3, 5e-4, 2.5e-4)]
    order = math.log2(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2]))
    assert 0.7 <= order <= 1.3


@pytest.mark.parametrize("time_dependent", [False, True])
def test_markov_deviation_small_at_early_times(time_dependent):
    arr = pair()
    s = IntegratorSettings(dt=0.05 / 80, t_end=0.05)
    init = AmplitudeState.basis(2, 0)
    exact = solve_exact(arr, SLOW, init, s)
    markov = solve_markov(arr, SLOW, Model.MEMORY_KERNEL, init, s, time_dependent=time_dependent)
    dev = markov_deviation(exact, markov)
    assert dev.max_deviation[0] == 0.0
    assert dev.peak < 0.05
    assert dev.final >= dev.max_deviation[0]


def test_norm_never_grows():
    arr = build_lattice(LatticeSpec((1, 2, 2), 20.0))
    traj = solve_exact(arr, FAST, AmplitudeState.basis(4, 0), IntegratorSettings(1e-3, 1.0))
    assert traj.norms.max() <= 1 + 1e-6
    assert traj.norms[-1] < traj.norms[0]


@pytest.mark.parametrize("model", list(Model))
def test_trace_identity_for_initial_decay(model):
    arr = build_lattice(LatticeSpec((2, 2, 1), 20.0))
    assert initial_norm_decay_rate(arr, FAST, model) == pytest.approx(1.0, abs=1e-6)


def test_box_part_saturates_after_light_crossing():
    x = 7.0
    du = 0.05
    m0, _ = step_moments(x, du, 400, log_term=False)
    u = du * np.arange(401)
    after = u[:-1] >= x
    saturated = oracles.box_term(x) * du
    np.testing.assert_allclose(m0[after], saturated, rtol=1e-13)
    # before the crossing it varies, following the closed form
    before = np.flatnonzero(u[1:] <= x)
    k = before[len(before) // 2]
    ref = quad(lambda v: math.cos(v) - 1, u[k], u[k + 1])[0] + \
        1j * quad(lambda v: math.sin(v), u[k], u[k + 1])[0]
    assert m0[k] == pytest.approx(2 * math.pi * ref / (1j * x), rel=1e-12)
    assert abs(m0[before[1]] - m0[before[-1]]) > 1e-3


def test_step_moments_against_quadrature():
    x, du, per = 3.31, 0.2, 128
    m0, m1 = step_moments(x, du, 30)
    u = du * np.arange(31)
    grid = np.linspace(0, 30 * du, 30 * per + 1)
    W = _W_oracle(x, grid)

    def trap(f, step):
        # Richardson-refined trapezoid over one step on the oracle grid
        fine = slice(per * step, per * (step + 1) + 1)
        coarse = slice(per * step, per * (step + 1) + 1, 2)
        a = trapezoid(f[fine], grid[fine])
        b = trapezoid(f[coarse], grid[coarse])
        return (4 * a - b) / 3

    for m in (0, 5, 16, 29):
        ref0 = trap(W, m)
        ref1 = trap(W * (grid - u[m]) / du, m)
        assert abs(m0[m] - ref0) < 1e-6 * abs(ref0)
        assert abs(m1[m] - ref1) < 1e-6 * abs(ref0)


def test_settings_validation():
    arr = pair()
    with pytest.raises(DynamicsError):
        IntegratorSettings(dt=-1.0, t_end=1.0)
    with pytest.raises(DynamicsError):
        IntegratorSettings(dt=1e-3, t_end=1.0, scheme_order=3)
    with pytest.raises(DynamicsError):
        _ = IntegratorSettings(dt=3e-4, t_end=1e-3).n_steps
    with pytest.raises(DynamicsError, match="1e-3"):
        IntegratorSettings(dt=2e-3, t_end=0.02).validate(arr, FAST)
    with pytest.raises(DynamicsError, match="min"):
        IntegratorSettings(dt=1e-3, t_end=0.02).validate(arr, SLOW)
    with pytest.raises(DynamicsError, match="budget"):
        IntegratorSettings(dt=1e-3, t_end=10.0, max_history_bytes=1000).validate(arr, FAST, 1)


def test_bad_initial_states_and_sizes():
    arr = pair()
    s = IntegratorSettings(1e-3, 0.01)
    with pytest.raises(DynamicsError):
        solve_exact(arr, FAST, AmplitudeState(np.array([1.0, 1.0])), s)
    with pytest.raises(DynamicsError):
        solve_exact(arr, FAST, AmplitudeState(np.array([1.0])), s)
    big = build_lattice(LatticeSpec((1, 1, 7), 20.0))
    with pytest.raises(DynamicsError):
        solve_exact(big, FAST, AmplitudeState.basis(7, 0), s)
    with pytest.raises(DynamicsError):
        solve_markov(arr, FAST, Model.KM, AmplitudeState.basis(2, 0), s, time_dependent=True)


def test_time_dependent_markov_tracks_exact_better():
    arr = pair()
    s = IntegratorSettings(dt=0.05 / 80, t_end=0.05)
    init = AmplitudeState.basis(2, 0)
    exact = solve_exact(arr, SLOW, init, s)
    static = markov_deviation(exact, solve_markov(arr, SLOW, Model.MEMORY_KERNEL, init, s))
    moving = markov_deviation(
        exact, solve_markov(arr, SLOW, Model.MEMORY_KERNEL, init, s, time_dependent=True))
    assert moving.peak < static.peak


def test_static_step_is_matrix_exponential():
    arr = pair()
    s = IntegratorSettings(1e-3, 2e-3)
    traj = solve_markov(arr, FAST, Model.KM, AmplitudeState.basis(2, 1), s)
    h = build_single_excitation(arr, FAST, Model.KM).matrix / FAST.gamma
    np.testing.assert_allclose(traj.amplitudes[2], expm(-2e-3j * h)[:, 1], atol=1e-15)
