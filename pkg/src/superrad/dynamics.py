"""Single-excitation amplitude dynamics: retarded (memory) equations versus Markov.

Time is measured in units of 1/gamma. Integrating the amplitude equations
once in time turns them into a Volterra equation of the second kind,

    c_j(T) = c_j(0) - (1/2) int_0^T c_j
             - (3 / 16 pi) sum_{j' != j} (1 - cos^2 theta_jj')
               int_0^T I(x_jj', alpha (T - T')) c_j'(T') dT',

with ``alpha = omega_a / gamma`` and ``I`` the reduced running integral of the
retarded kernel (see :mod:`superrad.kernel`). ``I`` is continuous, so product
integration against piecewise-linear ``c`` is second order; the logarithmic
singularity of the underlying kernel is resolved inside the step moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._quadrature import graded_breakpoints, panel_nodes
from .geometry import QubitArray, separations
from .hamiltonian import Model, build_single_excitation
from .kernel import (DEFAULT_QUADRATURE, MEMORY_PREFACTOR, PhysicalParams,
                     QuadratureSettings, running_integral)

MAX_EXACT_QUBITS = 6


class DynamicsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AmplitudeState:
    amplitudes: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @classmethod
    def basis(cls, n, j):
        a = np.zeros(n, dtype=complex)
        a[j] = 1.0
        return cls(a)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Amplitudes on a uniform grid; ``amplitudes[n]`` is the state at ``times[n]``."""

    times: np.ndarray
    amplitudes: np.ndarray
    label: str = ""

    @property
    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def state(self, n) -> AmplitudeState:
        return AmplitudeState(self.amplitudes[n], float(self.times[n]))

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class IntegratorSettings:
    """Uniform step ``dt`` and horizon ``t_end``, both in units of 1/gamma."""

    dt: float
    t_end: float
    scheme_order: int = 2
    max_history_bytes: int = 1 << 28

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end > 0:
            raise DynamicsError("dt and t_end must be > 0")
        if self.scheme_order not in (1, 2):
            raise DynamicsError(f"scheme_order must be 1 or 2, got {self.scheme_order}")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise DynamicsError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")
        return n

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def validate(self, array: QubitArray, params: PhysicalParams, pair_classes: int = 0):
        """Check step-size limits and the history memory budget.

        The step must satisfy ``dt <= 1e-3`` (in 1/gamma) and
        ``dt <= 0.1 * gamma * min(r/c)``.
        """
        if self.dt > 1e-3 * (1 + 1e-12):
            raise DynamicsError(f"dt={self.dt} exceeds 1e-3 / gamma")
        n = array.n_qubits
        if n > 1:
            r, _ = separations(array)
            r_min = float(r[r > 0].min())
            limit = 0.1 * params.gamma * r_min / params.c_light
            if self.dt > limit * (1 + 1e-12):
                raise DynamicsError(
                    f"dt={self.dt} exceeds 0.1 * min(r/c) = {limit:.3e} (units of 1/gamma)")
        steps = self.n_steps + 1
        need = 16 * steps * (n + 2 * pair_classes)
        if need > self.max_history_bytes:
            raise DynamicsError(
                f"history for {steps} steps needs {need} bytes, over the budget of "
                f"{self.max_history_bytes}; shorten t_end or raise gamma")
        return self


@dataclass(frozen=True, eq=False)
class DeviationSeries:
    times: np.ndarray
    max_deviation: np.ndarray

    @property
    def final(self) -> float:
        return float(self.max_deviation[-1])

    @property
    def peak(self) -> float:
        return float(self.max_deviation.max())


def _check_initial(array, initial):
    a = initial.amplitudes
    if a.shape != (array.n_qubits,):
        raise DynamicsError(f"initial state has {a.size} amplitudes for N={array.n_qubits}")
    if abs(initial.norm2 - 1.0) > 1e-10:
        raise DynamicsError(f"initial state must be normalized, |c|^2 = {initial.norm2}")
    return a


def _pair_classes(array, params):
    """Distinct reduced distances, class index and angular factor per ordered pair."""
    r, cos2 = separations(array)
    x = params.k_a * r
    keys, inverse = np.unique(np.round(x, 12), return_inverse=True)
    cls = inverse.reshape(x.shape)
    ang = 1.0 - cos2
    np.fill_diagonal(ang, 0.0)
    diag_cls = cls[0, 0]
    xs = [float(k) for k in keys]
    # the zero-separation class only ever appears on the diagonal
    classes = [k for k in range(len(xs)) if k != diag_cls]
    return xs, cls, ang, classes


def _box_values(x, u):
    m = np.minimum(u, x)
    return 2.0 * np.pi * (np.exp(1j * m) - 1.0) / (1j * x)


def _log_values(x, u):
    return np.exp(1j * u) * np.log((x + u) / np.abs(x - u))


def step_moments(x: float, du: float, n_steps: int, log_term: bool = True,
                 q: QuadratureSettings = DEFAULT_QUADRATURE, order: int = 16):
    """Moments of ``I(x, u)`` over the steps ``[m du, (m+1) du]``.

    Returns ``(m0, m1)`` with ``m0[m] = int I du`` and
    ``m1[m] = int I (u - u_m) / du du``.
    """
    a = np.arange(n_steps) * du
    b = a + du
    near = np.abs(np.clip(x, a, b) - x) < du
    m0 = np.zeros(n_steps, dtype=complex)
    m1 = np.zeros(n_steps, dtype=complex)
    j0 = np.zeros(n_steps, dtype=complex)  # int e^{iv} l(v) dv
    j1 = np.zeros(n_steps, dtype=complex)  # ... * (b - v)
    j2 = np.zeros(n_steps, dtype=complex)  # ... * ((b - a)^2 - (v - a)^2)

    def accumulate(sel, u, w):
        lo = a[sel][:, None] if u.ndim == 2 else a[sel]
        hi = b[sel][:, None] if u.ndim == 2 else b[sel]
        box = _box_values(x, u)
        s = (u - lo) / du
        m0[sel] += np.sum(w * box, axis=-1)
        m1[sel] += np.sum(w * box * s, axis=-1)
        if log_term:
            f = _log_values(x, u)
            j0[sel] += np.sum(w * f, axis=-1)
            j1[sel] += np.sum(w * f * (hi - u), axis=-1)
            j2[sel] += np.sum(w * f * ((hi - lo) ** 2 - (u - lo) ** 2), axis=-1)

    far = np.flatnonzero(~near)
    if far.size:
        t, wts = np.polynomial.legendre.leggauss(order)
        half = 0.5 * du
        u = a[far][:, None] + half * (t + 1.0)
        w = np.broadcast_to(half * wts, u.shape)
        accumulate(far, u, w)
    for m in np.flatnonzero(near):
        edges = graded_breakpoints(a[m], b[m], x, q.singularity_pad * du, max_panel=du)
        u, w = panel_nodes(edges, order)
        accumulate(np.array([m]), u.ravel()[None, :], w.ravel()[None, :])

    if log_term:
        lam_start = np.concatenate(([0j], np.cumsum(j0)[:-1]))
        # int_a^b Lambda(u) du and int_a^b Lambda(u) (u - a)/du du, Lambda(u) = int_0^u e^{iv} l
        lam0 = lam_start * du + j1
        lam1 = lam_start * (du / 2.0) + j2 / (2.0 * du)
        m0 += -(2j / x) * lam0
        m1 += -(2j / x) * lam1
    return m0, m1


def _product_weights(m0, m1, dt, du, order):
    """Convolution weights w[m] for history lag m and the end weight for c_0."""
    scale = dt / du
    n = len(m0)
    if order == 2:
        A = scale * (m0 - m1)
        B = scale * m1
        lag = np.zeros(n + 1, dtype=complex)
        lag[0] = A[0]
        lag[1:n] = B[:n - 1] + A[1:n]
        end = np.concatenate(([0j], B))  # end[n] = B[n-1]
    else:
        lag = np.concatenate((scale * m0, [0j]))  # lag[m] = weight of c_k, m = n - k >= 0
        end = np.zeros(n + 1, dtype=complex)
    return lag, end


def solve_exact(array: QubitArray, params: PhysicalParams, initial: AmplitudeState,
                settings: IntegratorSettings, q: QuadratureSettings = DEFAULT_QUADRATURE,
                log_term: bool = True) -> Trajectory:
    """March the retarded amplitude equations by product integration.

    ``log_term=False`` drops the logarithmic (Lamb-shift) part of the kernel
    and keeps only the box part; useful for isolating retardation effects.
    """
    n_q = array.n_qubits
    if n_q > MAX_EXACT_QUBITS:
        raise DynamicsError(f"exact dynamics is limited to N <= {MAX_EXACT_QUBITS}, got {n_q}")
    c0 = _check_initial(array, initial)
    xs, cls, ang, classes = _pair_classes(array, params)
    settings.validate(array, params, pair_classes=len(classes))
    M = settings.n_steps
    dt, order = settings.dt, settings.scheme_order
    du = params.omega_a / params.gamma * dt

    lag = {}
    end = {}
    for k in classes:
        m0, m1 = step_moments(xs[k], du, M, log_term, q)
        lag[k], end[k] = _product_weights(m0, m1, dt, du, order)

    # coupling matrices per class: kappa * angular factor, zero elsewhere
    couple = {k: MEMORY_PREFACTOR * np.where(cls == k, ang, 0.0) for k in classes}
    if order == 2:
        diag_now, diag_c0 = dt / 4.0, 1.0 - dt / 4.0
    else:
        diag_now, diag_c0 = dt / 2.0, 1.0
    lhs = (1.0 + diag_now) * np.eye(n_q, dtype=complex)
    for k in classes:
        lhs = lhs + couple[k] * lag[k][0]
    lu = scipy.linalg.lu_factor(lhs)

    C = np.zeros((M + 1, n_q), dtype=complex)
    C[0] = c0
    running = np.zeros(n_q, dtype=complex)  # sum_{k=1}^{n-1} c_k
    for n in range(1, M + 1):
        rhs = diag_c0 * c0 - (dt / 2.0) * running
        for k in classes:
            hist = lag[k][n - 1:0:-1] @ C[1:n] if n > 1 else np.zeros(n_q, dtype=complex)
            hist = hist + end[k][n] * c0
            rhs = rhs - couple[k] @ hist
        C[n] = scipy.linalg.lu_solve(lu, rhs)
        running += C[n]
    return Trajectory(times=settings.times(), amplitudes=C, label="exact")


def _time_dependent_h(array, params, q):
    xs, cls, ang, classes = _pair_classes(array, params)
    alpha = params.omega_a / params.gamma

    def h_at(T):
        m = np.zeros(cls.shape, dtype=complex)
        for k in classes:
            val = running_integral(xs[k], alpha * T, q) if T > 0 else 0j
            m += np.where(cls == k, -1j * MEMORY_PREFACTOR * ang * val, 0.0)
        np.fill_diagonal(m, -0.5j)
        return m

    return h_at


def solve_markov(array: QubitArray, params: PhysicalParams, model, initial: AmplitudeState,
                 settings: IntegratorSettings, q: QuadratureSettings = DEFAULT_QUADRATURE,
                 time_dependent: bool = False) -> Trajectory:
    """Integrate ``i dc/dT = (H / gamma) c`` with exponential steps.

    A static H (long-time memory-kernel limit or the closed-form model) is
    propagated exactly. With ``time_dependent`` the memory-kernel elements
    are evaluated at the current time; order 2 uses the midpoint rule and
    order 1 the left endpoint.
    """
    model = Model.parse(model)
    c0 = _check_initial(array, initial)
    M, dt = settings.n_steps, settings.dt
    C = np.zeros((M + 1, array.n_qubits), dtype=complex)
    C[0] = c0
    if not time_dependent:
        h = build_single_excitation(array, params, model, q).matrix / params.gamma
        step = scipy.linalg.expm(-1j * dt * h)
        for n in range(M):
            C[n + 1] = step @ C[n]
        return Trajectory(settings.times(), C, label=f"markov-{model.value}")
    if model is not Model.MEMORY_KERNEL:
        raise DynamicsError("time-dependent elements exist only for the memory-kernel model")
    h_at = _time_dependent_h(array, params, q)
    shift = 0.5 * dt if settings.scheme_order == 2 else 0.0
    for n in range(M):
        C[n + 1] = scipy.linalg.expm(-1j * dt * h_at(n * dt + shift)) @ C[n]
    return Trajectory(settings.times(), C, label="markov-kernel-t")


def markov_deviation(exact_traj: Trajectory, markov_traj: Trajectory) -> DeviationSeries:
    """Largest amplitude difference across states at every time point."""
    if exact_traj.amplitudes.shape != markov_traj.amplitudes.shape or not np.allclose(
            exact_traj.times, markov_traj.times, rtol=1e-12, atol=0.0):
        raise DynamicsError("trajectories are on different time grids")
    dev = np.max(np.abs(exact_traj.amplitudes - markov_traj.amplitudes), axis=1)
    return DeviationSeries(times=exact_traj.times.copy(), max_deviation=dev)


def initial_norm_decay_rate(array, params, model, q=DEFAULT_QUADRATURE, h=1e-6) -> float:
    """Mean over basis states of ``-d|c|^2/dT`` at T = 0, by central difference."""
    hm = build_single_excitation(array, params, model, q).matrix / params.gamma
    fwd = scipy.linalg.expm(-1j * h * hm)
    bwd = scipy.linalg.expm(1j * h * hm)
    rates = []
    for j in range(array.n_qubits):
        e = np.zeros(array.n_qubits, dtype=complex)
        e[j] = 1.0
        n_f = np.linalg.norm(fwd @ e) ** 2
        n_b = np.linalg.norm(bwd @ e) ** 2
        rates.append(-(n_f - n_b) / (2.0 * h))
    return math.fsum(rates) / len(rates)
