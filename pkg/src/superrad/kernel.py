"""Pair coupling elements of the single-excitation effective Hamiltonian.

All integrals are done in reduced variables: ``x = k_a r`` for a pair at
separation ``r`` and ``u = omega_a s`` for a retarded time ``s``. With these,
the memory kernel integrated against the carrier ``exp(i omega_a s)`` becomes

    I(x, U) = (2 pi / x) * int_0^min(U, x) e^{iu} du
              - (2 i / x) * int_0^U e^{iu} ln((x + u) / |x - u|) du

and a memory-kernel element is ``-i (3 / 16 pi) Gamma (1 - cos^2 theta) I``.
Elements are returned in the same units as ``PhysicalParams.gamma``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn

from ._quadrature import graded_breakpoints, panel_nodes, taper_weights, TWO_PI
from .geometry import PairGeometry

C_LIGHT = 2.99792458e10  # cm/s
MEMORY_PREFACTOR = 3.0 / (16.0 * math.pi)  # (3 / 8 pi) * (1 / 2)


class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested relative tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved relative tolerance {achieved:.3e})")
        self.achieved = achieved


class SingularityError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Single-atom decay rate (1/s) and transition wavelength (cm)."""

    gamma: float = 1.0
    lambda_a: float = 9.0
    c_light: float = C_LIGHT

    def __post_init__(self):
        for name in ("gamma", "lambda_a", "c_light"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v!r}")

    @property
    def k_a(self) -> float:
        return TWO_PI / self.lambda_a

    @property
    def omega_a(self) -> float:
        return TWO_PI * self.c_light / self.lambda_a

    def reduced_distance(self, r):
        """``x = k_a r``; equal to ``omega_a * (r / c)``."""
        return self.k_a * np.asarray(r, dtype=float) if np.ndim(r) else self.k_a * float(r)


@dataclass(frozen=True)
class QuadratureSettings:
    """Controls for the memory-kernel integrals.

    ``singularity_pad`` is the half-width (in units of ``x``) of the window
    around ``u = x`` inside which the mesh is refined geometrically.
    ``averaging_passes`` is how many times the running integral is averaged
    over one period 2 pi to take the long-time limit.
    """

    rel_tol: float = 1e-8
    u_max_factor: float = 50.0
    singularity_pad: float = 1e-3
    averaging_passes: int = 6
    gl_order: int = 16
    max_gl_order: int = 64

    def __post_init__(self):
        if not 0 < self.rel_tol < 1e-3:
            raise ValueError(f"rel_tol must be in (0, 1e-3), got {self.rel_tol!r}")
        if not self.u_max_factor > 0:
            raise ValueError("u_max_factor must be > 0")
        if not self.singularity_pad > 0:
            raise ValueError("singularity_pad must be > 0")
        if self.averaging_passes < 1:
            raise ValueError("averaging_passes must be >= 1")
        if self.gl_order < 2 or self.max_gl_order < self.gl_order:
            raise ValueError("need 2 <= gl_order <= max_gl_order")


DEFAULT_QUADRATURE = QuadratureSettings()


def memory_kernel(s, r, params: PhysicalParams) -> complex:
    """Memory kernel ``G(s)`` for retarded time ``s`` (seconds), units 1/s."""
    if s < 0:
        raise ValueError("retarded time must be >= 0")
    if not r > 0:
        raise ValueError("separation must be > 0")
    tau = r / params.c_light
    if s == tau:
        raise SingularityError("memory kernel is logarithmically singular at s = r/c")
    ratio = s / tau
    box = TWO_PI / tau if 0.0 < ratio < 1.0 else 0.0
    return complex(box, -(2.0 / tau) * math.log((tau + s) / abs(tau - s)))


def _log_integrand(x, u):
    return np.exp(1j * u) * np.log((x + u) / np.abs(x - u))


def box_integral(x, U):
    """Closed form of ``(2 pi / x) int_0^min(U, x) e^{iu} du``."""
    m = min(U, x)
    return TWO_PI * (np.exp(1j * m) - 1.0) / (1j * x)


def _adaptive(evaluate, q: QuadratureSettings, what: str):
    n = q.gl_order
    prev = evaluate(n)
    achieved = math.inf
    while 2 * n <= q.max_gl_order:
        n *= 2
        cur = evaluate(n)
        scale = max(abs(cur), 1e-300)
        achieved = abs(cur - prev) / scale
        if achieved <= q.rel_tol:
            return cur
        prev = cur
    raise QuadratureError(f"{what} did not converge", achieved)


def log_integral(x: float, U: float, q: QuadratureSettings = DEFAULT_QUADRATURE) -> complex:
    """``int_0^U e^{iu} ln((x + u)/|x - u|) du`` on a graded mesh."""
    if U <= 0:
        return 0j
    edges = graded_breakpoints(0.0, U, x, q.singularity_pad * x)

    def evaluate(n):
        u, w = panel_nodes(edges, n)
        return complex(np.sum(w * _log_integrand(x, u)))

    return _adaptive(evaluate, q, f"log integral (x={x:.6g}, U={U:.6g})")


def running_integral(x: float, U: float, q: QuadratureSettings = DEFAULT_QUADRATURE) -> complex:
    """Reduced running integral ``I(x, U)`` of the retarded kernel."""
    if not x > 0:
        raise ValueError("reduced distance must be > 0")
    if U <= 0:
        return 0j
    return box_integral(x, U) - (2j / x) * log_integral(x, U, q)


def _period_averaged_log(x, U, q):
    passes = q.averaging_passes
    core_edges = graded_breakpoints(0.0, U, x, q.singularity_pad * x)
    hi = U + TWO_PI * passes
    tail_edges = graded_breakpoints(U, hi, x, q.singularity_pad * x, max_panel=np.pi / 2)

    def evaluate(n):
        u, w = panel_nodes(core_edges, n)
        core = np.sum(w * _log_integrand(x, u))
        u, w = panel_nodes(tail_edges, n)
        tail = np.sum(w * taper_weights(u, U, passes) * _log_integrand(x, u))
        return complex(core + tail)

    return _adaptive(evaluate, q, f"long-time log integral (x={x:.6g}, U={U:.6g})")


def long_time_integral(x: float, q: QuadratureSettings = DEFAULT_QUADRATURE) -> complex:
    """``lim_{U -> inf} I(x, U)`` by iterated period averaging of the running integral.

    The cutoff is ``u_max_factor * max(x, 1)``; the tail is accepted only if
    doubling the cutoff changes the result by at most ``rel_tol``.
    """
    if not x > 0:
        raise ValueError("reduced distance must be > 0")
    U = q.u_max_factor * max(x, 1.0)
    first = _period_averaged_log(x, U, q)
    second = _period_averaged_log(x, 2.0 * U, q)
    box = box_integral(x, math.inf)
    v1 = box - (2j / x) * first
    v2 = box - (2j / x) * second
    achieved = abs(v2 - v1) / max(abs(v2), 1e-300)
    if achieved > q.rel_tol:
        raise QuadratureError(f"long-time limit unstable under cutoff doubling (x={x:.6g})", achieved)
    return v2


class ElementCache:
    """Thread-safe memo of long-time integrals keyed by rounded ``x``.

    Concurrent callers either see a stored value or compute it themselves;
    the first stored value wins.
    """

    def __init__(self):
        self._data = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(x, q):
        return (round(float(x), 12), q)

    def long_time(self, x, q: QuadratureSettings = DEFAULT_QUADRATURE) -> complex:
        k = self.key(x, q)
        with self._lock:
            if k in self._data:
                return self._data[k]
        value = long_time_integral(k[0], q)
        with self._lock:
            return self._data.setdefault(k, value)

    def __len__(self):
        with self._lock:
            return len(self._data)

    def clear(self):
        with self._lock:
            self._data.clear()


default_cache = ElementCache()


def _memory_element(integral, cos2, params):
    if cos2 >= 1.0:
        return 0j
    return -1j * MEMORY_PREFACTOR * params.gamma * (1.0 - cos2) * integral


def markov_element(t: float, geom: PairGeometry, params: PhysicalParams,
                   q: QuadratureSettings = DEFAULT_QUADRATURE) -> complex:
    """Memory-kernel element at elapsed time ``t`` (seconds)."""
    if not t > 0:
        raise ValueError("elapsed time must be > 0")
    if geom.cos2 >= 1.0:
        return 0j
    x = params.reduced_distance(geom.r)
    return _memory_element(running_integral(x, params.omega_a * t, q), geom.cos2, params)


def asymptotic_element(geom: PairGeometry, params: PhysicalParams,
                       q: QuadratureSettings = DEFAULT_QUADRATURE,
                       cache: ElementCache | None = default_cache) -> complex:
    """Long-time (``t >> r/c``) limit of :func:`markov_element`."""
    if geom.cos2 >= 1.0:
        return 0j
    x = params.reduced_distance(geom.r)
    integral = cache.long_time(x, q) if cache is not None else long_time_integral(x, q)
    return _memory_element(integral, geom.cos2, params)


def km_reduced(x, cos2):
    """Closed-form element in units of Gamma; vectorized over ``x`` and ``cos2``."""
    x = np.asarray(x, dtype=float)
    cos2 = np.asarray(cos2, dtype=float)
    far = (1.0 - cos2) * spherical_jn(0, x)
    # cos x / x^2 - sin x / x^3 == -j1(x) / x, without the small-x cancellation
    near = (1.0 - 3.0 * cos2) * (-spherical_jn(1, x) / x)
    return -1j * 0.75 * (far + near)


def km_element(geom: PairGeometry, params: PhysicalParams) -> complex:
    x = params.reduced_distance(geom.r)
    return complex(params.gamma * km_reduced(x, geom.cos2))


def diagonal_element(params: PhysicalParams) -> complex:
    return complex(0.0, -0.5 * params.gamma)


def memory_reduced(x, cos2, q: QuadratureSettings = DEFAULT_QUADRATURE,
                   cache: ElementCache | None = default_cache):
    """Long-time memory-kernel elements in units of Gamma, vectorized.

    Each distinct ``x`` (after rounding) is integrated once.
    """
    x = np.asarray(x, dtype=float)
    cos2 = np.asarray(cos2, dtype=float)
    keys, inverse = np.unique(np.round(x, 12), return_inverse=True)
    if cache is None:
        vals = np.array([long_time_integral(k, q) for k in keys], dtype=complex)
    else:
        vals = np.array([cache.long_time(k, q) for k in keys], dtype=complex)
    integral = vals[inverse].reshape(x.shape)
    out = -1j * MEMORY_PREFACTOR * (1.0 - cos2) * integral
    return np.where(cos2 >= 1.0, 0j, out)
