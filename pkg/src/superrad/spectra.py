"""Eigenspectra of the effective Hamiltonian and collective decay rates.

The collective rate of an eigenvalue ``lam`` is ``-Im(lam) - gamma/2``:
positive rates are superradiant, negative ones subradiant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .hamiltonian import EffectiveHamiltonian


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    collective_rates: np.ndarray
    gamma: float
    model: str = ""

    @property
    def n_qubits(self) -> int:
        return len(self.eigenvalues)

    @property
    def largest_rate(self) -> float:
        return float(self.collective_rates.max())

    @property
    def min_abs_rate(self) -> float:
        return float(np.abs(self.collective_rates).min())

    @property
    def superradiant_fraction(self) -> float:
        return float(np.mean(self.collective_rates > 0))

    @property
    def width(self) -> float:
        """Standard deviation of the collective rates."""
        return float(np.std(self.collective_rates))


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.counts)


def spectrum_from_eigenvalues(eigenvalues, gamma, model="") -> SpectrumResult:
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    rates = -eigenvalues.imag - 0.5 * gamma
    order = np.argsort(-rates, kind="stable")
    ev = eigenvalues[order]
    rt = rates[order]
    ev.setflags(write=False)
    rt.setflags(write=False)
    return SpectrumResult(eigenvalues=ev, collective_rates=rt, gamma=gamma, model=model)


def eigen_spectrum(h: EffectiveHamiltonian) -> SpectrumResult:
    """All eigenvalues of the (non-Hermitian) matrix, sorted by descending rate."""
    m = h.matrix
    try:
        ev = scipy.linalg.eigvals(m, overwrite_a=False, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectrumError(
            f"eigensolver failed for N={m.shape[0]} ({h.model.value} model): {exc}") from exc
    return spectrum_from_eigenvalues(ev, h.params.gamma, h.model.value)


def rate_histogram(spec, n_bins: int = 41) -> Histogram:
    """Uniform histogram of collective rates over their observed span.

    A rate on an interior edge goes to the lower bin; the smallest rate goes
    to the first bin and the largest to the last. If all rates coincide a
    single bin holds everything.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    rates = np.asarray(spec.collective_rates if isinstance(spec, SpectrumResult) else spec,
                       dtype=float)
    lo, hi = float(rates.min()), float(rates.max())
    if hi <= lo:
        half = 1e-6 * max(abs(lo), 1.0)
        return Histogram(bin_edges=np.array([lo - half, lo + half]), counts=np.array([rates.size]))
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.searchsorted(edges, rates, side="left") - 1
    idx = np.clip(idx, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return Histogram(bin_edges=edges, counts=counts)


def largest_collective_rate(spec: SpectrumResult) -> float:
    return spec.largest_rate


def min_abs_rate(spec: SpectrumResult) -> float:
    return spec.min_abs_rate
