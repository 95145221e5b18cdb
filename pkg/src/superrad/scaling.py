"""N-sweeps of norm sums and largest collective rates, with power-law fits."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import LatticeSpec, build_lattice, corner_index
from .hamiltonian import Model, build_single_excitation, norm_sum_for_qubit
from .kernel import DEFAULT_QUADRATURE, PhysicalParams, QuadratureSettings
from .spectra import eigen_spectrum

DEFAULT_RATE_CAP = 11**3
DEFAULT_KERNEL_NORM_CAP = 12**3


class Quantity(str, enum.Enum):
    NORM_SUM = "norm_sum"
    LARGEST_RATE = "largest_rate"


@dataclass(frozen=True)
class ScalingPoint:
    n_qubits: int
    value: float
    meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ScalingSeries:
    points: tuple[ScalingPoint, ...]
    quantity: Quantity

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        ns = [p.n_qubits for p in self.points]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"N must be strictly increasing, got {ns}")
        for p in self.points:
            if not math.isfinite(p.value):
                raise ValueError(f"non-finite value at N={p.n_qubits}")
            if self.quantity is Quantity.NORM_SUM and p.value < 0:
                raise ValueError(f"negative norm sum at N={p.n_qubits}")

    @classmethod
    def from_arrays(cls, n_qubits, values, quantity=Quantity.NORM_SUM):
        return cls(tuple(ScalingPoint(int(n), float(v)) for n, v in zip(n_qubits, values)),
                   Quantity(quantity))

    @property
    def n_qubits(self) -> np.ndarray:
        return np.array([p.n_qubits for p in self.points], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points], dtype=float)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class PowerLawFit:
    """``value ~ exp(log_prefactor) * N**exponent``; residuals are in log space."""

    exponent: float
    log_prefactor: float
    rms_residual: float
    exponent_stderr: float
    n_points: int

    @property
    def prefactor(self) -> float:
        return math.exp(self.log_prefactor)

    def predict(self, n_qubits):
        return np.exp(self.log_prefactor) * np.asarray(n_qubits, dtype=float) ** self.exponent


def fit_power_law(series: ScalingSeries) -> PowerLawFit:
    """Ordinary least squares of ``ln value`` against ``ln N``.

    Logs are taken of ratios to the first point, so rescaling every value by
    a constant only moves the prefactor.
    """
    if len(series) < 3:
        raise ValueError(f"a power-law fit needs >= 3 points, got {len(series)}")
    n, v = series.n_qubits, series.values
    if np.any(v <= 0):
        raise ValueError("power-law fit needs strictly positive values")
    lx = np.log(n / n[0])
    ly = np.log(v / v[0])
    xm = lx.mean()
    dx = lx - xm
    slope = float(np.dot(dx, ly) / np.dot(dx, dx))
    intercept_rel = float(ly.mean() - slope * xm)
    resid = ly - (intercept_rel + slope * lx)
    dof = len(lx) - 2
    stderr = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(dx, dx))) if dof > 0 else 0.0
    log_prefactor = math.log(v[0]) - slope * math.log(n[0]) + intercept_rel
    return PowerLawFit(exponent=slope, log_prefactor=log_prefactor,
                       rms_residual=float(math.sqrt(np.mean(resid**2))),
                       exponent_stderr=stderr, n_points=len(lx))


def lattice_for_side(side: int, template: LatticeSpec, planar: bool = False) -> LatticeSpec:
    dims = (side, side, 1) if planar else (side, side, side)
    return LatticeSpec(dims, template.spacing_d, template.dipole_dir)


def _check_sides(side_lengths, minimum=2):
    sides = [int(s) for s in side_lengths]
    if not sides:
        raise ValueError("sweep needs at least one side length")
    if min(sides) < minimum:
        raise ValueError(f"side lengths must be >= {minimum}, got {sides}")
    if any(b <= a for a, b in zip(sides, sides[1:])):
        raise ValueError(f"side lengths must be strictly ascending, got {sides}")
    return sides


def _map_ordered(fn, items, jobs):
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def norm_scan(side_lengths, template: LatticeSpec, params: PhysicalParams, model,
              corner_only: bool = True, planar: bool = False,
              include_diagonal: bool = False,
              q: QuadratureSettings = DEFAULT_QUADRATURE,
              max_n: int | None = None, jobs: int = 1) -> ScalingSeries:
    """Norm sum versus N over cubic (or ``planar`` square) lattices.

    With ``corner_only`` the value is the corner qubit's norm sum; otherwise
    it is the mean over all qubits.
    """
    model = Model.parse(model)
    sides = _check_sides(side_lengths)

    def point(side):
        spec = lattice_for_side(side, template, planar)
        if max_n is not None and spec.n_qubits > max_n:
            raise ValueError(f"N={spec.n_qubits} exceeds the configured cap {max_n}")
        array = build_lattice(spec)
        if corner_only:
            value = norm_sum_for_qubit(array, params, model, corner_index(array),
                                       include_diagonal, q)
        else:
            value = math.fsum(norm_sum_for_qubit(array, params, model, j, include_diagonal, q)
                              for j in range(array.n_qubits)) / array.n_qubits
        return ScalingPoint(spec.n_qubits, value, {"side": side, "model": model.value})

    return ScalingSeries(tuple(_map_ordered(point, sides, jobs)), Quantity.NORM_SUM)


def rate_scan(side_lengths, template: LatticeSpec, params: PhysicalParams, model,
              q: QuadratureSettings = DEFAULT_QUADRATURE,
              max_n: int = DEFAULT_RATE_CAP, planar: bool = False,
              jobs: int = 1) -> ScalingSeries:
    """Largest collective rate versus N over cubic lattices."""
    model = Model.parse(model)
    sides = _check_sides(side_lengths)
    for side in sides:
        n = lattice_for_side(side, template, planar).n_qubits
        if n > max_n:
            raise ValueError(f"N={n} exceeds the eigensolver cap {max_n}")

    def point(side):
        array = build_lattice(lattice_for_side(side, template, planar))
        spec = eigen_spectrum(build_single_excitation(array, params, model, q))
        return ScalingPoint(array.n_qubits, spec.largest_rate,
                            {"side": side, "model": model.value})

    return ScalingSeries(tuple(_map_ordered(point, sides, jobs)), Quantity.LARGEST_RATE)
