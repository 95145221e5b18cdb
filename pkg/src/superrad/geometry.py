"""Rectangular qubit lattices and pairwise separation geometry.

Positions sit on the integer grid ``(i1*d, i2*d, i3*d)`` with the last axis
varying fastest, so the qubit at the origin (a corner) always has index 0.
Planar arrays are ordinary lattices with one extent equal to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIPOLE = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice extent, spacing and dipole orientation.

    Parameters
    ----------
    dims : tuple of int
        Number of qubits along each axis, each >= 1.
    spacing_d : float
        Inter-qubit spacing in cm.
    dipole_dir : 3-vector
        Atomic dipole direction. Any nonzero vector is accepted and stored
        normalized.
    """

    dims: tuple[int, int, int]
    spacing_d: float
    dipole_dir: tuple[float, float, float] = DEFAULT_DIPOLE

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3:
            raise ValueError(f"dims must have three extents, got {self.dims!r}")
        if any(n != m for n, m in zip(dims, self.dims)) or min(dims) < 1:
            raise ValueError(f"lattice extents must be integers >= 1, got {self.dims!r}")
        if not np.isfinite(self.spacing_d) or self.spacing_d <= 0:
            raise ValueError(f"spacing_d must be > 0, got {self.spacing_d!r}")
        u = np.asarray(self.dipole_dir, dtype=float)
        if u.shape != (3,) or not np.all(np.isfinite(u)):
            raise ValueError(f"dipole_dir must be a finite 3-vector, got {self.dipole_dir!r}")
        norm = np.linalg.norm(u)
        if norm == 0:
            raise ValueError("dipole_dir must be nonzero")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing_d", float(self.spacing_d))
        object.__setattr__(self, "dipole_dir", tuple(float(v) for v in u / norm))

    @property
    def n_qubits(self) -> int:
        n1, n2, n3 = self.dims
        return n1 * n2 * n3

    @classmethod
    def cube(cls, side, spacing_d, dipole_dir=DEFAULT_DIPOLE):
        return cls((side, side, side), spacing_d, dipole_dir)

    @classmethod
    def square(cls, side, spacing_d, dipole_dir=DEFAULT_DIPOLE):
        return cls((side, side, 1), spacing_d, dipole_dir)


@dataclass(frozen=True)
class PairGeometry:
    """Separation ``r`` (cm) and cosine of the dipole/separation angle."""

    r: float
    cos_theta: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"pair separation must be > 0, got {self.r!r}")
        if not -1.0 - 1e-12 <= self.cos_theta <= 1.0 + 1e-12:
            raise ValueError(f"cos_theta out of range: {self.cos_theta!r}")

    @property
    def cos2(self) -> float:
        return min(self.cos_theta * self.cos_theta, 1.0)


@dataclass(frozen=True, eq=False)
class QubitArray:
    spec: LatticeSpec
    indices: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)

    @property
    def n_qubits(self) -> int:
        return len(self.positions)

    def __len__(self):
        return self.n_qubits


def build_lattice(spec: LatticeSpec) -> QubitArray:
    n1, n2, n3 = spec.dims
    grid = np.indices((n1, n2, n3)).reshape(3, -1).T.astype(np.int64)
    grid.setflags(write=False)
    pos = grid * spec.spacing_d
    pos.setflags(write=False)
    return QubitArray(spec=spec, indices=grid, positions=pos)


def corner_index(array: QubitArray) -> int:
    return 0


def _check_index(array, j):
    if not 0 <= j < array.n_qubits:
        raise IndexError(f"qubit index {j} out of range for N={array.n_qubits}")


def pair_geometry(array: QubitArray, j: int, jp: int) -> PairGeometry:
    _check_index(array, j)
    _check_index(array, jp)
    if j == jp:
        raise ValueError("pair_geometry needs two distinct qubits; the diagonal has zero separation")
    sep = (array.indices[j] - array.indices[jp]) * array.spec.spacing_d
    r = float(np.sqrt(sep @ sep))
    cos_theta = float(np.dot(array.spec.dipole_dir, sep) / r)
    return PairGeometry(r=r, cos_theta=cos_theta)


def separations(array: QubitArray, rows=None):
    """Vectorized pair geometry from the qubits in ``rows`` to every qubit.

    Returns ``(r, cos2)`` arrays of shape ``(len(rows), N)``. The self-pair
    entries have ``r = 0`` and ``cos2 = 0``.

    Separations are formed from integer index differences, so pairs related by
    a lattice symmetry get bit-identical ``r`` and ``cos2``.
    """
    idx = array.indices
    sel = idx if rows is None else idx[np.atleast_1d(rows)]
    delta = (sel[:, None, :] - idx[None, :, :]) * array.spec.spacing_d
    # explicit sums (no BLAS) so that swapping a pair negates proj exactly
    dx, dy, dz = delta[..., 0], delta[..., 1], delta[..., 2]
    ux, uy, uz = array.spec.dipole_dir
    r2 = dx * dx + dy * dy + dz * dz
    r = np.sqrt(r2)
    proj = dx * ux + dy * uy + dz * uz
    with np.errstate(invalid="ignore", divide="ignore"):
        cos2 = np.where(r2 > 0, proj * proj / np.where(r2 > 0, r2, 1.0), 0.0)
    return r, np.minimum(cos2, 1.0)
