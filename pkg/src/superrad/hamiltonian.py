"""Single-excitation effective Hamiltonian, two-qubit blocks and norm sums."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernel
from .geometry import QubitArray, pair_geometry, separations
from .kernel import DEFAULT_QUADRATURE, PhysicalParams, QuadratureSettings


class Model(str, enum.Enum):
    MEMORY_KERNEL = "kernel"
    KM = "km"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown model {value!r}; expected 'kernel' or 'km'") from None


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    matrix: np.ndarray
    model: Model
    array: QubitArray
    params: PhysicalParams

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class PairBlock:
    """Two-qubit operator in the basis (|00>, |01>, |10>, |11>)."""

    block: np.ndarray
    j: int
    jp: int

    @property
    def coupling(self) -> complex:
        return complex(self.block[1, 2])


@dataclass(frozen=True)
class ThresholdReport:
    norm_sum: float
    t0: float
    eta: float
    gamma: float
    satisfied: bool

    @property
    def error_per_gate(self) -> float:
        return self.norm_sum * self.gamma * self.t0


def _reduced_elements(x, cos2, model, q, cache):
    if model is Model.KM:
        return kernel.km_reduced(x, cos2)
    return kernel.memory_reduced(x, cos2, q, cache)


def element(array, params, model, j, jp, q=DEFAULT_QUADRATURE, cache=kernel.default_cache):
    """Coupling ``h_{jj'}`` for one pair, evaluated without vectorization."""
    model = Model.parse(model)
    if j == jp:
        return kernel.diagonal_element(params)
    geom = pair_geometry(array, j, jp)
    if model is Model.KM:
        return kernel.km_element(geom, params)
    return kernel.asymptotic_element(geom, params, q, cache)


def coupling_row(array: QubitArray, params: PhysicalParams, model, j: int,
                 q: QuadratureSettings = DEFAULT_QUADRATURE, cache=kernel.default_cache):
    """Off-diagonal couplings ``h_{j, j'}`` for all ``j'``; entry ``j`` is zero."""
    model = Model.parse(model)
    r, cos2 = separations(array, [j])
    r, cos2 = r[0], cos2[0]
    mask = r > 0
    out = np.zeros(array.n_qubits, dtype=complex)
    x = params.k_a * r[mask]
    out[mask] = params.gamma * _reduced_elements(x, cos2[mask], model, q, cache)
    return out


def build_single_excitation(array: QubitArray, params: PhysicalParams, model,
                            q: QuadratureSettings = DEFAULT_QUADRATURE,
                            memoize: bool = True,
                            cache=kernel.default_cache) -> EffectiveHamiltonian:
    """Dense N x N effective Hamiltonian on the one-excitation sector.

    With ``memoize=False`` every pair is evaluated independently through the
    scalar element functions (slow; intended as a cross-check).
    """
    model = Model.parse(model)
    n = array.n_qubits
    if memoize:
        r, cos2 = separations(array)
        iu = np.triu_indices(n, 1)
        upper = params.gamma * _reduced_elements(params.k_a * r[iu], cos2[iu], model, q, cache)
        m = np.zeros((n, n), dtype=complex)
        m[iu] = upper
        m.T[iu] = upper
    else:
        m = np.empty((n, n), dtype=complex)
        for j in range(n):
            for jp in range(n):
                m[j, jp] = element(array, params, model, j, jp, q, cache=None)
    np.fill_diagonal(m, kernel.diagonal_element(params))
    m.setflags(write=False)
    return EffectiveHamiltonian(matrix=m, model=model, array=array, params=params)


def pair_block(array, params, model, j, jp, q=DEFAULT_QUADRATURE) -> PairBlock:
    if j == jp:
        raise ValueError("pair blocks need j != j'; the diagonal decay is a single-qubit term")
    return block_from_coupling(element(array, params, model, j, jp, q), j, jp)


def block_from_coupling(h: complex, j: int = 0, jp: int = 1) -> PairBlock:
    b = np.zeros((4, 4), dtype=complex)
    b[1, 2] = b[2, 1] = h
    return PairBlock(block=b, j=j, jp=jp)


def sup_norm(block) -> float:
    """Largest singular value of a block (``PairBlock`` or square array)."""
    b = block.block if isinstance(block, PairBlock) else np.asarray(block)
    if not b.any():
        return 0.0
    return float(np.linalg.norm(b, 2))


def norm_sum_for_qubit(array: QubitArray, params: PhysicalParams, model, j: int = 0,
                       include_diagonal: bool = False,
                       q: QuadratureSettings = DEFAULT_QUADRATURE,
                       memoize: bool = True) -> float:
    """Sum over j' of the sup norms of the two-qubit terms acting on qubit j.

    Each off-diagonal block has sup norm ``|h_{jj'}|``; the sum is taken with
    ``math.fsum`` in index order, so it is reproducible bit for bit.
    """
    if not 0 <= j < array.n_qubits:
        raise IndexError(f"qubit index {j} out of range for N={array.n_qubits}")
    if memoize:
        row = coupling_row(array, params, model, j, q)
    else:
        row = np.array([0j if jp == j else element(array, params, model, j, jp, q, cache=None)
                        for jp in range(array.n_qubits)])
    total = math.fsum(np.abs(row).tolist())
    if include_diagonal:
        total += 0.5 * params.gamma
    return total


def check_threshold(norm_sum: float, t0: float, eta: float, gamma: float = 1.0) -> ThresholdReport:
    """Test ``norm_sum * gamma * t0 < eta`` with ``norm_sum`` in units of gamma."""
    if not t0 > 0:
        raise ValueError("gate time t0 must be > 0")
    if not eta > 0:
        raise ValueError("threshold eta must be > 0")
    return ThresholdReport(norm_sum=float(norm_sum), t0=float(t0), eta=float(eta),
                           gamma=float(gamma), satisfied=bool(norm_sum * gamma * t0 < eta))


MATRIX_FORMAT = "superrad-matrix-v1"


def export_matrix(h: EffectiveHamiltonian, path) -> None:
    """Write a matrix as text.

    Format: ``#``-prefixed header lines, the first holding a JSON object with
    ``format``, ``N``, ``model`` and the physical parameters, followed by N
    rows of 2N whitespace-separated numbers ``re_0 im_0 re_1 im_1 ...`` in
    row-major order.
    """
    spec = h.array.spec
    header = {
        "format": MATRIX_FORMAT,
        "N": h.n_qubits,
        "model": h.model.value,
        "gamma": h.params.gamma,
        "lambda_a_cm": h.params.lambda_a,
        "c_light_cm_per_s": h.params.c_light,
        "dims": list(spec.dims),
        "spacing_d_cm": spec.spacing_d,
        "dipole_dir": list(spec.dipole_dir),
    }
    pairs = np.empty((h.n_qubits, 2 * h.n_qubits))
    pairs[:, 0::2] = h.matrix.real
    pairs[:, 1::2] = h.matrix.imag
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write("# rows: re im pairs per column, units of gamma\n")
        np.savetxt(fh, pairs, fmt="%.17g")


def load_matrix(path):
    """Read a matrix written by :func:`export_matrix`; returns ``(matrix, header)``."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise ValueError(f"{path}: missing header line")
    header = json.loads(first[2:])
    if header.get("format") != MATRIX_FORMAT:
        raise ValueError(f"{path}: unsupported matrix format {header.get('format')!r}")
    data = np.atleast_2d(np.loadtxt(path, comments="#"))
    n = header["N"]
    if data.shape != (n, 2 * n):
        raise ValueError(f"{path}: expected shape {(n, 2 * n)}, found {data.shape}")
    return data[:, 0::2] + 1j * data[:, 1::2], header
