"""Superradiance noise in qubit arrays.

Builds the single-excitation effective Hamiltonian of radiatively coupled
qubits on a lattice, in two models: a retarded memory kernel evaluated in the
long-time limit, and the closed-form dipole-dipole (Kurizki-Molmer) model.
On top of that: two-qubit sup-norm sums, non-Hermitian spectra, N-scaling
fits and small-N dynamics.
"""

from .geometry import LatticeSpec, PairGeometry, QubitArray, build_lattice, corner_index, pair_geometry
from .kernel import (PhysicalParams, QuadratureError, QuadratureSettings, asymptotic_element,
                     diagonal_element, km_element, markov_element, memory_kernel)
from .hamiltonian import (EffectiveHamiltonian, Model, PairBlock, ThresholdReport,
                          build_single_excitation, check_threshold, norm_sum_for_qubit,
                          pair_block, sup_norm)
from .spectra import Histogram, SpectrumResult, eigen_spectrum, largest_collective_rate, rate_histogram
from .scaling import PowerLawFit, Quantity, ScalingSeries, fit_power_law, norm_scan, rate_scan

__version__ = "0.1.0"
