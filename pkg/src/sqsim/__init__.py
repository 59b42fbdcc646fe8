"""Desk-scale toolkit for preparing maximum-independent-set ground states
of Rydberg atom arrays with sweep-quench-sweep detuning schedules.

Units: energies and detunings in the global Rabi frequency Omega, times in
2*pi/Omega, sweep rates in R0 = Omega^2/(2*pi), positions in micrometers.
"""

__version__ = "0.1.0"

from . import analysis, dyn_dense, dyn_mps, geometry, measure, model, schedule, spectra
from .geometry import (
    AtomArray,
    BlockadeGraph,
    blockade_graph,
    build_2d_doublet_grid,
    build_doublet_chain,
    build_enhanced_rabi_chain,
    build_zigzag_chain,
    calibrate_c6,
    equilateral_doublet_chain,
    interaction_matrix,
)
from .model import (
    BasisSet,
    HamiltonianOperator,
    NamedState,
    build_hamiltonian,
    classical_energy,
    enumerate_basis,
    exact_mis,
    named_state,
)
from .schedule import linear_sweep, response_filter, sample, sqs
from .trajectory import ObservableSpec, Trajectory
