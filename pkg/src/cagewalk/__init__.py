"""Discrete-time quantum walks on the flux-threaded diamond chain.

Simulation library for Aharonov-Bohm caging and its breakdown under
quenched disorder, dynamical disorder, repeated measurements, combined
(subdiffusive) disorder, and a two-body interaction phase.
"""

from .lattice import (
    BasisIndex,
    ChainGeometry,
    FluxGauge,
    ShiftOperator,
    basis_index,
    build_shift,
    flat_index,
    plaquette_phases,
)
from .coins import (
    GROVER,
    HADAMARD,
    HADAMARD_THETA,
    CoinField,
    CoinOperator,
    RimCoinParams,
    build_coin_operator,
    grover4,
    hadamard4,
    hadamard4_theta,
    rim_coin,
)
from .engine import (
    SPIN_BASIS,
    WalkOperator,
    WalkState,
    evolve,
    hub_spin_state,
    measure_position,
    position_distribution,
    std_dev,
    step,
    support_extent,
    two_step_operator,
)
from .spectral import (
    CONFINED_TABLE,
    SpectrumResult,
    bloch_operator,
    confined_eigenstate,
    confined_energies,
    critical_flux,
    full_spectrum,
    ipr,
    level_spacing_stats,
    quasienergies,
    spectrum_vs_flux,
    unitary_eig,
    walk_matrix,
)

__version__ = "1.0.0"
