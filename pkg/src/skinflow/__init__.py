"""Directional information flow in non-reciprocal SSH chains."""

from .lattice import (
    ModelParams,
    PhaseInfo,
    SkinProfile,
    bloch_energies,
    build_hamiltonian,
    classify_phase,
    dispersion_hermitian,
    gamma_for_skin_length,
    group_velocity,
    lieb_robinson_velocity,
    max_group_velocity,
    max_group_velocity_numeric,
    skin_profile,
    sublattice_of,
)
from .qlif import (
    QlifConfig,
    QlifSeries,
    binary_entropy,
    default_time_grid,
    delta_T,
    freeze,
    integrated_qlif,
    qlif_pair,
    qlif_series,
    series_rate,
    site_entropy,
)
from .spectral import (
    DefectiveSpectrumError,
    Spectrum,
    TimeEvolver,
    WaveState,
    delta_state,
    diagonalize,
    ipr_numeric,
    ipr_theory,
    mean_ipr,
    propagate,
    taylor_expm_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams", "PhaseInfo", "SkinProfile", "bloch_energies",
    "build_hamiltonian", "classify_phase", "dispersion_hermitian",
    "gamma_for_skin_length", "group_velocity", "lieb_robinson_velocity",
    "max_group_velocity", "max_group_velocity_numeric", "skin_profile",
    "sublattice_of",
    "QlifConfig", "QlifSeries", "binary_entropy", "default_time_grid",
    "delta_T", "freeze", "integrated_qlif", "qlif_pair", "qlif_series",
    "series_rate", "site_entropy",
    "DefectiveSpectrumError", "Spectrum", "TimeEvolver", "WaveState",
    "delta_state", "diagonalize", "ipr_numeric", "ipr_theory", "mean_ipr",
    "propagate", "taylor_expm_oracle",
    "__version__",
]
