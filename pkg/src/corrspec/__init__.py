"""Singular-value exponent spectra of two-point correlation matrices.

Builds disordered SYK and XXZ Hamiltonians, evaluates matrices of two-point
functions G_ij(t) in chosen reference states, extracts the exponent spectrum
lambda_i = ln sigma_i(G), and tests its spacing statistics against the
GOE/GUE/Poisson references.
"""

__version__ = "0.1.0"

from .correlator import (CorrelationMatrix, ExponentRecord, ProbeSet,
                         ReferenceState, correlation_matrix, correlator_series,
                         exponent_spectrum, exponent_subset, majorana_probes,
                         reference_state, xxz_probes, xxz_sector_probes)
from .harness import (ConfigError, ExperimentConfig, NumericalFailure,
                      RunManifest, parse_config, run_experiment, sweep)
from .models import (SykCouplings, XxzFields, XxzSectorPlan,
                     build_syk_hamiltonian, build_xxz_hamiltonian, sample_syk,
                     sample_xxz)
from .operators import MajoranaSet, majorana_set, spin_site_operator
from .spectral import (EigenDecomposition, SectorBasis, diagonalize, evolve,
                       select_states, sz_sector, sz_zero_sector)
from .statistics import (GapRatioEnsemble, SpacingHistogram, distribution_distance,
                         fixed_i_unfold, gap_ratios, reference_mean_r,
                         reference_spacing_density, separations,
                         spacing_histogram)

__all__ = [
    "__version__",
    "CorrelationMatrix", "ExponentRecord", "ProbeSet", "ReferenceState",
    "correlation_matrix", "correlator_series", "exponent_spectrum",
    "exponent_subset", "majorana_probes", "reference_state", "xxz_probes",
    "xxz_sector_probes",
    "ConfigError", "ExperimentConfig", "NumericalFailure", "RunManifest",
    "parse_config", "run_experiment", "sweep",
    "SykCouplings", "XxzFields", "XxzSectorPlan", "build_syk_hamiltonian",
    "build_xxz_hamiltonian", "sample_syk", "sample_xxz",
    "MajoranaSet", "majorana_set", "spin_site_operator",
    "EigenDecomposition", "SectorBasis", "diagonalize", "evolve",
    "select_states", "sz_sector", "sz_zero_sector",
    "GapRatioEnsemble", "SpacingHistogram", "distribution_distance",
    "fixed_i_unfold", "gap_ratios", "reference_mean_r",
    "reference_spacing_density", "separations", "spacing_histogram",
]
