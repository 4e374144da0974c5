"""Probabilistic replication of clock states at the ultimate precision limits.

The library computes, exactly on integer energy grids, everything needed to
study how well ``N`` identically prepared clock states ``exp(-i t H) |psi>``
can be turned into ``M`` nearly perfect copies:

* :mod:`heisenclone.spectra` -- exact spectra and N-copy energy laws;
* :mod:`heisenclone.filters` -- the probabilistic filters that make
  faster-than-deterministic replication possible;
* :mod:`heisenclone.replication` -- exact fidelities and the lower/upper
  bounds that pin the achievable replication rates;
* :mod:`heisenclone.qcore` -- dense Hilbert-space metrology: QFI,
  post-selected QFI, averaged precision bounds, instrument decompositions;
* :mod:`heisenclone.scaling` -- sweeps and scaling-exponent extraction;
* :mod:`heisenclone.cli` -- the ``heisenclone`` command-line tool.
"""

from .errors import HeisencloneError, NumericError, ResourceError, ValidationError
from .filters import (
    Filter,
    build_super_filter,
    build_windowed_filter,
    filter_from_dict,
    identity_filter,
    success_probability,
)
from .qcore import (
    FilterOperator,
    InstrumentDecomposition,
    QuantumSystem,
    avg_crb,
    avg_qfi_uniform,
    clock_state,
    decompose_instrument,
    filter_operator,
    gaussian_twirl,
    hl_variance_bound,
    kraus_to_choi,
    noon_filter,
    pointwise_filter,
    prob_crb,
    prob_generator,
    prob_qfi,
    qfi,
    quantum_system,
    system_from_dict,
    system_from_spectrum,
)
from .replication import (
    BoundReport,
    ReplicationResult,
    deterministic_fidelity,
    exact_fidelity,
    fidelity_lower_bound,
    fidelity_upper_bound,
    full_bound_report,
    max_e_delta,
    pyes_decay_rate,
    windowed_fidelity_bound,
)
from .scaling import (
    FitResult,
    SweepRow,
    SweepSpec,
    default_window_growth,
    fit_exponent,
    rows_to_csv,
    run_sweep,
    sweep_to_json,
)
from .spectra import (
    AnchorPair,
    EnergyDistribution,
    Spectrum,
    anchor_shift,
    enumerate_partitions,
    multinomial_weight,
    n_copy_distribution,
    normalize_spectrum,
    partition_energy,
    spectrum_from_dict,
)

__version__ = "0.1.0"
