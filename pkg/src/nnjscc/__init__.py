"""Finite-blocklength toolkit for nearest-neighbour joint source-channel coding.

Analytic dispersion and covering-probability calculators, the type-based
random coding ensemble with its encoder and decoder, and a reproducible
Monte Carlo engine for the ensemble excess-distortion probability.
"""

from .analytic import (
    DispersionReport,
    bandwidth_ratio,
    capacity,
    dispersion_report,
    md_constant,
    predicted_eps,
    qfunc,
    qfunc_inv,
    rate_distortion,
    second_order_k,
    separate_md,
    separate_second_order,
    v_channel,
    v_joint,
    v_source,
)
from .codec import decode, decode_via_density, distortion, encode, mismatched_density
from .ensemble import (
    CodeEnsemble,
    TypePartition,
    build_ensemble,
    build_partition,
    choose_M,
    classify,
    dump_ensemble,
    load_ensemble,
    xi_moderate,
    xi_second_order,
)
from .errors import ConfigurationError, DomainError, NNJSCCError, NumericalError, ResourceError
from .model import NoiseModel, SourceModel, SystemConfig, make_noise, make_source, sample_noise, sample_source
from .montecarlo import (
    MDSchedule,
    Scheme,
    SimulationSummary,
    TrialOutcome,
    estimate_pe,
    md_schedule,
    prepare_scheme,
    rcu_bounds,
    rcu_lower,
    rcu_upper,
    run_trial,
    wilson_interval,
)
from .nonexcess import PsiContext, psi_iid, psi_sp, psi_sp_lower, psi_sp_upper, r_iid, r_sp, s_star

__version__ = "0.1.0"
