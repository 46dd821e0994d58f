"""Subtractive (signed) Gaussian mixtures with a difference-of-expectations
importance sampling estimator, autoregressive inverse transform sampling,
and a benchmark harness."""

from .errors import (
    BracketError,
    DegenerateModelError,
    DegenerateWeightsError,
    InitFailureError,
    ModelError,
    StarvedBudgetError,
    ZeroEvidenceError,
)
from .estimators import (
    BudgetPlan,
    estimates_to_csv,
    Estimate,
    Integrand,
    Proposal,
    ReplicationStats,
    Target,
    allocate_budget,
    allocate_budget_log,
    delta_ex,
    replication_stats,
    snis_estimate,
    target_from_smm,
    uis_estimate,
    with_safe,
)
from .experiments import (
    Rq1Config,
    Rq2Config,
    SWEEP_COLUMNS,
    aggregate_rows,
    build_rq2_base,
    init_integrand,
    init_random_target,
    perturb_stddevs,
    run_rq1,
    run_rq2,
    write_metadata,
    write_sweep_csv,
)
from .mixtures import (
    AdditiveMixture,
    base_mixture_from_dict,
    Component,
    DifferenceForm,
    GaussianLeaf,
    GaussianSum,
    SignedGaussianMixture,
    difference_form,
    gaussian_logpdf,
    gaussian_product,
    load_model,
    normalizing_constant,
    smm_from_dict,
    smm_logdensity,
    smm_to_dict,
    square_smm,
)
from .oracles import (
    exact_mixture_expectation,
    kl_estimate,
    ks_statistic,
    quadrature,
    smm_marginal_cdf,
)
from .samplers import (
    AritsConfig,
    SampleBatch,
    ancestral_sample,
    arits_sample,
    conditional_cdf,
    derive_seed,
    stratified_counts,
    stratified_sample,
    write_sample_csv,
)
from .signed_log import SignedLogValue, signed_logsumexp, signed_logsumexp_batch

__version__ = "0.1.0"
