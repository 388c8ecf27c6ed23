"""Randomization-based causal inference for finite populations under general
assignment mechanisms: assignment probabilities, contrast estimation, exact
sampling variances, conservative variance bounds with condition checking, and
an exact enumeration oracle."""

from .assignment import (
    AssignmentMechanism,
    CompletelyRandomized,
    Custom,
    Partition,
    SplitPlot,
    Stratified,
    SupportTooLargeError,
    Unicluster,
    load_custom_support_csv,
)
from .estimation import (
    HT,
    CustomLUE,
    HorvitzThompson,
    NeymanDecomposition,
    ObservedOutcomes,
    UnobservedAccessError,
    contrast_estimate,
    cross_moments,
    ht_contrast_estimate,
    ht_mean_estimate,
    neyman_two_arm_variance,
    sampling_covariance,
    sampling_variance,
    validate_lue,
)
from .oracle import (
    CovarianceResiduals,
    ExactMoment,
    expectation,
    verify_covariance,
    verify_unbiasedness,
    verify_variance,
    verify_vq_estimator,
)
from .population import (
    Contrast,
    FactorialStructure,
    PotentialOutcomesTable,
    factorial_contrast,
    load_population_csv,
    population_contrast,
    treatment_means,
    unit_contrasts,
    write_population_csv,
)
from .qframework import (
    QMatrix,
    SAPViolationError,
    VarianceReport,
    bias,
    bias_scenario_table,
    c_q,
    c_q_hat,
    ga_condition,
    lambda_max,
    minimax_q,
    q_half,
    q_strat,
    q_strict,
    q_wholeplot,
    random_q,
    sap_condition,
    sap_sufficient,
    v_q,
    v_q_hat,
    validate_q,
    variance_report,
)
from .simulation import (
    GeneratingModel,
    StudyResult,
    builtin_models,
    empirical_bound_check,
    export_boxplot_data,
    generate_population,
    run_bias_study,
    run_empirical_demo,
)

__version__ = "0.1.0"
