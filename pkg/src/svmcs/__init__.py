"""Confidence-set reproduction on equidistributed grids with an RBF SVM.

Generate an equidistributed grid over the parameter box, label it with a
membership test, train an RBF support vector classifier tuned so the
training labels are reproduced, and use its decision function to
classify far denser grids at a fraction of the test's cost.
"""

from .criterion import (
    INSIDE,
    OUTSIDE,
    EllipsoidCriterion,
    LabeledGrid,
    MomentCriterion,
    SyntheticCriterion,
    SyntheticRegion,
    chi2_quantile,
    critical_value,
    disc_criterion,
    label,
    label_grid,
    ols_fit,
    qhat,
    read_labeled_csv,
    write_labeled_csv,
)
from .experiments import (
    DenseReport,
    GridSizeRule,
    OlsConfig,
    RunReport,
    SyntheticConfig,
    classify_dense,
    grid_size_rule,
    run_ols,
    run_synthetic,
)
from .grid import (
    BAKER,
    SOBOL,
    WEYL,
    Box,
    Grid,
    SequenceKind,
    equidistribution_fraction,
    extend,
    generate,
    min_pairwise_distance,
    monte_carlo,
    read_grid_csv,
    smallest_enclosing_box,
    write_grid_csv,
)
from .refine import RefineConfig, RefineResult, boundary_pairs, refine
from .svm import (
    DualSolution,
    KernelParams,
    SimplifiedClassifier,
    TrainedClassifier,
    batch_predict,
    decision_value,
    load_classifier,
    polynomial_kernel,
    predict,
    rbf_kernel,
    save_classifier,
    simplified_decision,
    train,
)
from .tuning import (
    NearestPair,
    SigmaBound,
    admissible_sigma,
    auto_sigma,
    c_lower_bound,
    nearest_pair,
    sigma_bound_exterior,
    sigma_bound_interior,
)

__version__ = "0.1.0"
