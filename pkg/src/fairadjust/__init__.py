"""Fit decision predictors and adjust them for counterfactual fairness.

The package fits a classical decision model from historical tabular data,
then derives two adjusted predictors: one whose score ignores the sensitive
configuration entirely (equal treatment at fixed attributes) and one that
additionally corrects attributes for the sensitive configuration's downstream
influence. Two refit baselines, a synthetic admissions generator, a metric
suite, and a CLI round out the toolkit.
"""

__version__ = "0.1.0"

from .errors import (
    FairadjustError,
    FitError,
    ParseError,
    PerfectSeparationError,
    RankDeficientError,
    SchemaError,
    UnknownLevelError,
)
from .estimators import (
    AttributeRegression,
    FittedComponents,
    LinearModel,
    LogisticModel,
    SensitiveDistribution,
    fit_attribute_regression,
    fit_components,
    fit_linear,
    fit_logistic,
    fit_sensitive_distribution,
)
from .ingest import (
    SchemaConfig,
    load,
    load_schema_config,
    load_train_test,
    split,
    write_csv,
)
from .metrics import (
    GroupPair,
    MetricReport,
    aa_metric,
    avg_kl_to_ml,
    demographic_parity_kl,
    eo_metric,
    evaluate_predictor,
    format_metric_table,
    predictive_score,
)
from .predictors import (
    AaPredictor,
    EoPredictor,
    FairLearningPredictor,
    FtuPredictor,
    MlPredictor,
    Predictor,
    build_aa,
    build_all,
    build_eo,
    build_fairlearning,
    build_ftu,
    build_ml,
    predictor_from_dict,
    score_aa,
    score_eo,
    score_ml,
)
from .simulate import ScmParams, SimSpec, admissions_schema, sigmoid, simulate, sweep_specs
from .tabular import (
    AttributeColumn,
    Dataset,
    DecisionColumn,
    Encoding,
    Schema,
    SensitiveColumn,
    build_encoding,
)

__all__ = [name for name in dir() if not name.startswith("_")]
