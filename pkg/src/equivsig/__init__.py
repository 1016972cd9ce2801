"""Statistically equivalent signatures (SES): constraint-based feature
selection that reports every interchangeable variant of the selected set."""

from .bench import SyntheticSpec, coefficient_of_variation, generate_synthetic, run_protocol
from .citests import (ConfigError, TestKey, TestResult, TestSpec, dispatch_test, fisher_test, g2_test,
                      linreg_lrt_test, logistic_lrt_test, partial_correlation, spearman_test)
from .data import (CONTINUOUS, ColumnKind, DataError, Dataset, Target, categorical, column_stats,
                   load_dataset, save_dataset)
from .modelsel import CvConfig, CvResult, auc, cv_ses, make_stratified_folds, mse
from .regress import logistic_fit, ols_fit, predict_linear, predict_logistic
from .ses import SesConfig, SesOutput, TestCache, enumerate_signatures, mmpc, ses, ses_run

__version__ = "0.1.0"
