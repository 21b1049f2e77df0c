"""rumsim: simulation-based random-utility discrete choice estimation.

Deterministic utilities (linear or per-alternative rectifier networks) are
combined with replicated draws from pluggable error kernels; a smoothed
argmax converts each replication into a near-one-hot choice indicator, and
averaging yields differentiable simulated choice probabilities that feed a
maximum simulated likelihood fit.  Closed-form logit and probit baselines,
a synthetic-data recovery harness, cross-validation, and equivalence
statistics round out the toolkit.
"""

from .backend import active_backend
from .baselines import (BaselineKind, binary_probit_probability, fit_baseline,
                        mnl_probability, trinomial_probit_fit)
from .dataio import Dataset, IngestionReport, SchemaConfig, kfold_split, load_dataset, write_dataset
from .distributions import (DrawMatrix, ErrorDistribution, correlate, exponential,
                            gumbel, normal, pareto, quantile, sample)
from .errors import (ConfigError, DivergenceError, NumericError,
                     ParameterizationError, RumsimError, SchemaError, ShapeError)
from .estimation import (ChoiceModelSpec, FitOptions, FitResult, fit, gradient,
                         neg_log_likelihood, predict_accuracy)
from .model import (CholeskySpec, LinearTerm, LinearUtilitySpec, NonlinearUtilitySpec,
                    ParameterSet, build_cholesky, linear_utilities, nonlinear_utilities,
                    normalize_to_base)
from .simulator import SimulatorConfig, replication_matrix, simulate_probabilities, smoothed_logit
from .synthdata import (EstimatorSpec, RecoveryResult, SynthConfig, generate_dataset,
                        monte_carlo, recovery_utility_spec)

__version__ = "0.1.0"

__all__ = [
    "ErrorDistribution", "DrawMatrix", "quantile", "sample", "correlate",
    "gumbel", "normal", "exponential", "pareto",
    "ParameterSet", "LinearTerm", "LinearUtilitySpec", "NonlinearUtilitySpec",
    "CholeskySpec", "build_cholesky", "linear_utilities", "nonlinear_utilities",
    "normalize_to_base",
    "SimulatorConfig", "smoothed_logit", "simulate_probabilities", "replication_matrix",
    "ChoiceModelSpec", "FitOptions", "FitResult", "fit", "gradient",
    "neg_log_likelihood", "predict_accuracy",
    "BaselineKind", "mnl_probability", "binary_probit_probability", "fit_baseline",
    "trinomial_probit_fit",
    "SynthConfig", "EstimatorSpec", "RecoveryResult", "generate_dataset",
    "monte_carlo", "recovery_utility_spec",
    "Dataset", "SchemaConfig", "IngestionReport", "load_dataset", "write_dataset",
    "kfold_split",
    "active_backend",
    "RumsimError", "ConfigError", "SchemaError", "ShapeError",
    "ParameterizationError", "NumericError", "DivergenceError",
    "__version__",
]
