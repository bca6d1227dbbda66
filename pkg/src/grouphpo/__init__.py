"""TPE hyperparameter optimization with grouped sequential search."""

from .density import CategoricalPmf, DensityPair, NumericKde, gaussian_kernel, kde_estimate
from .gsos import GroupPlan, ImportanceTable, build_group_plan, gsos_optimize, paper_importance_table
from .harness import compare, run_experiment, summarize, timing_study
from .objectives import CostModel, load_surrogate, surrogate_cnn_objective
from .search_space import ParamDomain, SearchSpace, default_config, paper_search_space, validate
from .tpe_core import EvalResult, Observation, TpeSettings, optimize

__version__ = "0.1.0"
