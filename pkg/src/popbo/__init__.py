"""Ranking-surrogate Bayesian optimization with a benchmark harness."""

from .acquisition import AcquisitionConfig, eri, grad_acquisition, lcb, propose_next, r_lcb
from .benchmarks import (
    BenchmarkFunction,
    TabularBenchmark,
    forrester_ranking_study,
    get_benchmark,
)
from .engine import BoRunConfig, RegretTrace, TraceRecord, incumbent, run
from .errors import (
    DomainError,
    EvaluationFailedError,
    InputError,
    PopboError,
    PreconditionError,
    RectifiedRegionError,
    TrainingDivergedError,
)
from .harness import ExperimentConfig, random_search_baseline, run_experiment
from .poisson import (
    RankPosterior,
    TruncatedPoisson,
    correct_ranking_probability,
    pmf,
    truncated_mean,
    truncated_variance,
    untruncated_mean_variance,
)
from .space import ContinuousSpace, DiscreteSpace
from .surrogate import (
    IntensityModel,
    ObservationSet,
    TrainConfig,
    compute_ranks,
    fit,
    grad_log_likelihood,
    load_model,
    log_likelihood,
    predict,
    save_model,
)

__version__ = "0.1.0"
