"""The optimization loop: initialize, rank, fit, propose, observe, record.

RNG discipline keeps the query sequence a function of (config, seed) and of
the observation *ranks* only: per iteration the master stream hands out a
model seed, a fit seed, and a proposal seed in a fixed order, and noise is
drawn only when the objective is noisy.  Applying a strictly increasing
transform to all observed values therefore leaves every proposal unchanged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import AcquisitionConfig, propose_next
from .errors import EvaluationFailedError, InputError, PreconditionError
from .surrogate import (
    DEFAULT_HIDDEN,
    IntensityModel,
    ObservationSet,
    TrainConfig,
    compute_ranks,
    fit,
)

__all__ = ["BoRunConfig", "TraceRecord", "RegretTrace", "run", "incumbent"]

_SEED_BOUND = 2 ** 63


@dataclass(frozen=True)
class BoRunConfig:
    """One optimization run.

    hidden widths are configurable only so tests can run tiny networks; the
    production architecture is the default.  cold_start=True re-initializes
    the network parameters every iteration instead of warm-starting from the
    previous fit (ADAM moments reset either way).
    """

    n_init: int = 12
    n_iters: int = 80
    seed: int = 0
    surrogate: TrainConfig = field(default_factory=TrainConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    cold_start: bool = False
    hidden: tuple = DEFAULT_HIDDEN

    def __post_init__(self):
        if self.n_init < 2:
            raise InputError(f"n_init must be >= 2, got {self.n_init}")
        if self.n_iters < 0:
            raise InputError(f"n_iters must be >= 0, got {self.n_iters}")


@dataclass(frozen=True)
class TraceRecord:
    """One evaluated query.

    iteration 0 covers the initial design block; iterations 1..n_iters are
    the model-driven queries.  regret is NaN when no optimum is known.
    """

    iteration: int
    point: np.ndarray
    value: float
    incumbent: float
    regret: float
    fit_seconds: float
    propose_seconds: float
    eval_seconds: float


@dataclass
class RegretTrace:
    """Per-query records of one run, in evaluation order."""

    benchmark: str
    dim: int
    optimum: float | None
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def points(self) -> np.ndarray:
        return np.array([r.point for r in self.records])

    @property
    def final_regret(self) -> float:
        if not self.records:
            raise PreconditionError("empty trace")
        return self.records[-1].regret


def incumbent(trace: RegretTrace):
    """Best (point, value) in the trace; ties go to the earliest record."""
    if not trace.records:
        raise PreconditionError("empty trace")
    best = trace.records[0]
    for rec in trace.records[1:]:
        if rec.value < best.value:
            best = rec
    return best.point, best.value


def _observe(objective, x_norm, rng, trace):
    try:
        y = float(objective.evaluate(x_norm, rng))
    except Exception as exc:  # noqa: BLE001 - converted to a typed abort
        raise EvaluationFailedError(trace, exc) from exc
    if not math.isfinite(y):
        raise EvaluationFailedError(trace, ValueError(f"non-finite observation {y!r}"))
    return y


def run(objective, cfg: BoRunConfig) -> RegretTrace:
    """Execute the full loop and return the trace.

    Each iteration recomputes ranks of everything observed so far, trains the
    intensity model, proposes the acquisition minimizer, and evaluates it.
    Wall-clock seconds are recorded split into fit / propose / evaluate.
    """
    space = objective.space
    optimum = objective.optimum
    trace = RegretTrace(getattr(objective, "name", "objective"), space.dim, optimum)
    rng = np.random.default_rng(cfg.seed)

    best = math.inf

    def record(iteration, x_norm, y, fit_s, propose_s, eval_s):
        nonlocal best
        if y < best:
            best = y
        regret = best - optimum if optimum is not None else math.nan
        trace.records.append(TraceRecord(
            iteration=iteration,
            point=np.asarray(objective.trace_point(x_norm), dtype=float),
            value=y,
            incumbent=best,
            regret=regret,
            fit_seconds=fit_s,
            propose_seconds=propose_s,
            eval_seconds=eval_s,
        ))

    points = space.sample(rng, cfg.n_init)
    values = []
    for i in range(cfg.n_init):
        t0 = time.perf_counter()
        y = _observe(objective, points[i], rng, trace)
        values.append(y)
        record(0, points[i], y, 0.0, 0.0, time.perf_counter() - t0)

    model = None
    for t in range(1, cfg.n_iters + 1):
        # Fixed draw order per iteration, independent of observed values.
        model_seed = int(rng.integers(_SEED_BOUND))
        fit_seed = int(rng.integers(_SEED_BOUND))
        propose_seed = int(rng.integers(_SEED_BOUND))

        obs = ObservationSet(points, np.asarray(values), compute_ranks(values))

        t0 = time.perf_counter()
        if model is None or cfg.cold_start:
            model = IntensityModel.create(space.dim, cfg.hidden, rng_seed=model_seed)
        fit(model, obs, cfg.surrogate, rng=np.random.default_rng(fit_seed))
        fit_s = time.perf_counter() - t0

        t0 = time.perf_counter()
        acq = replace(cfg.acquisition, rng_seed=propose_seed)
        x_next = propose_next(model, space, obs, acq,
                              truncation_switch_n=cfg.surrogate.truncation_switch_n)
        propose_s = time.perf_counter() - t0

        t0 = time.perf_counter()
        y_next = _observe(objective, x_next, rng, trace)
        eval_s = time.perf_counter() - t0

        points = np.vstack([points, x_next[None, :]])
        values.append(y_next)
        record(t, x_next, y_next, fit_s, propose_s, eval_s)
    return trace
