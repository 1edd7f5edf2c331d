"""MLP intensity model of the ranking response surface, and its training.

The surrogate maps a normalized point x in [0,1]^d to a positive rate, the
expected number of observed points that beat x.  Ranks of the observation set
follow truncated Poisson laws parameterized by that rate; maximizing their
joint log-likelihood trains the network.  Below ``truncation_switch_n``
observations the truncated normalizer S(N-1) is used; at or above it the plain
Poisson form applies.

The network is fixed to three hidden rectified-linear layers (width 128) with
a softplus output for positivity; widths are configurable only so tests can
run tiny instances.  Forward, backward, and ADAM are written directly on
numpy arrays: training must be bitwise reproducible under a seed, and the
input-gradient path is reused by the acquisition optimizer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import DomainError, InputError, PreconditionError, TrainingDivergedError
from .poisson import (
    RankPosterior,
    TruncatedPoisson,
    log_factorials,
    log_partial_exp_sum,
    pmf_vector,
    truncated_mean,
)

__all__ = [
    "TRUNCATION_SWITCH_N",
    "DEFAULT_HIDDEN",
    "IntensityModel",
    "ObservationSet",
    "TrainConfig",
    "compute_ranks",
    "log_likelihood",
    "grad_log_likelihood",
    "rate_gradient",
    "fit",
    "predict",
    "pack_arrays",
    "pack_parameters",
    "set_parameters",
    "model_to_blob",
    "model_from_blob",
    "save_model",
    "load_model",
]

TRUNCATION_SWITCH_N = 12
DEFAULT_HIDDEN = (128, 128, 128)

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


def compute_ranks(values) -> np.ndarray:
    """Strict-dominance ranks: ranks[j] = |{i != j : values[i] < values[j]}|.

    The best observation has rank 0; equal values share a rank.

    Args:
        values: non-empty 1-d sequence of finite reals.

    Returns:
        Integer array of the same length.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InputError("values must be a non-empty 1-d sequence")
    if not np.isfinite(v).all():
        raise InputError("values contain non-finite entries")
    return (v[:, None] > v[None, :]).sum(axis=1).astype(np.int64)


@dataclass(frozen=True)
class ObservationSet:
    """Queried points, raw objective values, and derived ranks.

    Attributes:
        points: (N, d) normalized coordinates inside the unit hypercube.
        values: (N,) raw observations.
        ranks: (N,) strict-dominance ranks, each in [0, N-1].
    """

    points: np.ndarray
    values: np.ndarray
    ranks: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        rks = np.asarray(self.ranks)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("points must be a non-empty (N, d) array")
        n = pts.shape[0]
        if vals.shape != (n,) or rks.shape != (n,):
            raise InputError("points, values, ranks must share leading length")
        if not np.isfinite(pts).all() or not np.isfinite(vals).all():
            raise InputError("non-finite points or values")
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise InputError("points must lie in the unit hypercube")
        if not np.issubdtype(rks.dtype, np.integer):
            rks = rks.astype(np.int64)
            if not np.array_equal(rks, np.asarray(self.ranks)):
                raise InputError("ranks must be integers")
        if rks.min() < 0 or rks.max() > n - 1:
            raise InputError("ranks must lie in [0, N-1]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "ranks", rks.astype(np.int64))

    @classmethod
    def from_values(cls, points, values) -> "ObservationSet":
        """Build the set with ranks derived from the values."""
        return cls(np.asarray(points, dtype=float), np.asarray(values, dtype=float),
                   compute_ranks(values))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """ADAM schedule for likelihood maximization.

    steps=0 is allowed and leaves the model untouched (used by tests and the
    cold-start path).
    """

    steps: int = 100
    batch_size: int = 64
    initial_lr: float = 0.01
    lr_decay: float = 0.2
    decay_every: int = 30
    truncation_switch_n: int = TRUNCATION_SWITCH_N

    def __post_init__(self):
        if self.steps < 0:
            raise InputError("steps must be >= 0")
        if self.batch_size < 1 or self.decay_every < 1:
            raise InputError("batch_size and decay_every must be >= 1")
        if not (self.initial_lr > 0):
            raise InputError("initial_lr must be > 0")
        if not (0 < self.lr_decay <= 1):
            raise InputError("lr_decay must lie in (0, 1]")
        if self.truncation_switch_n < 2:
            raise InputError("truncation_switch_n must be >= 2")


@dataclass
class IntensityModel:
    """Fully connected rectified-linear network with softplus output.

    weights[l] has shape (fan_in, fan_out); biases[l] has shape (fan_out,).
    The output is a single positive scalar rate per input point.
    """

    weights: list
    biases: list
    rng_seed: int = 0

    @classmethod
    def create(cls, dim: int, hidden=DEFAULT_HIDDEN, rng_seed: int = 0) -> "IntensityModel":
        """Fresh network with uniform fan-in-scaled weights and zero biases."""
        if dim < 1:
            raise InputError(f"dim must be >= 1, got {dim}")
        rng = np.random.default_rng(rng_seed)
        sizes = [int(dim), *[int(h) for h in hidden], 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights=weights, biases=biases, rng_seed=int(rng_seed))

    @property
    def dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "IntensityModel":
        return IntensityModel([w.copy() for w in self.weights],
                              [b.copy() for b in self.biases], self.rng_seed)

    def _forward(self, x: np.ndarray):
        """Batched forward pass; returns (rates, caches) for backprop."""
        h = x
        inputs = [h]
        pre_acts = []
        n_hidden = len(self.weights) - 1
        for layer in range(n_hidden):
            pre = h @ self.weights[layer] + self.biases[layer]
            h = np.maximum(pre, 0.0)
            pre_acts.append(pre)
            inputs.append(h)
        z = (h @ self.weights[-1] + self.biases[-1])[:, 0]
        rates = np.logaddexp(0.0, z)
        return rates, (inputs, pre_acts, z)

    def rates(self, x) -> np.ndarray:
        """Predicted rates for a batch of points, shape (n, d) -> (n,)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise InputError(f"expected shape (n, {self.dim}), got {x.shape}")
        if not np.isfinite(x).all():
            raise InputError("non-finite inputs")
        return self._forward(x)[0]

    def _backward(self, caches, d_rates: np.ndarray):
        """Parameter gradients of sum_j d_rates[j] * rate_j.

        Args:
            caches: the second element returned by _forward.
            d_rates: (n,) upstream derivative with respect to each rate.

        Returns:
            (grad_weights, grad_biases) matching the parameter shapes.
        """
        inputs, pre_acts, z = caches
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        delta = (d_rates * expit(z))[:, None]
        grad_w[-1] = inputs[-1].T @ delta
        grad_b[-1] = delta.sum(axis=0)
        downstream = delta @ self.weights[-1].T
        for layer in range(len(self.weights) - 2, -1, -1):
            delta = downstream * (pre_acts[layer] > 0.0)
            grad_w[layer] = inputs[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                downstream = delta @ self.weights[layer].T
        return grad_w, grad_b

    def rate_and_input_grad(self, x):
        """Rate at a single point and its gradient with respect to x.

        Args:
            x: (d,) coordinates.

        Returns:
            (rate, gradient) with gradient of shape (d,).
        """
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if x.shape[1] != self.dim:
            raise InputError(f"expected {self.dim} coordinates, got {x.shape[1]}")
        rates, (inputs, pre_acts, z) = self._forward(x)
        v = expit(z[0]) * self.weights[-1][:, 0]
        for layer in range(len(self.weights) - 2, -1, -1):
            v = self.weights[layer] @ (v * (pre_acts[layer][0] > 0.0))
        return float(rates[0]), v


def _ll_terms(rates: np.ndarray, ranks: np.ndarray, n_full: int, switch: int) -> np.ndarray:
    """Per-point log-likelihood terms k*log(rate) - log(k!) - normalizer.

    The normalizer is log S(n_full - 1) below the switch and the plain
    Poisson exponent (the rate itself) at or above it.
    """
    lf = log_factorials(int(ranks.max()))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(rates)
        k_term = np.where(ranks > 0, ranks * log_r, 0.0)
    if n_full >= switch:
        norm = rates
    else:
        norm = log_partial_exp_sum(rates, n_full - 1)
    return k_term - lf[ranks] - norm


def rate_gradient(rates: np.ndarray, ranks: np.ndarray, n_obs: int,
                  truncation_switch_n: int = TRUNCATION_SWITCH_N) -> np.ndarray:
    """Per-point derivative of the log-likelihood with respect to each rate.

    Equals k/rate - S(N-2)/S(N-1) below the switch and k/rate - 1 above it.
    """
    rates = np.asarray(rates, dtype=float)
    ranks = np.asarray(ranks)
    if n_obs >= truncation_switch_n:
        norm_grad = np.ones_like(rates)
    else:
        norm_grad = np.exp(log_partial_exp_sum(rates, n_obs - 2)
                           - log_partial_exp_sum(rates, n_obs - 1))
    return ranks / rates - norm_grad


def _require_fittable(obs: ObservationSet):
    if len(obs) < 2:
        raise PreconditionError(f"need at least 2 observations, got {len(obs)}")


def log_likelihood(model: IntensityModel, obs: ObservationSet,
                   truncation_switch_n: int = TRUNCATION_SWITCH_N) -> float:
    """Joint ranking log-likelihood of the observation set under the model.

    Includes the constant log(k!) terms so reported values are comparable
    across models and iterations.
    """
    _require_fittable(obs)
    rates = model.rates(obs.points)
    return float(np.sum(_ll_terms(rates, obs.ranks, len(obs), truncation_switch_n)))


def grad_log_likelihood(model: IntensityModel, obs: ObservationSet,
                        truncation_switch_n: int = TRUNCATION_SWITCH_N):
    """Gradient of log_likelihood with respect to every parameter.

    Returns:
        (grad_weights, grad_biases) in the model's parameter layout.
    """
    _require_fittable(obs)
    rates, caches = model._forward(obs.points)
    d_rates = rate_gradient(rates, obs.ranks, len(obs), truncation_switch_n)
    return model._backward(caches, d_rates)


def fit(model: IntensityModel, obs: ObservationSet, cfg: TrainConfig,
        rng: np.random.Generator | None = None) -> IntensityModel:
    """Train the model in place by minibatch ADAM on the negative log-likelihood.

    Minibatches of size min(batch_size, N) are drawn without replacement
    within an epoch; a leftover smaller than one batch triggers a reshuffle.
    The learning rate is initial_lr * lr_decay ** (step // decay_every).  If
    the final full-set negative log-likelihood exceeds the starting one, the
    initial parameters are restored, so the contract "final NLL <= initial"
    always holds.

    Args:
        model: network to train; mutated in place and returned.
        obs: observation set, N >= 2.
        cfg: schedule.
        rng: minibatch shuffle stream; defaults to a substream of the model's
            rng_seed so repeated calls are bitwise reproducible.

    Raises:
        TrainingDivergedError: a minibatch loss became non-finite.
    """
    _require_fittable(obs)
    if cfg.steps == 0:
        return model
    if rng is None:
        rng = np.random.default_rng([model.rng_seed, 1])
    n = len(obs)
    batch = min(cfg.batch_size, n)
    switch = cfg.truncation_switch_n

    nll_start = -log_likelihood(model, obs, switch)
    start_w = [w.copy() for w in model.weights]
    start_b = [b.copy() for b in model.biases]

    params = model.weights + model.biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]

    perm = np.empty(0, dtype=np.int64)
    pos = 0
    for step in range(cfg.steps):
        if pos + batch > perm.size:
            perm = rng.permutation(n)
            pos = 0
        idx = perm[pos:pos + batch]
        pos += batch

        rates, caches = model._forward(obs.points[idx])
        terms = _ll_terms(rates, obs.ranks[idx], n, switch)
        loss = -float(terms.mean())
        if not math.isfinite(loss):
            raise TrainingDivergedError(step)
        d_rates = rate_gradient(rates, obs.ranks[idx], n, switch)
        grad_w, grad_b = model._backward(caches, -d_rates / idx.size)

        lr = cfg.initial_lr * cfg.lr_decay ** (step // cfg.decay_every)
        t = step + 1
        bias1 = 1.0 - _ADAM_BETA1 ** t
        bias2 = 1.0 - _ADAM_BETA2 ** t
        for p, g, m, v in zip(params, grad_w + grad_b, m1, m2):
            m *= _ADAM_BETA1
            m += (1.0 - _ADAM_BETA1) * g
            v *= _ADAM_BETA2
            v += (1.0 - _ADAM_BETA2) * np.square(g)
            p -= lr * (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)

    nll_end = -log_likelihood(model, obs, switch)
    if not (nll_end <= nll_start):
        # ADAM overshot (or broke) on this set; keep the no-worse parameters.
        for w, w0 in zip(model.weights, start_w):
            w[...] = w0
        for b, b0 in zip(model.biases, start_b):
            b[...] = b0
    return model


def predict(model: IntensityModel, x, n_obs: int, use_truncated: bool | None = None,
            truncation_switch_n: int = TRUNCATION_SWITCH_N) -> RankPosterior:
    """Rank posterior of a new candidate against n_obs observed points.

    A new candidate can rank below every observation, so its support is
    {0, ..., n_obs}.  When use_truncated is None the truncated form is used
    below the switch and the plain Poisson above it.  Either way the reported
    spread is sqrt(mean).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.dim:
        raise InputError(f"expected {model.dim} coordinates, got {x.size}")
    if not np.isfinite(x).all() or x.min() < 0.0 or x.max() > 1.0:
        raise DomainError("x must lie in the unit hypercube")
    if n_obs < 0:
        raise DomainError(f"n_obs must be >= 0, got {n_obs}")
    if use_truncated is None:
        use_truncated = n_obs < truncation_switch_n

    rate = float(model.rates(x[None, :])[0])
    if use_truncated:
        probs = pmf_vector(rate, n_obs)
        mean = truncated_mean(TruncatedPoisson(rate, n_obs))
    else:
        mean = rate
        if rate == 0.0:
            probs = np.ones(1)
        else:
            # Support wide enough that the discarded plain-Poisson tail is
            # far below the 1e-12 mass tolerance.
            top = int(math.ceil(rate + 40.0 * math.sqrt(rate) + 50.0))
            ks = np.arange(top + 1, dtype=float)
            probs = np.exp(ks * math.log(rate) - rate - log_factorials(top))
    return RankPosterior(pmf=probs, mean=float(mean), stddev=math.sqrt(float(mean)))


def pack_arrays(weights, biases) -> np.ndarray:
    """Flatten per-layer arrays (weights row-major, then biases) to one vector."""
    parts = [w.ravel() for w in weights] + [b.ravel() for b in biases]
    return np.concatenate(parts)


def pack_parameters(model: IntensityModel) -> np.ndarray:
    return pack_arrays(model.weights, model.biases)


def set_parameters(model: IntensityModel, flat: np.ndarray):
    """Write a packed vector back into the model in place."""
    flat = np.asarray(flat, dtype=float)
    expected = sum(w.size for w in model.weights) + sum(b.size for b in model.biases)
    if flat.size != expected:
        raise InputError(f"parameter vector length {flat.size}, expected {expected}")
    offset = 0
    for w in model.weights:
        w[...] = flat[offset:offset + w.size].reshape(w.shape)
        offset += w.size
    for b in model.biases:
        b[...] = flat[offset:offset + b.size]
        offset += b.size


def model_to_blob(model: IntensityModel) -> str:
    """Serialize to a JSON blob: layer-size header plus row-major arrays."""
    return json.dumps({
        "layer_sizes": model.layer_sizes,
        "rng_seed": model.rng_seed,
        "weights": [w.ravel().tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    })


def model_from_blob(blob: str) -> IntensityModel:
    data = json.loads(blob)
    sizes = data["layer_sizes"]
    weights, biases = [], []
    for fan_in, fan_out, flat_w, flat_b in zip(sizes[:-1], sizes[1:],
                                               data["weights"], data["biases"]):
        w = np.asarray(flat_w, dtype=float).reshape(fan_in, fan_out)
        b = np.asarray(flat_b, dtype=float)
        if b.shape != (fan_out,):
            raise InputError("bias block does not match layer-size header")
        weights.append(w)
        biases.append(b)
    if len(weights) != len(sizes) - 1:
        raise InputError("weight blocks do not match layer-size header")
    return IntensityModel(weights=weights, biases=biases, rng_seed=int(data["rng_seed"]))


def save_model(model: IntensityModel, path):
    Path(path).write_text(model_to_blob(model), encoding="utf-8")


def load_model(path) -> IntensityModel:
    return model_from_blob(Path(path).read_text(encoding="utf-8"))
