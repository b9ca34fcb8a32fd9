"""Stochastic oracles, mini-batch estimation, and batch-size schedules.

An oracle returns noisy evaluations of an expectation-valued operator V.
Mini-batching averages m iid draws so the estimator error variance decays
like sigma^2/m; schedules grow m with the iteration counter k. Randomness
always comes from caller-owned numpy Generator streams, so replications are
reproducible and may run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import NumericFailure, UnsupportedOperation, as_point

__all__ = [
    "StochasticOracle",
    "NoiseModel",
    "build_oracle",
    "BatchSchedule",
    "batch_size",
    "minibatch_estimate",
    "empirical_variance",
]


class StochasticOracle:
    """Evaluation contract for a sampler of V.

    Attributes:
        mean: callable x -> V(x) exactly, or None when unavailable.
        variance_bound: sigma with E||sample(x) - V(x)||^2 <= sigma^2,
            or None when not declared.
        bias_bound: b_hat with ||E batch(x, m) - V(x)|| <= b_hat/sqrt(m);
            zero for unbiased oracles.
    """

    mean = None
    variance_bound = None
    bias_bound = 0.0

    def sample(self, x, rng):
        """One draw of V_hat(x, xi)."""
        raise NotImplementedError

    def batch(self, x, m, rng):
        """Average of m sequential draws. Subclasses vectorize this."""
        acc = None
        for t in range(m):
            s = np.asarray(self.sample(x, rng), dtype=np.float64)
            if not np.all(np.isfinite(s)):
                raise NumericFailure(f"oracle draw {t} is non-finite")
            acc = s if acc is None else acc + s
        return acc / m


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise description: gaussian, uniform, or biased gaussian.

    kind "gaussian": iid N(0, sigma^2) per coordinate.
    kind "uniform": iid U[-half_width, half_width] per coordinate.
    kind "biased": gaussian noise plus a deterministic offset of norm
        bias/sqrt(m) per batch of size m, along a fixed unit direction.
    """

    kind: str
    sigma: float = 0.0
    half_width: float = 0.0
    bias: float = 0.0
    direction: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "biased"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        for name in ("sigma", "half_width", "bias"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @staticmethod
    def gaussian(sigma):
        return NoiseModel(kind="gaussian", sigma=float(sigma))

    @staticmethod
    def uniform(half_width):
        return NoiseModel(kind="uniform", half_width=float(half_width))

    @staticmethod
    def biased(sigma, bias, direction=None):
        if direction is not None:
            direction = as_point(direction)
            n = float(np.linalg.norm(direction))
            if n == 0:
                raise ValueError("bias direction must be nonzero")
            direction = direction / n
        return NoiseModel(kind="biased", sigma=float(sigma),
                          bias=float(bias), direction=direction)


class _NoiseInjectionOracle(StochasticOracle):
    """mean_fn plus literal sampled noise; batches draw an (m, d) block.

    Filling an (m, d) array consumes the generator exactly like m sequential
    d-vectors, so batch() and m calls to sample() see the same draws.
    """

    def __init__(self, mean_fn, noise: NoiseModel, dim: int):
        self.mean = mean_fn
        self.noise = noise
        self.dim = int(dim)
        if noise.kind == "uniform":
            per_coord_var = noise.half_width ** 2 / 3.0
        else:
            per_coord_var = noise.sigma ** 2
        self.variance_bound = float(np.sqrt(self.dim * per_coord_var))
        self.bias_bound = noise.bias if noise.kind == "biased" else 0.0
        if noise.kind == "biased":
            u = noise.direction
            if u is None:
                u = np.ones(self.dim) / np.sqrt(self.dim)
            if u.shape[0] != self.dim:
                raise ValueError("bias direction dimension mismatch")
            self._u = u
        else:
            self._u = None

    def _noise_block(self, m, rng):
        if self.noise.kind == "uniform":
            w = self.noise.half_width
            if w == 0.0:
                return None
            return rng.uniform(-w, w, size=(m, self.dim))
        if self.noise.sigma == 0.0:
            return None
        return self.noise.sigma * rng.standard_normal((m, self.dim))

    def sample(self, x, rng):
        v = np.asarray(self.mean(x), dtype=np.float64)
        block = self._noise_block(1, rng)
        if block is not None:
            v = v + block[0]
        if self._u is not None:
            v = v + self.noise.bias * self._u
        return v

    def batch(self, x, m, rng):
        v = np.asarray(self.mean(x), dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise NumericFailure("oracle draw 0 is non-finite (mean overflow)")
        block = self._noise_block(m, rng)
        if block is not None:
            if not np.all(np.isfinite(block)):
                bad = int(np.where(~np.isfinite(block).all(axis=1))[0][0])
                raise NumericFailure(f"oracle draw {bad} is non-finite")
            v = v + block.mean(axis=0)
        if self._u is not None:
            v = v + (self.noise.bias / np.sqrt(m)) * self._u
        return v


def build_oracle(mean_fn, noise: NoiseModel, dim: int) -> StochasticOracle:
    """Oracle that adds the given noise model on top of an exact mean map."""
    return _NoiseInjectionOracle(mean_fn, noise, dim)


@dataclass(frozen=True)
class BatchSchedule:
    """Batch-size rule m_k; produced sizes are >= 1 and non-decreasing.

    kinds: constant(m), polynomial(theta) -> floor(k^theta),
    geometric(p) -> floor(p^-k), scaled_polynomial(theta, scale n)
    -> floor(k^theta / n).
    """

    kind: str
    m: int | None = None
    theta: float | None = None
    p: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.m is None or int(self.m) < 1:
                raise ValueError("constant schedule needs m >= 1")
        elif self.kind == "polynomial":
            if self.theta is None or self.theta <= 0:
                raise ValueError("polynomial schedule needs theta > 0")
        elif self.kind == "geometric":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ValueError("geometric schedule needs p in (0,1)")
        elif self.kind == "scaled_polynomial":
            if self.theta is None or self.theta <= 0:
                raise ValueError("scaled_polynomial needs theta > 0")
            if self.scale is None or self.scale < 1:
                raise ValueError("scaled_polynomial needs scale n >= 1")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @staticmethod
    def constant(m):
        return BatchSchedule(kind="constant", m=int(m))

    @staticmethod
    def polynomial(theta):
        return BatchSchedule(kind="polynomial", theta=float(theta))

    @staticmethod
    def geometric(p):
        return BatchSchedule(kind="geometric", p=float(p))

    @staticmethod
    def scaled_polynomial(theta, scale):
        return BatchSchedule(kind="scaled_polynomial", theta=float(theta),
                             scale=float(scale))


def batch_size(schedule: BatchSchedule, k: int) -> int:
    """m_k for iteration k >= 1, clamped to at least 1.

    The geometric rule floor(p^-k) is evaluated in exact rational arithmetic
    (p is a binary rational) so values stay exact and monotone even when they
    exceed float range.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if schedule.kind == "constant":
        return int(schedule.m)
    if schedule.kind == "polynomial":
        return max(1, int(np.floor(float(k) ** schedule.theta)))
    if schedule.kind == "scaled_polynomial":
        return max(1, int(np.floor(float(k) ** schedule.theta / schedule.scale)))
    # geometric: float evaluation unless the value sits within rounding
    # distance of an integer (or overflows), where the exact rational
    # power of the binary-rational p settles the floor.
    try:
        v = float(schedule.p) ** float(-k)
    except OverflowError:
        v = np.inf
    if np.isfinite(v) and v < 2.0 ** 53:
        f = np.floor(v)
        margin = max(1e-6, v * 1e-12)  # comfortably above pow round-off
        if min(v - f, f + 1.0 - v) > margin:
            return max(1, int(f))
    val = Fraction(schedule.p) ** (-k)
    return max(1, int(val.numerator // val.denominator))


def minibatch_estimate(oracle: StochasticOracle, x, m: int, rng):
    """Mini-batch average of m oracle draws at x.

    Returns (estimate, draws_used). Non-finite draws raise NumericFailure
    naming the offending draw index.
    """
    if m < 1:
        raise ValueError("batch size must be >= 1")
    est = oracle.batch(x, int(m), rng)
    est = np.asarray(est, dtype=np.float64)
    if not np.all(np.isfinite(est)):
        raise NumericFailure("minibatch estimate is non-finite")
    return est, int(m)


def empirical_variance(oracle: StochasticOracle, x, m: int, repeats: int,
                       rng) -> float:
    """Sample variance of ||estimate - mean(x)|| over independent batches."""
    if repeats < 2:
        raise ValueError("empirical_variance needs repeats >= 2")
    if oracle.mean is None:
        raise UnsupportedOperation(
            "oracle lacks an exact mean; empirical variance undefined")
    v = np.asarray(oracle.mean(x), dtype=np.float64)
    norms = np.empty(repeats)
    for i in range(repeats):
        est, _ = minibatch_estimate(oracle, x, m, rng)
        norms[i] = np.linalg.norm(est - v)
    return float(np.var(norms, ddof=1))
