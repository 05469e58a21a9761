"""Reproducible random streams and streaming Monte Carlo means.

Streams are counter based: a stream is identified by ``(master_seed,
stream_index)`` and its generator is a Philox instance keyed by a hash of the
pair, so any stream can be created in O(1) and replayed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

METHODS = ("uniform-weighted", "self-sampled", "exact-reduction", "closed-form")

# draws are grouped into blocks of this size; block b always uses stream b,
# independent of how many shards the work is split into
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed) & (2**64 - 1),
            spawn_key=(int(self.stream_index) & (2**64 - 1),),
        )
        return np.random.Generator(np.random.Philox(seq))

    def child(self, index: int) -> RngStream:
        """A stream derived from this one; children of distinct streams never collide."""
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed) & (2**64 - 1),
            spawn_key=(int(self.stream_index) & (2**64 - 1), int(index)),
        )
        return RngStream(int(seq.generate_state(1, np.uint64)[0]), 0)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a numpy Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


@dataclass(frozen=True)
class EntropyEstimate:
    """A Monte Carlo or deterministic estimate with its standard error."""

    value: float
    std_error: float
    n_samples: int
    method: str
    ess: Optional[float] = None
    reliable: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"estimate value must be finite, got {self.value}")
        if not (self.std_error >= 0):
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.method in ("exact-reduction", "closed-form") and self.std_error != 0:
            raise ValueError(f"{self.method} estimates carry no sampling error")

    def scaled(self, factor: float, shift: float = 0.0) -> EntropyEstimate:
        """The estimate of ``factor * X + shift``."""
        return EntropyEstimate(
            self.value * factor + shift,
            self.std_error * abs(factor),
            self.n_samples,
            self.method,
            self.ess,
            self.reliable,
        )

    def within(self, target: float, n_sigma: float = 3.0) -> bool:
        return abs(self.value - target) <= n_sigma * self.std_error


class NonFiniteSampleError(ArithmeticError):
    def __init__(self, stream_index: int, draw: int, value: float):
        super().__init__(
            f"integrand returned {value!r} at stream {stream_index}, draw {draw}"
        )
        self.stream_index = stream_index
        self.draw = draw
        self.value = value


@dataclass
class Welford:
    """Running count/mean/sum-of-squared-deviations, mergeable (Chan et al.)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add_batch(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return
        mu = float(values.mean())
        m2 = float(np.sum((values - mu) ** 2))
        self.merge(Welford(values.size, mu, m2))

    def merge(self, other: Welford) -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_error(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(max(self.variance, 0.0) / self.count)


def _block_values(integrand, sampler, master_seed, block, n_total):
    size = min(BLOCK_SIZE, n_total - block * BLOCK_SIZE)
    samples = sampler(RngStream(master_seed, block), size)
    vals = np.asarray(integrand(samples), dtype=float).reshape(-1)
    if vals.size != size:
        raise ValueError(f"integrand returned {vals.size} values for {size} samples")
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteSampleError(block, block * BLOCK_SIZE + i, float(vals[i]))
    return vals


def shard_stats(integrand, sampler, n, shard, shards, master_seed) -> Welford:
    """Accumulate draws ``[shard*n/shards, (shard+1)*n/shards)``."""
    per = n // shards
    lo, hi = shard * per, (shard + 1) * per
    acc = Welford()
    for block in range(lo // BLOCK_SIZE, (hi - 1) // BLOCK_SIZE + 1):
        start = block * BLOCK_SIZE
        vals = _block_values(integrand, sampler, master_seed, block, n)
        acc.add_batch(vals[max(lo - start, 0): hi - start])
    return acc


def estimate_mean(
    integrand: Callable[[np.ndarray], np.ndarray],
    sampler: Callable[[RngStream, int], np.ndarray],
    n: int,
    shards: int = 1,
    master_seed: int = 0,
    method: str = "self-sampled",
) -> EntropyEstimate:
    """Sample mean of ``integrand(sampler(stream, size))`` with its standard error.

    ``sampler(stream, size)`` must return ``size`` samples stacked along the
    first axis and ``integrand`` must map them to ``size`` reals. Draw ``d``
    always comes from block stream ``d // BLOCK_SIZE`` so the set of draws does
    not depend on ``shards``; shard statistics are folded in shard order.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if shards < 1 or n % shards:
        raise ValueError(f"n={n} must be divisible by shards={shards} >= 1")
    total = Welford()
    for s in range(shards):
        total.merge(shard_stats(integrand, sampler, n, s, shards, master_seed))
    return EntropyEstimate(total.mean, total.std_error, total.count, method)
