"""Uniform Poisson subsampling and replayable, index-addressed random streams.

Every source of randomness in the package is a (master_seed, stream_id) pair
mapped onto a counter-based Philox generator, so streams can be regenerated
in arbitrary blocks: the value at position ``i`` of a stream depends only on
the pair and on ``i``, never on how many draws preceded it in a particular
run.  Stream ids are documented constants:

========================  =====================================
pilot subsample           ``STREAM_PILOT`` (1)
main subsample            ``STREAM_MAIN`` (2)
Monte-Carlo CI draws      ``STREAM_MONTE_CARLO`` (3)
bootstrap draw k          ``STREAM_BOOTSTRAP_BASE + k`` (1000+k)
covariate generation      ``STREAM_COVARIATES`` (20)
response generation       ``STREAM_RESPONSE`` (21)
cross-validation folds    ``STREAM_CV_FOLDS`` (30)
========================  =====================================

Replication ``j`` of an experiment shifts the master seed by ``j``.
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .errors import InvalidInputError

STREAM_PILOT = 1
STREAM_MAIN = 2
STREAM_MONTE_CARLO = 3
STREAM_COVARIATES = 20
STREAM_RESPONSE = 21
STREAM_CV_FOLDS = 30
STREAM_BOOTSTRAP_BASE = 1000

_U64 = 1 << 64
# random() doubles can be exactly 0.0; clamp before the normal inverse CDF.
_MIN_UNIFORM = 2.0 ** -54


@dataclass(frozen=True)
class SeedSpec:
    """A (master_seed, stream_id) pair naming one independent random stream."""

    master_seed: int
    stream_id: int

    def key(self):
        """128-bit Philox key: master seed in the low word, stream id in the high."""
        return (self.master_seed % _U64) + ((self.stream_id % _U64) << 64)

    def with_stream(self, stream_id):
        return SeedSpec(self.master_seed, stream_id)

    def shifted(self, j):
        """Seed for replication ``j``: shifts the master seed, keeps the stream."""
        return SeedSpec((self.master_seed + j) % _U64, self.stream_id)


def generator(seed: SeedSpec) -> Generator:
    """Fresh generator positioned at the start of the stream."""
    return Generator(Philox(key=seed.key()))


def uniform_block(seed: SeedSpec, start, count):
    """Doubles in [0, 1) at stream positions [start, start + count).

    Each double consumes one 64-bit word; Philox counters advance in blocks
    of four words, so the block is aligned down and the remainder discarded.
    """
    if count == 0:
        return np.empty(0)
    bit_gen = Philox(key=seed.key())
    skip, rem = divmod(int(start), 4)
    bit_gen.advance(skip)
    return Generator(bit_gen).random(rem + int(count))[rem:]


def normal_block(seed: SeedSpec, start, count):
    """Standard normals at stream positions [start, start + count).

    Inverse-CDF transform of one uniform per normal keeps the stream
    index-addressed (a ziggurat would consume a variable number of words).
    """
    u = uniform_block(seed, start, count)
    return ndtri(np.maximum(u, _MIN_UNIFORM))


@dataclass(frozen=True)
class SubsampleIndex:
    """Poisson subsample: sorted 1-based observation indices out of ``n``.

    ``r`` is the expected subsample size; the realized size ``len(indices)``
    fluctuates around it.  ``r`` (not the realized size) is the normalizer in
    every inverse-probability-weighted average downstream.
    """

    indices: np.ndarray
    n: int
    r: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if idx.size:
            if idx[0] < 1 or idx[-1] > self.n:
                raise InvalidInputError("subsample indices must lie in [1, n]")
            if np.any(np.diff(idx) <= 0):
                raise InvalidInputError("subsample indices must be strictly increasing")

    @property
    def size(self):
        return int(self.indices.size)

    def rows(self):
        """0-based row positions for array indexing."""
        return self.indices - 1


def poisson_subsample(n, r, seed: SeedSpec) -> SubsampleIndex:
    """Include each of ``n`` observations independently with probability r/n.

    Inclusion of observation i is decided by the i-th uniform of the stream,
    so generating index ranges in parallel blocks reproduces the sequential
    set exactly.
    """
    n = int(n)
    if n < 1:
        raise InvalidInputError(f"population size must be >= 1, got {n}")
    if not np.isfinite(r) or r < 0 or r > n:
        raise InvalidInputError(f"expected subsample size must lie in [0, n], got {r}")
    prob = float(r) / n
    u = uniform_block(seed, 0, n)
    idx = np.flatnonzero(u < prob).astype(np.int64) + 1
    return SubsampleIndex(indices=idx, n=n, r=float(r))


def poisson_subsample_block(n, r, seed: SeedSpec, start_obs, stop_obs):
    """1-based indices selected among observations [start_obs, stop_obs) (0-based range).

    Block view used by parallel generation; the union over a partition of
    [0, n) equals ``poisson_subsample(n, r, seed).indices``.
    """
    prob = float(r) / n
    u = uniform_block(seed, start_obs, stop_obs - start_obs)
    return np.flatnonzero(u < prob).astype(np.int64) + 1 + start_obs
