"""Synthetic data generation for the simulation benchmarks.

Covariates are multivariate normal or multivariate t10 with a Toeplitz
covariance rho^|j-k| (one chi-square divisor per row for the t), optionally
divided by a scale constant.  Responses are linear with N(0,1) or 2*t5 noise,
or Bernoulli with logit alpha0 + beta0'x.  Generation is index-addressed per
observation, so row blocks can be produced in parallel with identical output.

Named presets reproduce the benchmark designs: ``linear-a`` .. ``linear-d``
(beta0 starts with three sqrt(3) entries, gaussian/t10 covariates crossed
with normal/2*t5 errors) and ``logistic-a``/``logistic-b`` (beta0 starts with
(1, -1, 1), covariates divided by 3, intercept alpha0 = 0.5 entering through
a constant column appended to the nuisance block).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .data import Dataset
from .errors import InvalidInputError
from .families import GAUSSIAN, LOGISTIC
from .sampling import STREAM_COVARIATES, STREAM_RESPONSE, SeedSpec, normal_block, uniform_block

_CHI_T10 = 10  # normals consumed per row by the t10 divisor
_CHI_T5 = 5


@dataclass
class SimConfig:
    model: str = "linear"           # linear | logistic
    cov_dist: str = "gaussian"      # gaussian | t10
    err_dist: str = "std_normal"    # std_normal | two_t5 | none (linear only)
    n: int = 1000
    p: int = 50
    d: int = 3
    rho: float = 0.5
    beta0: np.ndarray = field(default=None)
    alpha0: float = 0.5
    cov_scale: float = 1.0

    def __post_init__(self):
        if self.beta0 is None:
            self.beta0 = preset_beta0(self.model, self.p)
        self.beta0 = np.asarray(self.beta0, dtype=float)
        if not -1.0 < self.rho < 1.0:
            raise InvalidInputError("rho must lie in (-1, 1)")
        if self.beta0.shape != (self.p,):
            raise InvalidInputError("beta0 must have length p")

    @property
    def family(self):
        return LOGISTIC if self.model == "logistic" else GAUSSIAN


def preset_beta0(model, p):
    """Benchmark coefficient vectors: leading signal entries, zeros elsewhere."""
    beta = np.zeros(p)
    if model == "logistic":
        beta[:3] = [1.0, -1.0, 1.0]
    else:
        beta[:3] = math.sqrt(3.0)
    return beta


_PRESETS = {
    "linear-a": dict(model="linear", cov_dist="gaussian", err_dist="std_normal", cov_scale=1.0),
    "linear-b": dict(model="linear", cov_dist="gaussian", err_dist="two_t5", cov_scale=1.0),
    "linear-c": dict(model="linear", cov_dist="t10", err_dist="std_normal", cov_scale=1.0),
    "linear-d": dict(model="linear", cov_dist="t10", err_dist="two_t5", cov_scale=1.0),
    "logistic-a": dict(model="logistic", cov_dist="gaussian", cov_scale=3.0),
    "logistic-b": dict(model="logistic", cov_dist="t10", cov_scale=3.0),
}


def preset(name, n, p, d) -> SimConfig:
    if name not in _PRESETS:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")
    return SimConfig(n=n, p=p, d=d, **_PRESETS[name])


def toeplitz_cholesky(p, rho):
    """Lower-triangular L with L L' = Toeplitz(rho^|j-k|)."""
    if not -1.0 < rho < 1.0:
        raise InvalidInputError("rho must lie in (-1, 1)")
    idx = np.arange(p)
    sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(sigma)


def gen_covariates(config: SimConfig, n, seed: SeedSpec):
    """n x p covariate rows; per-row stream layout [p z-normals, 10 chi-normals]."""
    L = toeplitz_cholesky(config.p, config.rho)
    stride = config.p + (_CHI_T10 if config.cov_dist == "t10" else 0)
    buf = normal_block(seed.with_stream(STREAM_COVARIATES), 0, n * stride).reshape(n, stride)
    X = buf[:, : config.p] @ L.T
    if config.cov_dist == "t10":
        chi = np.sum(buf[:, config.p:] ** 2, axis=1)
        X = X / np.sqrt(chi / _CHI_T10)[:, None]
    return X / config.cov_scale


def gen_covariate_rows(config: SimConfig, n, seed: SeedSpec, start, stop):
    """Rows [start, stop) of gen_covariates(config, n, seed); block-parallel view."""
    L = toeplitz_cholesky(config.p, config.rho)
    stride = config.p + (_CHI_T10 if config.cov_dist == "t10" else 0)
    buf = normal_block(
        seed.with_stream(STREAM_COVARIATES), start * stride, (stop - start) * stride
    ).reshape(stop - start, stride)
    X = buf[:, : config.p] @ L.T
    if config.cov_dist == "t10":
        chi = np.sum(buf[:, config.p:] ** 2, axis=1)
        X = X / np.sqrt(chi / _CHI_T10)[:, None]
    return X / config.cov_scale


def gen_response(config: SimConfig, X, seed: SeedSpec):
    """Responses for the given covariates; one fixed-size stream slot per row."""
    n = X.shape[0]
    if X.shape[1] != config.p:
        raise InvalidInputError("X column count must equal p")
    eta = X @ config.beta0
    rs = seed.with_stream(STREAM_RESPONSE)
    if config.model == "logistic":
        u = uniform_block(rs, 0, n)
        prob = expit(config.alpha0 + eta)
        return (u < prob).astype(float)
    if config.err_dist == "none":
        return eta.copy()
    if config.err_dist == "std_normal":
        return eta + normal_block(rs, 0, n)
    if config.err_dist == "two_t5":
        buf = normal_block(rs, 0, n * (1 + _CHI_T5)).reshape(n, 1 + _CHI_T5)
        chi = np.sum(buf[:, 1:] ** 2, axis=1)
        t5 = buf[:, 0] / np.sqrt(chi / _CHI_T5)
        return eta + 2.0 * t5
    raise InvalidInputError(f"unknown err_dist {config.err_dist!r}")


def make_dataset(config: SimConfig, master_seed):
    """(Dataset, theta0) for one replication seed.

    Logistic designs get a constant-1 column appended to the nuisance block,
    carrying the intercept alpha0; linear designs do not.
    """
    seed = SeedSpec(master_seed, 0)
    X = gen_covariates(config, config.n, seed)
    y = gen_response(config, X, seed)
    if config.model == "logistic":
        X = np.column_stack([X, np.ones(config.n)])
    theta0 = config.beta0[: config.d].copy()
    return Dataset(X, y, config.d), theta0


def config_with(config: SimConfig, **kwargs) -> SimConfig:
    return replace(config, **kwargs)
