"""GLM families under the canonical link: cumulant function, derivatives, losses.

The conditional density is proportional to exp{(y t - b(t)) / c(sigma)} with
natural parameter t = x'beta.  Only the gaussian (b(t) = t^2/2, identity link)
and logistic (b(t) = log(1 + e^t), logit link) families are supported.
"""

import numpy as np
from scipy.special import expit

from .errors import DegenerateInputError, InvalidInputError


class GlmFamily:
    """Cumulant function b with its first three derivatives and dispersion handling.

    For logistic, the dispersion c(sigma0) is known and equal to 1.  For
    gaussian it is the error variance, estimated downstream from pilot
    residuals.
    """

    def __init__(self, kind):
        if kind not in ("gaussian", "logistic"):
            raise InvalidInputError(f"unknown family kind {kind!r}")
        self.kind = kind
        self.dispersion_known = kind == "logistic"

    def __repr__(self):
        return f"GlmFamily({self.kind!r})"

    def b(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return 0.5 * t * t
        # log(1 + e^t) without overflow for |t| up to ~700
        return np.log1p(np.exp(-np.abs(t))) + np.maximum(t, 0.0)

    def b1(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return t.copy()
        return expit(t)

    def b2(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return np.ones_like(t)
        # symmetric product form 1/((1+e^t)(1+e^-t)); underflows to 0 gracefully
        return expit(t) * expit(-t)

    def b3(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return np.zeros_like(t)
        p = expit(t)
        return p * expit(-t) * (1.0 - 2.0 * p)


GAUSSIAN = GlmFamily("gaussian")
LOGISTIC = GlmFamily("logistic")


def family_from_name(name) -> GlmFamily:
    if name == "gaussian":
        return GAUSSIAN
    if name == "logistic":
        return LOGISTIC
    raise InvalidInputError(f"unknown family {name!r}")


def b_derivatives(family: GlmFamily, t):
    """(b, b', b'', b''') at t; vectorized, stable for logistic |t| up to 700."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("b_derivatives requires finite t")
    return family.b(arr), family.b1(arr), family.b2(arr), family.b3(arr)


def neg_loglik(family: GlmFamily, data, beta, indices=None, weights=None):
    """Mean of per-observation losses b(x'beta) - y * x'beta over an index set.

    ``indices`` are 1-based observation indices (full data when absent);
    ``weights`` multiply per-observation losses and default to 1.
    """
    bvec = np.asarray(beta.beta if hasattr(beta, "beta") else beta, dtype=float)
    if indices is None:
        rows = slice(None)
        count = data.n
    else:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 1 or idx.max() > data.n):
            raise InvalidInputError("indices must lie in [1, n]")
        rows = idx - 1
        count = idx.size
    if count == 0:
        raise DegenerateInputError("empty index set in neg_loglik")
    t = data.X[rows] @ bvec
    y = data.y[rows]
    loss = family.b(t) - y * t
    if weights is not None:
        loss = loss * np.asarray(weights, dtype=float)
    return float(np.sum(loss) / count)
