"""Datasets with an interest/nuisance column split, and their file formats.

A dataset is an n x p design matrix X with response y.  The first ``d``
columns of X are the interest block z, the remaining p - d columns the
nuisance block u; the split is positional and fixed at construction.  There
is no implicit intercept: callers wanting one append a constant-1 column
inside u.

Two interchange formats:

* CSV with header row ``y,x1,...,xp``, one observation per line.
* Binary: 16-byte header (magic ``SGLM``, little-endian u32 n, u32 p, u32
  reserved) followed by n * (p + 1) little-endian float64 laid out row-major
  as (y, x1, .., xp).
"""

import struct

import numpy as np

from .errors import InvalidInputError

_MAGIC = b"SGLM"


class Dataset:
    """Immutable design matrix + response with interest dimension ``d``."""

    def __init__(self, X, y, d):
        X = np.array(X, dtype=float, order="C", copy=True)
        y = np.array(y, dtype=float, copy=True)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise InvalidInputError("X must be n x p with y of length n")
        n, p = X.shape
        if n < 1:
            raise InvalidInputError("need at least one observation")
        if not 1 <= d < p:
            raise InvalidInputError(f"interest dimension must satisfy 1 <= d < p, got d={d}, p={p}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInputError("dataset entries must be finite")
        X.flags.writeable = False
        y.flags.writeable = False
        self.X = X
        self.y = y
        self.d = int(d)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def z(self):
        """Interest columns (n x d view)."""
        return self.X[:, : self.d]

    @property
    def u(self):
        """Nuisance columns (n x (p-d) view)."""
        return self.X[:, self.d:]

    def __repr__(self):
        return f"Dataset(n={self.n}, p={self.p}, d={self.d})"


class ParamSplit:
    """Coefficient vector beta with views theta (first d) and gamma (rest)."""

    def __init__(self, beta, d):
        beta = np.asarray(beta, dtype=float)
        if beta.ndim != 1 or not 1 <= d < beta.size:
            raise InvalidInputError("beta must be a p-vector with 1 <= d < p")
        self.beta = beta
        self.d = int(d)

    @property
    def theta(self):
        return self.beta[: self.d]

    @property
    def gamma(self):
        return self.beta[self.d:]

    def copy(self):
        return ParamSplit(self.beta.copy(), self.d)

    def __repr__(self):
        return f"ParamSplit(p={self.beta.size}, d={self.d})"


def save_csv(path, X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    header = "y," + ",".join(f"x{j}" for j in range(1, X.shape[1] + 1))
    body = np.column_stack([y, X])
    np.savetxt(path, body, delimiter=",", header=header, comments="", fmt="%.17g")


def load_csv(path, d) -> Dataset:
    with open(path, "r") as fh:
        header = fh.readline().strip()
    cols = header.split(",")
    if not cols or cols[0] != "y":
        raise InvalidInputError(f"CSV header must start with 'y', got {header[:40]!r}")
    p = len(cols) - 1
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if body.shape[1] != p + 1:
        raise InvalidInputError("CSV row width does not match header")
    return Dataset(body[:, 1:], body[:, 0], d)


def save_binary(path, X, y):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", n, p, 0))
        np.column_stack([y, X]).astype("<f8").tofile(fh)


def load_binary(path, d) -> Dataset:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != _MAGIC:
            raise InvalidInputError("bad binary header (expected SGLM magic)")
        n, p, _ = struct.unpack("<III", head[4:])
        body = np.fromfile(fh, dtype="<f8", count=n * (p + 1))
    if body.size != n * (p + 1):
        raise InvalidInputError("binary payload truncated")
    body = body.reshape(n, p + 1)
    return Dataset(body[:, 1:], body[:, 0], d)


def load_dataset(path, d) -> Dataset:
    """Sniff the format from the magic bytes and load."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == _MAGIC:
        return load_binary(path, d)
    return load_csv(path, d)
