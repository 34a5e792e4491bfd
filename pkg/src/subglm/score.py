"""Decorrelated score evaluation and the subsampled score equation.

With nuisance estimate gamma and decorrelation matrix W held fixed, the score
at theta is

    S(theta) = (1/m) sum_i w_i (b'(theta'z_i + gamma'u_i) - y_i)(z_i - W u_i)

where the sum runs over the full data (m = n, w_i = 1) or over a Poisson
subsample K with inverse-probability weights (equivalently (1/r) sum_{i in K},
with r the expected subsample size).  The theta-Jacobian replaces the residual
by b''(.) and appends z_i' on the right; the finite-sample Jacobian is not
symmetric even though its population limit is.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateInputError, InvalidInputError, SingularMatrixError
from .families import GlmFamily
from .sampling import SubsampleIndex

COND_CAP = 1e12
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100
NEWTON_MAX_HALVINGS = 30


class ScoreContext:
    """Evaluation context: family, data, fixed (gamma, W), and the index mode.

    ``subsample=None`` selects full-data mode.  Precomputes the projected
    interest block z - W u and the nuisance offsets gamma'u once; contexts are
    read-only after construction and safe to share across threads.
    """

    def __init__(self, family: GlmFamily, data, gamma, W, subsample: SubsampleIndex | None = None):
        gamma = np.asarray(gamma, dtype=float)
        W = np.asarray(W, dtype=float)
        d = data.d
        if gamma.shape != (data.p - d,) or W.shape != (d, data.p - d):
            raise InvalidInputError("gamma/W shapes do not match the dataset split")
        self.family = family
        self.data = data
        self.gamma = gamma
        self.W = W
        self.subsample = subsample
        if subsample is None:
            rows = slice(None)
            self.m = float(data.n)
        else:
            if subsample.size == 0 or subsample.r <= 0:
                raise DegenerateInputError("empty subsample in score context")
            rows = subsample.rows()
            self.m = float(subsample.r)
        self.z = data.X[rows, : d]
        u = data.X[rows, d:]
        self.y = data.y[rows]
        self.zw = self.z - u @ W.T
        self.offset = u @ gamma

    @property
    def is_subsample(self):
        return self.subsample is not None

    def as_full(self):
        """Full-data twin with the same (gamma, W)."""
        if self.subsample is None:
            return self
        return ScoreContext(self.family, self.data, self.gamma, self.W, None)


def score(ctx: ScoreContext, theta):
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("theta must be finite")
    resid = ctx.family.b1(ctx.z @ theta + ctx.offset) - ctx.y
    return (resid @ ctx.zw) / ctx.m


def score_jacobian_theta(ctx: ScoreContext, theta):
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("theta must be finite")
    w = ctx.family.b2(ctx.z @ theta + ctx.offset)
    return (ctx.zw * w[:, None]).T @ ctx.z / ctx.m


@dataclass
class NewtonResult:
    theta: np.ndarray
    residual: float
    iterations: int


def check_conditioning(M, what):
    """Raise SingularMatrixError unless M is finite with condition number < 1e12."""
    if not np.all(np.isfinite(M)):
        raise SingularMatrixError(f"{what} has non-finite entries")
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond >= COND_CAP:
        raise SingularMatrixError(f"{what} singular or condition number >= 1e12")


def _checked_solve(J, s):
    check_conditioning(J, "score Jacobian")
    return np.linalg.solve(J, s)


def solve_subsampled_score(ctx: ScoreContext, theta_init) -> NewtonResult:
    """Newton iterations on the subsampled score equation from theta_init.

    Damped: a step that increases the sup-norm of the score is halved up to
    30 times.  Succeeds when ||S*(theta)||_inf < 1e-10; raises ConvergenceError
    (carrying the achieved residual) after 100 iterations.
    """
    theta = np.asarray(theta_init, dtype=float).copy()
    s = score(ctx, theta)
    res = float(np.abs(s).max())
    for it in range(NEWTON_MAX_ITER):
        if res < NEWTON_TOL:
            return NewtonResult(theta=theta, residual=res, iterations=it)
        J = score_jacobian_theta(ctx, theta)
        step = _checked_solve(J, s)
        scale = 1.0
        best_theta, best_s, best_res = None, None, np.inf
        for _ in range(NEWTON_MAX_HALVINGS + 1):
            cand = theta - scale * step
            s_cand = score(ctx, cand)
            r_cand = float(np.abs(s_cand).max())
            if r_cand < best_res:
                best_theta, best_s, best_res = cand, s_cand, r_cand
            if r_cand < res:
                break
            scale *= 0.5
        theta, s, res = best_theta, best_s, best_res
    if res < NEWTON_TOL:
        return NewtonResult(theta=theta, residual=res, iterations=NEWTON_MAX_ITER)
    raise ConvergenceError(
        f"score equation not solved after {NEWTON_MAX_ITER} iterations "
        f"(residual {res:.3e})",
        residual=res,
    )
