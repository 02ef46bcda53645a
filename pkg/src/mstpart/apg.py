"""Accelerated proximal gradient descent over the row-sphere set.

Minimizes F(X) = -<C, X X^T> subject to every row of X having unit norm.
The stepsize adapts from local curvature, extrapolated trial points pass a
nonmonotone acceptance test against an averaged objective bound, and a plain
projected gradient step is the fallback.  Termination uses the infinity norm
of a first-order residual built from consecutive iterates.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ApgParams",
    "ApgResult",
    "IterRecord",
    "project_rows",
    "initial_stepsize",
    "minimize",
    "seeded_features",
    "trace_csv",
]

IterRecord = namedtuple("IterRecord", "iteration value alpha accepted error bound")


@dataclass
class ApgParams:
    """Solver controls.  delta2 = None resolves to min(2*delta1,
    0.49*(1-mu0)/alpha_1) once the first stepsize update is known, then stays
    frozen for the run.
    """

    mu0: float = 0.99
    mu1: float = 0.95
    delta1: float = 1e-4
    delta2: float | None = None
    eta: float = 0.8
    p_tilde: float = 0.1
    sigma: float = 1.0
    r: float = 2.0
    epsilon: float = 1e-3
    max_iters: int = 3000

    def __post_init__(self):
        if not 0.0 < self.mu1 < self.mu0 < 1.0:
            raise ValueError("need 0 < mu1 < mu0 < 1")
        if self.delta1 <= 0:
            raise ValueError("delta1 must be positive")
        if self.delta2 is not None and self.delta2 <= self.delta1:
            raise ValueError("delta2 must exceed delta1")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if self.p_tilde <= 0:
            raise ValueError("p_tilde must be positive")
        if self.sigma <= 0 or self.r <= 0:
            raise ValueError("sigma and r must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class ApgResult:
    X: np.ndarray
    trace: list
    iterations: int
    converged: bool
    error: float


def project_rows(X: np.ndarray) -> np.ndarray:
    """Scale each row to unit norm; an all-zero row becomes (1, 0, ..., 0)."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0.0
    out = np.empty_like(X)
    safe = np.where(zero, 1.0, norms)
    with np.errstate(invalid="ignore"):
        out[:] = X / safe[:, None]
    if np.any(zero):
        out[zero] = 0.0
        out[zero, 0] = 1.0
    return out


def initial_stepsize(op, X0: np.ndarray) -> float:
    """Secant estimate between X0 and the projected gradient direction:
    ||X0 - X1|| / ||grad(X0) - grad(X1)|| with X1 = project(grad(X0)).
    Degenerate cases fall back to 1.0.
    """
    g0 = op.gradient(X0)
    X1 = project_rows(g0)
    g1 = op.gradient(X1)
    num = np.linalg.norm(X0 - X1)
    den = np.linalg.norm(g0 - g1)
    if den == 0.0 or not np.isfinite(den) or not np.isfinite(num) or num == 0.0:
        return 1.0
    return float(num / den)


def _grow_term(k: int, p_tilde: float) -> float:
    # summable increments; the k = 0 call reuses the k = 1 value
    return 1.0 / max(k, 1) ** (1.0 + p_tilde)


def _check_finite(value: float, where: str, iteration: int):
    if not np.isfinite(value):
        raise FloatingPointError(
            f"non-finite objective at iteration {iteration} ({where})"
        )


def _value_and_gradient(op, X: np.ndarray):
    fused = getattr(op, "value_and_gradient", None)
    if fused is not None:
        return fused(X)
    return op.value(X), op.gradient(X)


def minimize(op, X0: np.ndarray, params: ApgParams | None = None) -> ApgResult:
    """Run the solver from a row-feasible X0.  Every iterate stays on the row
    sphere; the trace records (iteration, F, alpha, accepted flag, residual,
    objective bound) per step.
    """
    params = params or ApgParams()
    X0 = np.asarray(X0, dtype=np.float64)
    X_cur = project_rows(X0)
    eps = params.epsilon

    alpha = initial_stepsize(op, X_cur)
    g_cur = op.gradient(X_cur)
    F_cur = op.value(X_cur)
    _check_finite(F_cur, "start", 0)

    # stationarity probe: a fixed point of the projected gradient map stops here
    probe = project_rows(X_cur - alpha * g_cur)
    error = float(
        np.max(np.abs((probe - X_cur) / alpha + op.gradient(probe) - g_cur))
    )
    trace: list[IterRecord] = []
    if error <= eps:
        return ApgResult(X_cur, trace, 0, True, error)

    # resolve delta2 from the first grown stepsize, then freeze it
    alpha1 = alpha + min(1.0, alpha) * _grow_term(0, params.p_tilde)
    if params.delta2 is None:
        delta2 = min(2.0 * params.delta1, 0.49 * (1.0 - params.mu0) / alpha1)
        delta1 = params.delta1 if delta2 > params.delta1 else delta2 / 2.0
    else:
        delta1, delta2 = params.delta1, params.delta2

    X_prev = X_cur.copy()
    F_prev = F_cur
    g_prev = g_cur.copy()
    bound = F_cur  # nonmonotone averaged objective c_k
    q = 1.0
    k = 0

    while error > eps and k < params.max_iters:
        dX = X_cur - X_prev
        dn2 = float(np.sum(dX * dX))
        lhs = 2.0 * (F_cur - F_prev - float(np.sum(g_prev * dX)))
        if dn2 > 0.0 and lhs > (params.mu0 / alpha) * dn2:
            alpha_next = params.mu1 * dn2 / lhs
        else:
            alpha_next = alpha + min(1.0, alpha) * _grow_term(k, params.p_tilde)

        beta = k / (k + 3.0)
        y = X_cur + beta * dX
        gy = op.gradient(y)
        z = project_rows(y - alpha_next * gy)

        zy2 = float(np.sum((z - y) ** 2))
        zx2 = float(np.sum((z - X_cur) ** 2))
        yx2 = float(np.sum((y - X_cur) ** 2))
        inflate = 1.0 + params.sigma / k ** params.r if k >= 1 else 1.0
        phi1 = zy2 + zx2 - inflate * yx2
        phi2 = delta1 * zx2 - delta2 * (zy2 + zx2 - yx2)

        F_z, g_z = _value_and_gradient(op, z)
        _check_finite(F_z, "trial", k)
        if phi1 >= 0.0 and F_z <= min(F_cur + phi2, bound):
            X_next, F_next, g_next, accepted = z, F_z, g_z, True
        else:
            X_next = project_rows(X_cur - alpha_next * g_cur)
            F_next, g_next = _value_and_gradient(op, X_next)
            _check_finite(F_next, "fallback", k)
            accepted = False

        error = float(
            np.max(np.abs((X_next - X_cur) / alpha_next + g_next - g_cur))
        )

        bound_used = bound
        q_next = 1.0 + params.eta * q
        bound = (params.eta * q * bound + F_next) / q_next
        q = q_next

        X_prev, X_cur = X_cur, X_next
        F_prev, F_cur = F_cur, F_next
        g_prev, g_cur = g_cur, g_next
        alpha = alpha_next
        k += 1
        trace.append(IterRecord(k, F_next, alpha_next, accepted, error, bound_used))

    return ApgResult(X_cur, trace, k, error <= eps, error)


def trace_csv(trace) -> str:
    """Render a trace as CSV: iter, F, alpha, branch, error."""
    lines = ["iter,F,alpha,branch,error"]
    for rec in trace:
        lines.append(
            f"{rec.iteration},{rec.value:.17g},{rec.alpha:.17g},"
            f"{int(rec.accepted)},{rec.error:.17g}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# deterministic feature initialization

_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xBF58476D1CE4E5B9)
_MIX3 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    x = (x + _MIX1).astype(np.uint64)
    x ^= x >> np.uint64(30)
    x *= _MIX2
    x ^= x >> np.uint64(27)
    x *= _MIX3
    x ^= x >> np.uint64(31)
    return x


def seeded_features(n: int, k: int, stream: int = 0) -> np.ndarray:
    """Deterministic quasi-random unit-row features.  Distinct streams give
    distinct matrices; repeated calls are bit-identical on any platform.
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    idx = np.arange(n * k, dtype=np.uint64).reshape(n, k)
    stream = int(stream) & 0xFFFFFFFFFFFFFFFF
    salt = np.uint64(stream * 0x51_7C_C1_B7_27_22_0A_95 & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        bits = _mix(_mix(idx + salt) + np.uint64(stream))
    # 53 high bits -> uniform in [0, 1) -> [-1, 1)
    uniforms = (bits >> np.uint64(11)).astype(np.float64) / float(1 << 53)
    return project_rows(2.0 * uniforms - 1.0)
