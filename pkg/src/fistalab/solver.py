"""Accelerated proximal-gradient solvers for bounded composite problems.

`run_mfista` is the main method: a FISTA-shaped iteration that works when the
smooth part is nonconvex by (a) taking the conservative step 1/(4L), and
(b) tracking an online estimate of the negative-curvature modulus, which is
re-estimated from the last linearization gap each iteration and shifts the
model whenever it is positive.  On convex problems the estimate stays at
zero and the iteration reduces to plain FISTA with step 1/(4L) and projected
extrapolation.  Termination is on the norm of an explicit stationarity
residual v with v in grad f(y) + subdiff h(y), so a converged result is a
near-stationarity certificate.

Two baselines share the trace format: classic FISTA with a configurable step
and non-accelerated proximal gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CompositeProblem, CountedProblem, EvalCounters, OracleError, as_vector

__all__ = [
    "InvalidStartError",
    "SolverConfig",
    "IterateRecord",
    "Trace",
    "SolveResult",
    "next_momentum",
    "momentum_sequence",
    "solve_subproblem",
    "stationarity_residual",
    "extrapolate_project",
    "estimate_curvature",
    "run_mfista",
    "run_fista_baseline",
    "run_proxgrad_baseline",
]

# The curvature estimate divides a linearization gap by ||y - x||^2.  Near
# convergence the gap is pure cancellation noise while the denominator is
# tiny, which would produce estimates orders of magnitude above L; a gap is
# used only when it exceeds this relative significance floor.
_CURVATURE_SIG_RTOL = 1e-10


class InvalidStartError(ValueError):
    """Start point is outside dom h."""


@dataclass
class SolverConfig:
    """Run parameters shared by all solvers.

    `curvature_clamp_tol` absorbs floating-point noise in the curvature
    estimate: positive estimates at or below it are treated as zero, so convex
    problems are detected as such.  None means 1e-12 * L, resolved at run
    time.  `ak_mode` is fixed; the field exists so a different momentum law
    would be a config change, not a signature change.
    """

    epsilon: float
    max_iters: int
    ak_mode: str = "recurrence"
    record_trace: bool = True
    trace_vectors: bool = False
    curvature_clamp_tol: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.ak_mode != "recurrence":
            raise ValueError(f"unknown ak_mode {self.ak_mode!r}")
        if self.curvature_clamp_tol is not None and self.curvature_clamp_tol < 0:
            raise ValueError("curvature_clamp_tol must be nonnegative")


@dataclass(frozen=True)
class IterateRecord:
    """One completed iteration: scalars and norms only."""

    k: int
    a_k: float
    L_k: float
    vnorm: float
    phi: float
    dxy: float
    dyy: float
    gradevals: int
    proxevals: int


class Trace:
    """Columnar per-iteration record of a run.

    Always stores the scalar columns of the CSV schema plus the start point
    and the Lipschitz constant; iterate and residual vectors are kept only
    when requested (memory is O(dim * iters) then).  Immutable once the run
    that built it returns.
    """

    COLUMNS = ("k", "a_k", "L_k", "vnorm", "phi", "dxy", "dyy", "gradevals", "proxevals")

    def __init__(self, lipschitz_L: float, y0: Optional[np.ndarray] = None,
                 keep_vectors: bool = False, solver: str = ""):
        self.lipschitz_L = float(lipschitz_L)
        self.solver = solver
        self.y0 = None if y0 is None else np.array(y0, dtype=float)
        self.k: list[int] = []
        self.a_k: list[float] = []
        self.L_k: list[float] = []
        self.vnorm: list[float] = []
        self.phi: list[float] = []
        self.dxy: list[float] = []
        self.dyy: list[float] = []
        self.gradevals: list[int] = []
        self.proxevals: list[int] = []
        self.ys: Optional[list[np.ndarray]] = [] if keep_vectors else None
        self.vs: Optional[list[np.ndarray]] = [] if keep_vectors else None

    def __len__(self) -> int:
        return len(self.k)

    @property
    def has_vectors(self) -> bool:
        return self.ys is not None and len(self.ys) == len(self.k)

    def append(self, rec: IterateRecord, y=None, v=None) -> None:
        self.k.append(rec.k)
        self.a_k.append(rec.a_k)
        self.L_k.append(rec.L_k)
        self.vnorm.append(rec.vnorm)
        self.phi.append(rec.phi)
        self.dxy.append(rec.dxy)
        self.dyy.append(rec.dyy)
        self.gradevals.append(rec.gradevals)
        self.proxevals.append(rec.proxevals)
        if self.ys is not None:
            self.ys.append(np.array(y, dtype=float))
            self.vs.append(np.array(v, dtype=float))

    def row(self, i: int) -> IterateRecord:
        return IterateRecord(self.k[i], self.a_k[i], self.L_k[i], self.vnorm[i],
                             self.phi[i], self.dxy[i], self.dyy[i],
                             self.gradevals[i], self.proxevals[i])

    def column(self, name: str) -> np.ndarray:
        if name not in self.COLUMNS:
            raise KeyError(name)
        return np.asarray(getattr(self, name))


@dataclass
class SolveResult:
    """Outcome of a run.  status == "converged" implies vnorm(v) <= epsilon."""

    status: str
    y: np.ndarray
    v: np.ndarray
    iterations: int
    trace: Optional[Trace]
    counters: EvalCounters

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def next_momentum(a_prev: float) -> float:
    """Positive root of a*(a - 1) = a_prev**2; strictly increasing from a_prev.

    The sequence starts at 1, so inputs below 1 are rejected.
    """
    if not a_prev >= 1.0:
        raise ValueError("momentum coefficient must be >= 1")
    return (1.0 + math.sqrt(1.0 + 4.0 * a_prev * a_prev)) / 2.0


def momentum_sequence(count: int) -> np.ndarray:
    """First `count`+1 momentum coefficients a_0..a_count (a_0 = 1)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    out = np.empty(count + 1)
    out[0] = 1.0
    cur = 1.0
    sqrt = math.sqrt
    for i in range(1, count + 1):
        # same root as next_momentum, written to keep this loop cheap
        cur = 0.5 + sqrt(0.25 + cur * cur)
        out[i] = cur
    return out


def solve_subproblem(p: CompositeProblem | CountedProblem, x_k: np.ndarray,
                     grad_fk_at_x: np.ndarray) -> np.ndarray:
    """Minimizer of <grad_fk_at_x, y - x> + h(y) + 2L||y - x||^2 in one prox call.

    Completing the square shows this is the prox of h with step 1/(4L) at
    x - grad/(4L).  `grad_fk_at_x` is the shifted-model gradient at x, already
    assembled by the caller.
    """
    cp = p if isinstance(p, CountedProblem) else CountedProblem(p)
    x_k = as_vector(x_k, cp.dim)
    grad_fk_at_x = as_vector(grad_fk_at_x, cp.dim)
    t = 1.0 / (4.0 * cp.lipschitz_L)
    return cp.prox(x_k - t * grad_fk_at_x, t)


def _residual(grad_y: np.ndarray, grad_x: np.ndarray, y: np.ndarray, x: np.ndarray,
              y_prev: np.ndarray, curvature: float, L: float) -> np.ndarray:
    # member of grad f(y) + subdiff h(y) by the prox optimality condition
    return grad_y - grad_x + curvature * (y_prev - x) + 4.0 * L * (x - y)


def stationarity_residual(p: CompositeProblem, y_k: np.ndarray, x_k: np.ndarray,
                          y_prev: np.ndarray, L_k: float) -> np.ndarray:
    """Explicit element of grad f(y_k) + subdiff h(y_k) for the main iteration.

    Valid whenever y_k came out of solve_subproblem at x_k with curvature
    shift L_k relative to y_prev.
    """
    y_k = as_vector(y_k, p.dim)
    x_k = as_vector(x_k, p.dim)
    y_prev = as_vector(y_prev, p.dim)
    gy = np.asarray(p.smooth_grad(y_k), dtype=float)
    gx = np.asarray(p.smooth_grad(x_k), dtype=float)
    return _residual(gy, gx, y_k, x_k, y_prev, L_k, p.lipschitz_L)


def extrapolate_project(p: CompositeProblem | CountedProblem, y_k: np.ndarray,
                        y_prev: np.ndarray, a_prev: float, a_cur: float) -> np.ndarray:
    """Momentum extrapolation followed by the domain projection (identity if none)."""
    cp = p if isinstance(p, CountedProblem) else CountedProblem(p)
    coef = (a_prev - 1.0) / a_cur
    return cp.project(y_k + coef * (y_k - y_prev))


def _curvature_from_gap(gap: float, gap_scale: float, d2: float, y_norm: float) -> float:
    """Raw curvature estimate 2*gap/d2 with the two degeneracy guards applied."""
    thr = 1e-14 * (1.0 + y_norm)
    if d2 <= thr * thr:
        return 0.0
    if abs(gap) <= _CURVATURE_SIG_RTOL * (1.0 + gap_scale):
        # gap below cancellation noise: no usable curvature information
        return 0.0
    return 2.0 * gap / d2


def estimate_curvature(p: CompositeProblem, y_k: np.ndarray, x_next: np.ndarray) -> float:
    """Scaled gap between the linearization of f at x_next and f itself at y_k.

    Positive values witness nonconvexity between the two points; the next
    model shift is max(0, estimate).  Returns 0 when the points coincide.
    """
    y_k = as_vector(y_k, p.dim)
    x_next = as_vector(x_next, p.dim)
    fy = float(p.smooth_value(y_k))
    fxn = float(p.smooth_value(x_next))
    gxn = np.asarray(p.smooth_grad(x_next), dtype=float)
    d = y_k - x_next
    gd = float(gxn @ d)
    gap = fxn + gd - fy
    return _curvature_from_gap(gap, abs(fy) + abs(fxn) + abs(gd),
                               float(d @ d), float(np.linalg.norm(y_k)))


def _start_checks(p: CompositeProblem, cfg: SolverConfig, y0: np.ndarray) -> np.ndarray:
    y0 = as_vector(y0, p.dim)
    if math.isinf(float(p.h_value(y0))):
        raise InvalidStartError("start point is outside dom h")
    return y0


def _record_phi(cp: CountedProblem, y: np.ndarray, fy: float, k: int) -> float:
    hy = cp.h(y)
    if math.isinf(hy):
        raise OracleError(f"iteration {k}: iterate left dom h (h_value is +inf)")
    return fy + hy


def run_mfista(p: CompositeProblem, cfg: SolverConfig, y0: np.ndarray) -> SolveResult:
    """Main solver loop.

    Per iteration: build the shifted-model gradient at x_k from the cached
    gradient, take one prox step (the subproblem), advance the momentum
    coefficient, form the stationarity residual v_k and the extrapolated
    next point, then re-estimate the curvature shift at x_{k+1} (caching its
    gradient for the next iteration).  The termination test on ||v_k|| runs
    as soon as v_k exists, before the curvature step, so a converged run
    does not spend a gradient it will never use.  Cost per full iteration:
    one prox, two gradients (at y_k and x_{k+1}), two f values.
    """
    cp = CountedProblem(p)
    y0 = _start_checks(p, cfg, y0)
    L = p.lipschitz_L
    clamp = cfg.curvature_clamp_tol if cfg.curvature_clamp_tol is not None else 1e-12 * L

    trace = Trace(L, y0, cfg.trace_vectors, "mfista") if cfg.record_trace else None
    y_prev = y0
    x = y0
    a_prev = 1.0
    curvature = 0.0  # model shift; starts at zero and stays there on convex problems
    try:
        grad_x = cp.grad(x)
    except OracleError as e:
        raise OracleError(f"iteration 1: {e}") from e

    y = y0
    v = np.zeros(p.dim)
    status = "max_iters_reached"
    k = 0
    for k in range(1, cfg.max_iters + 1):
        try:
            model_grad = grad_x + curvature * (x - y_prev)
            y = solve_subproblem(cp, x, model_grad)
            a_cur = next_momentum(a_prev)
            grad_y = cp.grad(y)
            v = _residual(grad_y, grad_x, y, x, y_prev, curvature, L)
            x_next = extrapolate_project(cp, y, y_prev, a_prev, a_cur)
            vn = float(np.linalg.norm(v))
            fy = cp.f(y)
            if trace is not None:
                trace.append(IterateRecord(
                    k, a_cur, curvature, vn, _record_phi(cp, y, fy, k),
                    float(np.linalg.norm(y - x)), float(np.linalg.norm(y - y_prev)),
                    cp.counters.grad_evals, cp.counters.prox_evals), y, v)
            if vn <= cfg.epsilon:
                status = "converged"
                break
            grad_xn = cp.grad(x_next)
            d = y - x_next
            gd = float(grad_xn @ d)
            fxn = cp.f(x_next)
            gap = fxn + gd - fy
            est = _curvature_from_gap(gap, abs(fy) + abs(fxn) + abs(gd),
                                      float(d @ d), float(np.linalg.norm(y)))
            curvature = max(0.0, est)
            if curvature <= clamp:
                curvature = 0.0
        except OracleError as e:
            raise OracleError(f"iteration {k}: {e}") from e
        y_prev, x, a_prev, grad_x = y, x_next, a_cur, grad_xn

    return SolveResult(status, y, v, k, trace, cp.counters)


def run_fista_baseline(p: CompositeProblem, cfg: SolverConfig, y0: np.ndarray,
                       step: float, project_extrapolation: bool = False) -> SolveResult:
    """Classic FISTA with the same momentum law and a configurable step.

    With step = 1/(4L) and project_extrapolation=True this follows the exact
    arithmetic path of run_mfista on problems where the curvature estimate
    stays zero, which is the convex case.  The canonical step is 1/L.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    cp = CountedProblem(p)
    y0 = _start_checks(p, cfg, y0)

    trace = Trace(p.lipschitz_L, y0, cfg.trace_vectors, "fista") if cfg.record_trace else None
    y_prev = y0
    x = y0
    a_prev = 1.0
    try:
        grad_x = cp.grad(x)
    except OracleError as e:
        raise OracleError(f"iteration 1: {e}") from e

    y = y0
    v = np.zeros(p.dim)
    status = "max_iters_reached"
    k = 0
    for k in range(1, cfg.max_iters + 1):
        try:
            y = cp.prox(x - step * grad_x, step)
            a_cur = next_momentum(a_prev)
            grad_y = cp.grad(y)
            v = grad_y - grad_x + (x - y) / step
            x_next = y + ((a_prev - 1.0) / a_cur) * (y - y_prev)
            if project_extrapolation:
                x_next = cp.project(x_next)
            vn = float(np.linalg.norm(v))
            if trace is not None:
                trace.append(IterateRecord(
                    k, a_cur, 0.0, vn, _record_phi(cp, y, cp.f(y), k),
                    float(np.linalg.norm(y - x)), float(np.linalg.norm(y - y_prev)),
                    cp.counters.grad_evals, cp.counters.prox_evals), y, v)
            if vn <= cfg.epsilon:
                status = "converged"
                break
            grad_xn = cp.grad(x_next)
        except OracleError as e:
            raise OracleError(f"iteration {k}: {e}") from e
        y_prev, x, a_prev, grad_x = y, x_next, a_cur, grad_xn

    return SolveResult(status, y, v, k, trace, cp.counters)


def run_proxgrad_baseline(p: CompositeProblem, cfg: SolverConfig, y0: np.ndarray) -> SolveResult:
    """Non-accelerated proximal gradient with step 1/L, as a comparator.

    The reported residual L*(y_prev - y) + grad f(y) - grad f(y_prev) is a
    member of grad f(y) + subdiff h(y), same certificate as the others.
    """
    cp = CountedProblem(p)
    y0 = _start_checks(p, cfg, y0)
    L = p.lipschitz_L
    step = 1.0 / L

    trace = Trace(L, y0, cfg.trace_vectors, "proxgrad") if cfg.record_trace else None
    y_prev = y0
    try:
        grad_prev = cp.grad(y_prev)
    except OracleError as e:
        raise OracleError(f"iteration 1: {e}") from e

    y = y0
    v = np.zeros(p.dim)
    status = "max_iters_reached"
    k = 0
    for k in range(1, cfg.max_iters + 1):
        try:
            y = cp.prox(y_prev - step * grad_prev, step)
            grad_y = cp.grad(y)
            v = grad_y - grad_prev + L * (y_prev - y)
            vn = float(np.linalg.norm(v))
            if trace is not None:
                dyy = float(np.linalg.norm(y - y_prev))
                trace.append(IterateRecord(
                    k, 1.0, 0.0, vn, _record_phi(cp, y, cp.f(y), k),
                    dyy, dyy, cp.counters.grad_evals, cp.counters.prox_evals), y, v)
            if vn <= cfg.epsilon:
                status = "converged"
                break
        except OracleError as e:
            raise OracleError(f"iteration {k}: {e}") from e
        y_prev, grad_prev = y, grad_y

    return SolveResult(status, y, v, k, trace, cp.counters)
