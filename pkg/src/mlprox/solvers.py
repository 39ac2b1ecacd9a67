"""Single-level iterative schemes: inertial forward-backward (FISTA) with the
``t_k = (k + a - 1)/a`` momentum law, plain forward-backward, and smoothed
gradient descent.  The latter three double as the coarse-level minimizers of
the multilevel engine, wrapped in a monotonicity guard.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grids import GridImage, norm2
from .prox import CompositeObjective

SAFETY = 0.99  # step-size fraction of the 1/L bound; absorbs power-method error


def ad_momentum(k: int, a: float) -> float:
    """Extrapolation weight ``alpha_k = (t_k - 1) / t_{k+1}`` with
    ``t_k = (k + a - 1)/a``; requires ``a > 2`` for the convergence
    guarantees and ``k >= 1``."""
    if a <= 2:
        raise ValueError(f"momentum parameter a must exceed 2, got {a}")
    if k < 1:
        raise ValueError(f"momentum index must be >= 1, got {k}")
    t_k = (k + a - 1.0) / a
    t_next = (k + a) / a
    return (t_k - 1.0) / t_next


@dataclass
class MomentumSchedule:
    """Momentum law; ``t_0 = 1`` so the first extrapolation is zero."""
    a: float = 3.0
    t_prev: float = 1.0

    def __post_init__(self):
        if self.a <= 2:
            raise ValueError(f"momentum parameter a must exceed 2, got {self.a}")

    def alpha(self, k: int) -> float:
        if k == 0:
            return 0.0
        return ad_momentum(k, self.a)


@dataclass(frozen=True)
class StopRule:
    eps: float
    max_iter: int

    @staticmethod
    def for_shape(shape: tuple[int, int], max_iter: int = 5000) -> "StopRule":
        n = shape[0] * shape[1]
        return StopRule(eps=1e-6 * np.sqrt(n), max_iter=max_iter)


class SolverTrace:
    """Per-iteration run record.

    Column semantics: ``k`` iteration index (0 is the initial point),
    ``F`` composite objective, ``F_smoothed`` its Moreau-smoothed value,
    ``time_s`` wall time since the run started, ``step_norm``
    ``||x_k - x_{k-1}||``, ``correction_norm`` the coarse-correction
    diagnostic (zero when no coarse model was used), ``snr_db`` against the
    ground truth when one is known, ``work_units`` cumulative fine-level
    gradient+prox equivalents.
    """

    COLUMNS = ("k", "F", "F_smoothed", "time_s", "step_norm",
               "correction_norm", "snr_db", "work_units")

    def __init__(self):
        self.k: list[int] = []
        self.F: list[float] = []
        self.F_smoothed: list[float] = []
        self.time_s: list[float] = []
        self.step_norm: list[float] = []
        self.correction_norm: list[float] = []
        self.snr_db: list[float] = []
        self.work_units: list[float] = []
        self.converged: bool = False
        self.cycles: list = []   # CycleDiagnostics, filled by the multilevel engine

    def append(self, k, F, F_smoothed, time_s, step_norm, correction_norm,
               snr_db, work_units) -> None:
        if self.k and k <= self.k[-1]:
            raise ValueError("iteration indices must be strictly increasing")
        self.k.append(int(k))
        self.F.append(float(F))
        self.F_smoothed.append(float(F_smoothed))
        self.time_s.append(float(time_s))
        self.step_norm.append(float(step_norm))
        self.correction_norm.append(float(correction_norm))
        self.snr_db.append(float(np.nan) if snr_db is None else float(snr_db))
        self.work_units.append(float(work_units))

    def __len__(self) -> int:
        return len(self.k)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name))

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for i in range(len(self)):
                w.writerow([self.k[i], repr(self.F[i]), repr(self.F_smoothed[i]),
                            repr(self.time_s[i]), repr(self.step_norm[i]),
                            repr(self.correction_norm[i]),
                            "" if np.isnan(self.snr_db[i]) else repr(self.snr_db[i]),
                            repr(self.work_units[i])])


def _snr_or_none(x_true: GridImage | None, x: GridImage) -> float | None:
    if x_true is None:
        return None
    from .harness import snr_db
    return snr_db(x_true, x)


def fb_step(obj: CompositeObjective, y: GridImage, tau: float) -> GridImage:
    """One forward-backward step ``prox_{tau g}(y - tau grad_f(y))``."""
    if not 0.0 < tau < 1.0 / obj.lipschitz_f:
        raise ValueError(f"tau must lie in (0, 1/L_f) = (0, {1.0 / obj.lipschitz_f:g})")
    return obj.prior.prox(y - tau * obj.grad_f(y), tau)


def smoothed_gradient_step(obj: CompositeObjective, y: GridImage, tau: float) -> GridImage:
    """One explicit gradient step on the smoothed objective."""
    bound = 2.0 / obj.smoothed_lipschitz
    if not 0.0 < tau < bound:
        raise ValueError(f"tau must lie in (0, {bound:g}) for smoothed descent")
    return y - tau * obj.smoothed_grad(y)


def default_tau(obj: CompositeObjective) -> float:
    return SAFETY / obj.lipschitz_f


def fista_run(obj: CompositeObjective, x0: GridImage,
              schedule: MomentumSchedule | None, tau: float, stop: StopRule,
              x_true: GridImage | None = None) -> tuple[GridImage, SolverTrace]:
    """Inertial forward-backward loop from ``x0 = y0``.

    ``schedule=None`` forces zero momentum, reducing the run to plain
    repeated forward-backward steps.  Stops when the iterate difference
    norm drops to ``stop.eps`` or at ``stop.max_iter``.
    """
    trace = SolverTrace()
    t0 = time.perf_counter()
    x = np.array(x0, dtype=np.float64)
    y = x
    fv, fg = obj.values(x)
    trace.append(0, fv, fg, time.perf_counter() - t0, 0.0, 0.0,
                 _snr_or_none(x_true, x), 0.0)
    work = 0.0
    for k in range(stop.max_iter):
        x_next = fb_step(obj, y, tau)
        alpha = 0.0 if schedule is None else schedule.alpha(k)
        if alpha == 0.0:
            y = x_next.copy()
        else:
            y = x_next + alpha * (x_next - x)
        step = norm2(x_next - x)
        x = x_next
        work += 1.0
        fv, fg = obj.values(x)
        trace.append(k + 1, fv, fg, time.perf_counter() - t0, step, 0.0,
                     _snr_or_none(x_true, x), work)
        if step <= stop.eps:
            trace.converged = True
            break
    return x, trace


class CoarseSolverKind(Enum):
    SMOOTHED_GRADIENT = "smoothed"
    FORWARD_BACKWARD = "fb"
    FISTA_FB = "fista"


def coarse_tau(obj: CompositeObjective, kind: CoarseSolverKind) -> float:
    """Default coarse step: 0.99/L of the objective the scheme differentiates."""
    if kind is CoarseSolverKind.SMOOTHED_GRADIENT:
        return SAFETY / obj.smoothed_lipschitz
    return SAFETY / obj.lipschitz_f


@dataclass
class CoarseRunResult:
    x: GridImage
    rejected: bool
    f_start: float
    f_end: float
    f_smoothed_start: float
    f_smoothed_end: float
    chosen_index: int            # which iterate (0..m) survived the guard
    grad_evals: float            # gradient+prox equivalents at this level
    eval_calls: float            # plain objective evaluations (guard bookkeeping)


def coarse_run(obj: CompositeObjective, x0: GridImage, kind: CoarseSolverKind,
               m: int, tau: float, a: float = 3.0) -> CoarseRunResult:
    """Run ``m`` iterations of the chosen coarse scheme with a monotonicity
    guard.

    The guard accepts the final iterate only if it increases neither the
    composite objective nor its smoothed version relative to ``x0``;
    otherwise it falls back to the best-objective iterate, and if that still
    fails, the run is rejected and ``x0`` is returned unchanged.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    iterates = [np.array(x0, dtype=np.float64)]
    grad_evals = 0.0

    if kind is CoarseSolverKind.SMOOTHED_GRADIENT:
        x = iterates[0]
        for _ in range(m):
            x = smoothed_gradient_step(obj, x, tau)
            iterates.append(x)
            grad_evals += 1.0
    elif kind is CoarseSolverKind.FORWARD_BACKWARD:
        x = iterates[0]
        for _ in range(m):
            x = fb_step(obj, x, tau)
            iterates.append(x)
            grad_evals += 1.0
    elif kind is CoarseSolverKind.FISTA_FB:
        sched = MomentumSchedule(a=a)
        x = iterates[0]
        y = x
        for ell in range(m):
            x_next = fb_step(obj, y, tau)
            alpha = sched.alpha(ell)
            if alpha == 0.0:
                y = x_next.copy()
            else:
                y = x_next + alpha * (x_next - x)
            x = x_next
            iterates.append(x)
            grad_evals += 1.0
    else:  # pragma: no cover - enumeration is complete
        raise ValueError(f"unknown coarse solver kind {kind}")

    f_vals = [obj.value(u) for u in iterates]
    eval_calls = float(len(iterates))
    fg0 = obj.smoothed_value(x0)
    eval_calls += 1.0

    def guarded(idx: int) -> CoarseRunResult | None:
        nonlocal eval_calls
        if f_vals[idx] > f_vals[0]:
            return None
        fg = obj.smoothed_value(iterates[idx])
        eval_calls += 1.0
        if fg > fg0:
            return None
        return CoarseRunResult(iterates[idx], False, f_vals[0], f_vals[idx],
                               fg0, fg, idx, grad_evals, eval_calls)

    result = guarded(m)
    if result is None:
        best = int(np.argmin(f_vals))
        if best != m:
            result = guarded(best)
    if result is None:
        result = CoarseRunResult(iterates[0], True, f_vals[0], f_vals[0],
                                 fg0, fg0, 0, grad_evals, eval_calls)
    return result
