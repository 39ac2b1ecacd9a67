"""Multilevel inertial forward-backward engine.

A hierarchy of blurred least-squares + l1-wavelet objectives is built by
wavelet low-pass restriction: the blur is coarsened exactly through its 1-D
factors, the observation is restricted, the regularization weight decays by
4 per level and the decomposition depth drops by one.  Each V-cycle builds a
first-order-coherent coarse model (a linear tilt matching the restricted
smoothed fine gradient at the anchor), runs a few guarded coarse iterations,
and prolongs the resulting step back as a correction to the extrapolated
fine iterate.  With a zero budget of coarse cycles the loop reduces exactly
(bitwise) to the single-level inertial solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .grids import GridImage, dot, norm2, power_method_norm
from .operators import (SeparableBlur, TransferPair, WaveletBasis,
                        coarsen_blur, make_transfer, prolong, restrict)
from .prox import CompositeObjective, L1SynthesisPrior, moreau_grad
from .solvers import (SAFETY, CoarseSolverKind, MomentumSchedule, SolverTrace,
                      StopRule, coarse_run, coarse_tau, fb_step)

__all__ = [
    "LevelSpec", "Hierarchy", "build_hierarchy", "CoarseModel",
    "build_coarse_model", "coarse_correction", "select_tau_bar",
    "MmfistaConfig", "mmfista_run", "correction_diagnostic", "CycleDiagnostics",
]


@dataclass(frozen=True)
class LevelSpec:
    """Frozen description of one resolution level."""
    shape: tuple[int, int]
    blur: SeparableBlur
    prior: L1SynthesisPrior
    gamma: float
    lipschitz_f: float


def make_fine_level(blur: SeparableBlur, prior: L1SynthesisPrior,
                    gamma: float = 1.0, power_seed: int = 0) -> LevelSpec:
    lip = power_method_norm(blur, seed=power_seed).value
    return LevelSpec(blur.in_shape, blur, prior, gamma, lip)


@dataclass(frozen=True)
class Hierarchy:
    """Fine-first list of levels plus the transfer between each adjacent pair."""
    levels: tuple[LevelSpec, ...]
    transfers: tuple[TransferPair, ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def objectives(self, z: GridImage) -> list[CompositeObjective]:
        """Untilted per-level objectives for an observation at the fine level."""
        objs = []
        z_i = np.asarray(z, dtype=np.float64)
        for i, lv in enumerate(self.levels):
            if z_i.shape != lv.shape:
                raise ValueError(f"observation shape {z.shape} does not match level 0")
            objs.append(CompositeObjective(lv.blur, z_i, lv.prior,
                                           gamma=lv.gamma, lipschitz_f=lv.lipschitz_f))
            if i + 1 < len(self.levels):
                z_i = restrict(self.transfers[i], z_i)
        return objs

    def work_weights(self) -> list[float]:
        n0 = self.levels[0].shape[0] * self.levels[0].shape[1]
        return [lv.shape[0] * lv.shape[1] / n0 for lv in self.levels]


def build_hierarchy(fine: LevelSpec, depth: int,
                    transfer_basis: WaveletBasis | None = None,
                    eta: float = 0.25, gamma_coarse: float = 1.1,
                    lambdas: list[float] | None = None,
                    power_seed: int = 0) -> Hierarchy:
    """Construct ``depth`` levels below-and-including ``fine``.

    Per level: the blur is coarsened through the transfer's 1-D factors
    (verified against restrict o blur o prolong on random probes), the
    regularization weight is divided by 4 (or taken from ``lambdas``), the
    wavelet decomposition loses one level, and the gradient Lipschitz
    constant is re-estimated by the power method.
    """
    if depth < 2:
        raise ValueError("a hierarchy needs at least 2 levels")
    rows, cols = fine.shape
    if min(rows, cols) // (2 ** (depth - 1)) < 2:
        raise ValueError(f"shape {fine.shape} too small for {depth} levels")
    if lambdas is not None and len(lambdas) != depth:
        raise ValueError("lambdas must list one weight per level")
    basis = transfer_basis if transfer_basis is not None else fine.prior.basis

    levels = [fine]
    transfers = []
    rng = np.random.default_rng(7)
    for i in range(depth - 1):
        parent = levels[-1]
        t = make_transfer(basis, parent.shape, eta)
        blur_h = coarsen_blur(parent.blur, t)
        _verify_coarsening(parent.blur, blur_h, t, rng)
        lam = lambdas[i + 1] if lambdas is not None else parent.prior.lam / 4.0
        coarse_shape = t.coarse_shape
        wl = min(max(parent.prior.levels - 1, 0),
                 int(np.log2(min(coarse_shape))))
        prior = replace(parent.prior, levels=wl, lam=lam)
        lip = power_method_norm(blur_h, seed=power_seed).value
        levels.append(LevelSpec(coarse_shape, blur_h, prior, gamma_coarse, lip))
        transfers.append(t)
    return Hierarchy(tuple(levels), tuple(transfers))


def _verify_coarsening(blur_fine: SeparableBlur, blur_coarse: SeparableBlur,
                       t: TransferPair, rng: np.random.Generator,
                       probes: int = 3, tol: float = 1e-10) -> None:
    for _ in range(probes):
        u = rng.standard_normal(t.coarse_shape)
        direct = blur_coarse.apply(u)
        composed = restrict(t, blur_fine.apply(prolong(t, u)))
        scale = max(float(np.max(np.abs(composed))), 1e-30)
        if np.max(np.abs(direct - composed)) > tol * scale:
            raise ValueError("coarsened blur does not match restrict o blur o prolong")


# ---------------------------------------------------------------------------
# coherent coarse model


@dataclass(frozen=True)
class CoarseModel:
    """Tilted coarse objective anchored at the restriction of a fine point.

    The tilt makes the smoothed coarse gradient at the anchor equal the
    restricted smoothed fine gradient (first-order coherence), so descent
    directions transfer across levels with slope scaled by eta.
    """
    objective: CompositeObjective       # carries the tilt
    anchor: GridImage                   # restriction of parent_point
    parent_point: GridImage
    parent_grad: GridImage              # smoothed parent gradient at parent_point


def build_coarse_model(parent_obj: CompositeObjective,
                       coarse_obj: CompositeObjective,
                       t: TransferPair, y_parent: GridImage) -> CoarseModel:
    """Assemble the tilt ``v = R grad(parent smoothed) - grad(coarse smoothed)``
    evaluated at the anchor ``R y_parent``; ``coarse_obj`` must be untilted."""
    if coarse_obj.tilt is not None:
        raise ValueError("coarse objective must be untilted; the model adds the tilt")
    g_parent = parent_obj.smoothed_grad(y_parent)
    anchor = restrict(t, y_parent)
    v = restrict(t, g_parent) - coarse_obj.smoothed_grad(anchor)
    return CoarseModel(coarse_obj.with_tilt(v), anchor, y_parent, g_parent)


def coherence_residual(model: CoarseModel, t: TransferPair) -> tuple[float, float]:
    """(absolute, relative) defect of the first-order coherence identity,
    re-evaluating the tilted coarse gradient from scratch."""
    g_coarse = model.objective.smoothed_grad(model.anchor)
    target = restrict(t, model.parent_grad)
    err = norm2(g_coarse - target)
    return err, err / max(norm2(model.parent_grad), 1e-300)


# ---------------------------------------------------------------------------
# V-cycle correction


@dataclass
class CycleDiagnostics:
    k: int                       # fine iteration the cycle was attempted at
    accepted: bool               # coarse excursion survived the guard
    applied: bool = False        # correction actually added to the iterate
    tau_bar: float = 0.0
    correction_norm: float = 0.0
    coherence_abs: float = np.nan
    coherence_rel: float = np.nan
    descent_fine: float = np.nan     # <prolong(d_H), smoothed fine grad at y>
    descent_coarse: float = np.nan   # <d_H, smoothed coarse grad at anchor>
    f_coarse_before: float = np.nan
    f_coarse_after: float = np.nan
    f_coarse_smoothed_before: float = np.nan
    f_coarse_smoothed_after: float = np.nan
    work_units: float = 0.0


@dataclass(frozen=True)
class MmfistaConfig:
    """Knobs of the multilevel run (coarse budget, cycle shape, momentum)."""
    p: int = 1                   # maximum number of coarse cycles
    m: int = 5                   # coarse iterations per level per cycle
    kind: CoarseSolverKind = CoarseSolverKind.FISTA_FB
    a: float = 3.0
    tau_bar: float | str = 1.0   # fixed step for the prolonged correction, or "search"
    eps: float | None = None     # iterate-difference stop; None -> 1e-6 sqrt(N)
    max_iter: int = 500

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if isinstance(self.tau_bar, str):
            if self.tau_bar != "search":
                raise ValueError("tau_bar must be a positive number or 'search'")
        elif self.tau_bar <= 0:
            raise ValueError("tau_bar must be a positive number or 'search'")

    @property
    def tau_bar_sup(self) -> float:
        # the run-level constant used by the correction diagnostic; a
        # backtracking search never exceeds its unit starting value
        return 1.0 if self.tau_bar == "search" else float(self.tau_bar)


def _select_tau_bar_counted(obj: CompositeObjective, y: GridImage,
                            d: GridImage, mode: float | str) -> tuple[float, int]:
    if mode != "search":
        return float(mode), 0
    f0 = obj.smoothed_value(y)
    evals = 1
    tau = 1.0
    for _ in range(11):
        if obj.smoothed_value(y + tau * d) <= f0:
            return tau, evals + 1
        evals += 1
        tau *= 0.5
    return 0.0, evals


def select_tau_bar(obj: CompositeObjective, y: GridImage, d: GridImage,
                   mode: float | str = 1.0) -> float:
    """Step length for the prolonged correction: a configured constant, or a
    halving search on the smoothed objective that returns 0 (correction
    disabled) if ten halvings never produce a non-increase."""
    return _select_tau_bar_counted(obj, y, d, mode)[0]


def correction_diagnostic(tau_h: float, tau_bar_sup: float,
                          obj_h: CompositeObjective, d: GridImage) -> float:
    """Norm of the correction term whose weighted series the convergence
    argument needs to be summable: ``(tau_bar_sup / tau_h) * (d - tau_h A^T A d)``."""
    if float(np.max(np.abs(d))) == 0.0:
        return 0.0
    w = obj_h.blur.apply_adjoint(obj_h.blur.apply(d))
    return norm2((tau_bar_sup / tau_h) * (d - tau_h * w))


def _v_cycle(objs: list[CompositeObjective], transfers: tuple[TransferPair, ...],
             weights: list[float], idx: int, parent_obj: CompositeObjective,
             y_parent: GridImage, cfg: MmfistaConfig,
             diag: CycleDiagnostics | None) -> tuple[GridImage, bool, float]:
    """Correct level ``idx-1``'s point using levels ``idx..coarsest``.

    Returns (direction at the parent level, accepted flag, work units spent).
    ``diag`` is filled at the first coarse level only.
    """
    t = transfers[idx - 1]
    model = build_coarse_model(parent_obj, objs[idx], t, y_parent)
    work = weights[idx - 1] + weights[idx]          # the two model gradients

    x_start = model.anchor
    deep_applied = False
    if idx + 1 < len(objs):
        d_deep, ok, w_deep = _v_cycle(objs, transfers, weights, idx + 1,
                                      model.objective, x_start, cfg, None)
        work += w_deep
        if ok:
            tb, evals = _select_tau_bar_counted(model.objective, x_start,
                                                d_deep, cfg.tau_bar)
            work += 0.5 * evals * weights[idx]
            if tb > 0.0:
                x_start = x_start + tb * d_deep
                deep_applied = True

    tau_i = coarse_tau(model.objective, cfg.kind)
    res = coarse_run(model.objective, x_start, cfg.kind, cfg.m, tau_i, cfg.a)
    work += (res.grad_evals + 0.5 * res.eval_calls) * weights[idx]

    x_final = res.x
    accepted = not res.rejected
    f_before, fg_before = res.f_start, res.f_smoothed_start
    if accepted and deep_applied:
        # the run was guarded against the shifted start; re-guard the whole
        # excursion against the cycle anchor
        f_anchor, fg_anchor = model.objective.values(model.anchor)
        work += 0.5 * weights[idx]
        f_before, fg_before = f_anchor, fg_anchor
        if res.f_end > f_anchor or res.f_smoothed_end > fg_anchor:
            accepted = False

    if diag is not None:
        diag.accepted = accepted
        diag.f_coarse_before = f_before
        diag.f_coarse_smoothed_before = fg_before
        diag.f_coarse_after = res.f_end if accepted else f_before
        diag.f_coarse_smoothed_after = res.f_smoothed_end if accepted else fg_before
        # fresh tilted gradient at the anchor: coherence check + descent pair
        g_anchor = model.objective.smoothed_grad(model.anchor)
        target = restrict(t, model.parent_grad)
        err = norm2(g_anchor - target)
        diag.coherence_abs = err
        diag.coherence_rel = err / max(norm2(model.parent_grad), 1e-300)
        d_h = x_final - model.anchor
        diag.descent_coarse = dot(d_h, g_anchor)
        diag.descent_fine = dot(prolong(t, d_h), model.parent_grad)

    if not accepted:
        return np.zeros(parent_obj.shape), False, work
    return prolong(t, x_final - model.anchor), True, work


def coarse_correction(model: CoarseModel, t: TransferPair,
                      cfg: MmfistaConfig) -> tuple[GridImage, CycleDiagnostics]:
    """Two-level correction for an already-built coarse model: run the
    guarded coarse scheme from the anchor and prolong the resulting step.

    Returns a zero direction when the guard rejects the excursion.  The
    solver generalizes this to deeper hierarchies by recursing before the
    coarse iterations (restrict again, correct, then iterate at this level).
    """
    diag = CycleDiagnostics(k=-1, accepted=False)
    tau_i = coarse_tau(model.objective, cfg.kind)
    res = coarse_run(model.objective, model.anchor, cfg.kind, cfg.m, tau_i, cfg.a)
    diag.accepted = not res.rejected
    diag.f_coarse_before = res.f_start
    diag.f_coarse_after = res.f_end
    diag.f_coarse_smoothed_before = res.f_smoothed_start
    diag.f_coarse_smoothed_after = res.f_smoothed_end
    g_anchor = model.objective.smoothed_grad(model.anchor)
    d_h = res.x - model.anchor
    diag.descent_coarse = dot(d_h, g_anchor)
    diag.descent_fine = dot(prolong(t, d_h), model.parent_grad)
    err = norm2(g_anchor - restrict(t, model.parent_grad))
    diag.coherence_abs = err
    diag.coherence_rel = err / max(norm2(model.parent_grad), 1e-300)
    if res.rejected:
        return np.zeros(t.fine_shape), diag
    return prolong(t, d_h), diag


def mmfista_run(hier: Hierarchy, z: GridImage, x0: GridImage, cfg: MmfistaConfig,
                x_true: GridImage | None = None) -> tuple[GridImage, SolverTrace]:
    """Run the multilevel inertial solver on ``1/2||A x - z||^2 + lam ||W x||_1``.

    Coarse cycles fire at the start of the run until ``cfg.p`` of them have
    been accepted; every remaining iteration is a plain inertial
    forward-backward step, so ``p=0`` reproduces the single-level solver
    exactly.  Returns the final iterate and the full trace (cycle
    diagnostics included).
    """
    objs = hier.objectives(z)
    obj_h = objs[0]
    if x0.shape != obj_h.shape:
        raise ValueError(f"x0 shape {x0.shape} does not match fine level {obj_h.shape}")
    weights = hier.work_weights()
    tau_h = SAFETY / obj_h.lipschitz_f
    sched = MomentumSchedule(a=cfg.a)
    eps = cfg.eps if cfg.eps is not None else StopRule.for_shape(obj_h.shape).eps

    trace = SolverTrace()
    t0 = time.perf_counter()
    x = np.array(x0, dtype=np.float64)
    y = x
    fv, fg = obj_h.values(x)
    trace.append(0, fv, fg, time.perf_counter() - t0, 0.0, 0.0,
                 _snr(x_true, x), 0.0)

    work = 0.0
    used = 0
    for k in range(cfg.max_iter):
        corr_norm = 0.0
        y_eff = y
        if used < cfg.p and hier.depth >= 2:
            diag = CycleDiagnostics(k=k, accepted=False)
            d, ok, w_cycle = _v_cycle(objs, hier.transfers, weights, 1,
                                      obj_h, y, cfg, diag)
            work += w_cycle
            diag.work_units = w_cycle
            if ok:
                tb, evals = _select_tau_bar_counted(obj_h, y, d, cfg.tau_bar)
                work += 0.5 * evals
                if tb > 0.0:
                    y_eff = y + tb * d
                    used += 1
                    corr_norm = correction_diagnostic(tau_h, cfg.tau_bar_sup, obj_h, d)
                    diag.applied = True
                    diag.tau_bar = tb
                    diag.correction_norm = corr_norm
            trace.cycles.append(diag)
        x_next = fb_step(obj_h, y_eff, tau_h)
        work += 1.0
        alpha = sched.alpha(k)
        if alpha == 0.0:
            y = x_next.copy()
        else:
            y = x_next + alpha * (x_next - x)
        step = norm2(x_next - x)
        x = x_next
        fv, fg = obj_h.values(x)
        trace.append(k + 1, fv, fg, time.perf_counter() - t0, step, corr_norm,
                     _snr(x_true, x), work)
        if step <= eps:
            trace.converged = True
            break
    return x, trace


def _snr(x_true: GridImage | None, x: GridImage) -> float | None:
    if x_true is None:
        return None
    from .harness import snr_db
    return snr_db(x_true, x)
