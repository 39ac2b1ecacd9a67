"""Experiment pipeline: degradation synthesis, Wiener-style initialization,
threshold timing against the single-level baseline, and the benchmark
driver that compares multilevel configurations to plain FISTA on identical
instances.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .grids import GridImage, norm2
from .multilevel import (Hierarchy, MmfistaConfig, build_hierarchy,
                         make_fine_level, mmfista_run)
from .operators import SeparableBlur, WaveletBasis, make_gaussian_psf
from .prox import CompositeObjective, L1SynthesisPrior
from .solvers import (CoarseSolverKind, MomentumSchedule, SolverTrace,
                      StopRule, default_tau, fista_run)

SNR_CAP_DB = 999.0


# ---------------------------------------------------------------------------
# degradation and quality metrics


@dataclass(frozen=True)
class DegradationSpec:
    psf_support: int
    psf_sigma: float
    noise_sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def make_blur(self, shape: tuple[int, int]) -> SeparableBlur:
        return SeparableBlur.from_psf(
            make_gaussian_psf(self.psf_support, self.psf_sigma), shape)


def degrade(x_true: GridImage, spec: DegradationSpec,
            blur: SeparableBlur | None = None) -> GridImage:
    """``z = A x_true + noise``; unclipped, bit-reproducible given the seed."""
    if blur is None:
        blur = spec.make_blur(x_true.shape)
    z = blur.apply(x_true)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        z = z + spec.noise_sigma * rng.standard_normal(x_true.shape)
    return z


def snr_db(reference: GridImage, x: GridImage) -> float:
    """``10 log10(||ref||^2 / ||ref - x||^2)``, capped at 999 dB when exact."""
    if reference.shape != x.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {x.shape}")
    err = float(np.sum((reference - x) ** 2))
    ref = float(np.sum(reference ** 2))
    if ref == 0.0:
        raise ValueError("reference image is identically zero")
    if err == 0.0:
        return SNR_CAP_DB
    return min(10.0 * np.log10(ref / err), SNR_CAP_DB)


# ---------------------------------------------------------------------------
# initialization


@dataclass(frozen=True)
class WienerResult:
    x: GridImage
    converged: bool
    iterations: int


def wiener_init(z: GridImage, blur: SeparableBlur, mu: float = 1e-2,
                tol: float = 1e-6, max_iter: int = 200) -> WienerResult:
    """Tikhonov-regularized inverse ``argmin ||A x - z||^2 + mu ||x||^2``
    solved by conjugate gradient on the normal equations."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    shape = z.shape
    n = shape[0] * shape[1]

    def matvec(v):
        x = v.reshape(shape)
        return (blur.apply_adjoint(blur.apply(x)) + mu * x).ravel()

    rhs = blur.apply_adjoint(z).ravel()
    op = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    x, info = cg(op, rhs, rtol=tol, atol=0.0, maxiter=max_iter, callback=count)
    if info != 0:
        warnings.warn(f"wiener_init: CG stopped after {iters} iterations without "
                      f"reaching tol={tol:g}", RuntimeWarning)
    return WienerResult(x.reshape(shape), info == 0, iters)


# ---------------------------------------------------------------------------
# threshold timing


@dataclass(frozen=True)
class ThresholdHit:
    percent: float
    k: int
    seconds: float
    work_units: float


def threshold_times(trace: SolverTrace, f_star: float, f0: float,
                    thresholds: list[float]) -> list[ThresholdHit | None]:
    """First record where ``F - f_star`` drops to each percentage of the
    initial distance ``f0 - f_star``; ``None`` for never-reached thresholds."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    if not f0 > f_star:
        raise ValueError("f0 must exceed f_star")
    gap0 = f0 - f_star
    F = trace.column("F")
    hits: list[ThresholdHit | None] = []
    for q in thresholds:
        target = f_star + (q / 100.0) * gap0
        idx = np.nonzero(F <= target)[0]
        if idx.size == 0:
            hits.append(None)
        else:
            i = int(idx[0])
            hits.append(ThresholdHit(q, trace.k[i], trace.time_s[i],
                                     trace.work_units[i]))
    return hits


def relative_time(t_mm: float, t_fista: float) -> float:
    """Relative overhead/gain in percent: ``(t_mm - t_fista)/t_fista * 100``."""
    if t_fista <= 0:
        raise ValueError("baseline time must be positive")
    return (t_mm - t_fista) / t_fista * 100.0


# ---------------------------------------------------------------------------
# built-in test scene


def synthetic_scene(n: int, seed: int = 0, n_disks: int = 320,
                    min_radius: float = 3.0) -> GridImage:
    """Seeded dead-leaves test image in [0, 1]: occluding disks with
    power-law radii over a smooth background.  Sharp edges at every scale
    make the scene wavelet-sparse, so deblurring metrics behave like they
    do on natural photographs without needing external data."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    img = (0.5 + 0.15 * np.sin(2.1 * np.pi * xx / n + 0.7)
           * np.cos(1.3 * np.pi * yy / n))
    rmax = n / 5.0
    u = rng.uniform(0, 1, n_disks)
    radii = min_radius * (1 - u * (1 - (min_radius / rmax) ** 2)) ** -0.5
    for i in np.argsort(-radii):    # paint large disks first, small on top
        cy, cx = rng.uniform(0, n, 2)
        level = rng.uniform(0.05, 0.95)
        img[(yy - cy) ** 2 + (xx - cx) ** 2 < radii[i] ** 2] = level
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# benchmark configuration helpers


def _check_keys(d: dict, allowed: set[str], context: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown keys in {context}: {sorted(unknown)}")


DEFAULT_CONFIG: dict = {
    "image": {"kind": "phantom", "size": 256, "seed": 7, "path": None},
    "degradation": {"psf_support": 11, "psf_sigma": 2.0,
                    "noise_sigma": 0.01, "seed": 123},
    "hierarchy": {"levels": 3, "wavelet": "sym4", "wavelet_levels": None,
                  "lambda": 8e-4, "gamma_fine": 1.0, "gamma_coarse": 1.1,
                  "eta": 0.25},
    "solver": {"kind": "mmfista", "coarse": "fista", "p": 1, "m": 5,
               "a": 3.0, "tau_bar": 1.0, "eps": None, "max_iter": 500},
    "benchmark": {"thresholds": [5.0, 2.0, 1.0, 0.1, 0.01],
                  "oracle_iters": 8000, "max_iter": 4000,
                  "repetitions": 3, "wiener_mu": 1e-2,
                  "instances": None, "solvers": None},
}

_COARSE_BY_NAME = {
    "smoothed": CoarseSolverKind.SMOOTHED_GRADIENT,
    "fb": CoarseSolverKind.FORWARD_BACKWARD,
    "fista": CoarseSolverKind.FISTA_FB,
}

# desk-scale degradation cases (blur support/width, noise level) with the
# l1 weight found by grid search maximizing restored SNR on the built-in
# scene (scripts/tune_lambda.py)
DESK_CASES: dict[str, dict] = {
    "1a": {"psf_support": 11, "psf_sigma": 2.0, "noise_sigma": 0.01, "lambda": 8e-4},
    "1b": {"psf_support": 21, "psf_sigma": 4.0, "noise_sigma": 0.01, "lambda": 4e-4},
    "2a": {"psf_support": 11, "psf_sigma": 2.0, "noise_sigma": 0.04, "lambda": 9e-3},
    "2b": {"psf_support": 21, "psf_sigma": 4.0, "noise_sigma": 0.04, "lambda": 6.4e-3},
}


def load_config(source) -> dict:
    """Merge a config mapping or JSON file over the defaults, rejecting
    unknown keys at every nesting level."""
    if source is None:
        user: dict = {}
    elif isinstance(source, (str, Path)):
        user = json.loads(Path(source).read_text())
    else:
        user = dict(source)
    _check_keys(user, set(DEFAULT_CONFIG), "config")
    merged = {}
    for section, defaults in DEFAULT_CONFIG.items():
        override = user.get(section, {})
        if not isinstance(override, dict):
            raise ValueError(f"config section {section!r} must be a mapping")
        _check_keys(override, set(defaults), f"config.{section}")
        merged[section] = {**defaults, **override}
    return merged


@dataclass
class Instance:
    """One degradation scenario bound to one ground-truth image."""
    name: str
    x_true: GridImage
    z: GridImage
    blur: SeparableBlur
    hierarchy: Hierarchy
    x0: GridImage
    snr_z: float


def build_scene(cfg: dict, degradation: dict | None = None
                ) -> tuple[GridImage, SeparableBlur, GridImage]:
    """(ground truth, blur, degraded observation) for a config."""
    img = cfg["image"]
    if img["kind"] == "phantom":
        x_true = synthetic_scene(img["size"], img["seed"])
    elif img["kind"] == "file":
        from .pgm import read_pgm
        x_true = read_pgm(img["path"])
    else:
        raise ValueError(f"unknown image kind {img['kind']!r}")

    deg = dict(cfg["degradation"])
    if degradation:
        _check_keys(degradation, set(deg), "instance degradation")
        deg.update(degradation)
    spec = DegradationSpec(deg["psf_support"], deg["psf_sigma"],
                           deg["noise_sigma"], deg["seed"])
    blur = spec.make_blur(x_true.shape)
    return x_true, blur, degrade(x_true, spec, blur)


def build_instance(cfg: dict, degradation: dict | None = None,
                   name: str = "default") -> Instance:
    """Materialize image, degradation, hierarchy, and initializer.

    ``degradation`` may carry a per-instance ``lambda`` override alongside
    the degradation parameters.
    """
    degradation = dict(degradation) if degradation else {}
    lam_override = degradation.pop("lambda", None)
    x_true, blur, z = build_scene(cfg, degradation)

    hcfg = cfg["hierarchy"]
    basis = WaveletBasis.from_name(hcfg["wavelet"])
    wl = hcfg["wavelet_levels"]
    if wl is None:
        wl = int(np.log2(min(x_true.shape)))
    lam = hcfg["lambda"] if lam_override is None else lam_override
    prior = L1SynthesisPrior(basis, wl, lam)
    fine = make_fine_level(blur, prior, gamma=hcfg["gamma_fine"])
    hier = build_hierarchy(fine, hcfg["levels"], transfer_basis=basis,
                           eta=hcfg["eta"], gamma_coarse=hcfg["gamma_coarse"])

    x0 = wiener_init(z, blur, cfg["benchmark"]["wiener_mu"]).x
    return Instance(name, x_true, z, blur, hier, x0, snr_db(x_true, z))


def solver_config_from(cfg_solver: dict) -> MmfistaConfig:
    _check_keys(cfg_solver, set(DEFAULT_CONFIG["solver"]), "solver config")
    merged = {**DEFAULT_CONFIG["solver"], **cfg_solver}
    kind = _COARSE_BY_NAME[merged["coarse"]]
    p = 0 if merged["kind"] == "fista" else merged["p"]
    return MmfistaConfig(p=p, m=merged["m"], kind=kind, a=merged["a"],
                         tau_bar=merged["tau_bar"], eps=merged["eps"],
                         max_iter=merged["max_iter"])


# ---------------------------------------------------------------------------
# benchmark driver


@dataclass
class BenchmarkRow:
    instance: str
    solver: str
    hits: list[ThresholdHit | None]
    baseline_hits: list[ThresholdHit | None]
    thresholds: list[float]
    snr_z: float
    snr_final: float
    total_work: float
    total_seconds: float
    converged: bool

    def relative_times(self) -> list[float | None]:
        out = []
        for hit, base in zip(self.hits, self.baseline_hits):
            if hit is None or base is None or base.seconds <= 0:
                out.append(None)
            else:
                out.append(relative_time(hit.seconds, base.seconds))
        return out

    def work_ratios(self) -> list[float | None]:
        out = []
        for hit, base in zip(self.hits, self.baseline_hits):
            if hit is None or base is None or base.work_units <= 0:
                out.append(None)
            else:
                out.append(hit.work_units / base.work_units)
        return out


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow] = field(default_factory=list)
    traces: dict = field(default_factory=dict)   # (instance, solver) -> SolverTrace
    f_stars: dict = field(default_factory=dict)  # instance -> oracle optimum

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["instance", "solver", "snr_z", "snr_final",
                      "total_work", "total_seconds", "converged"]
            if self.rows:
                for q in self.rows[0].thresholds:
                    header += [f"t{q}%_s", f"t{q}%_work", f"t{q}%_rel_time",
                               f"t{q}%_work_ratio"]
            w.writerow(header)
            for row in self.rows:
                rec = [row.instance, row.solver, f"{row.snr_z:.4f}",
                       f"{row.snr_final:.4f}", f"{row.total_work:.2f}",
                       f"{row.total_seconds:.4f}", row.converged]
                for hit, rel, ratio in zip(row.hits, row.relative_times(),
                                           row.work_ratios()):
                    rec += ["" if hit is None else f"{hit.seconds:.4f}",
                            "" if hit is None else f"{hit.work_units:.2f}",
                            "" if rel is None else f"{rel:+.1f}",
                            "" if ratio is None else f"{ratio:.3f}"]
                w.writerow(rec)

    def format_table(self) -> str:
        lines = []
        for row in self.rows:
            lines.append(f"[{row.instance}] {row.solver}: "
                         f"SNR z={row.snr_z:.2f} dB -> {row.snr_final:.2f} dB, "
                         f"work={row.total_work:.0f}")
            cells = []
            for q, hit, rel in zip(row.thresholds, row.hits, row.relative_times()):
                if hit is None:
                    cells.append(f"{q}%: --")
                elif rel is None:
                    cells.append(f"{q}%: {hit.seconds:.2f}s")
                else:
                    cells.append(f"{q}%: {hit.seconds:.2f}s ({rel:+.0f}%)")
            lines.append("    " + "  ".join(cells))
        return "\n".join(lines)


DEFAULT_BENCH_SOLVERS = [
    {"name": "fista", "kind": "fista"},
    {"name": "mmfista-fista-p1", "kind": "mmfista", "coarse": "fista", "p": 1, "m": 5},
]


def run_benchmark(config=None, out_dir=None, progress=None) -> BenchmarkReport:
    """Run the threshold-time benchmark described by ``config``.

    For each instance: a long oracle run pins the reference optimum, then
    the baseline and every configured solver run from the same Wiener
    initializer; rows report threshold seconds/work-units and relative time
    against the baseline.  Deterministic traces for fixed seeds (timing
    columns aside).
    """
    cfg = load_config(config)
    bench = cfg["benchmark"]
    thresholds = list(bench["thresholds"])
    instances_cfg = bench["instances"] or [{"name": "default"}]
    solvers_cfg = bench["solvers"] or DEFAULT_BENCH_SOLVERS
    reps = max(1, int(bench["repetitions"]))
    report = BenchmarkReport()

    for inst_cfg in instances_cfg:
        inst_cfg = dict(inst_cfg)
        name = inst_cfg.pop("name", "default")
        inst = build_instance(cfg, inst_cfg, name)
        if progress:
            progress(f"instance {name}: oracle run ({bench['oracle_iters']} iters)")
        f_star, f0 = _oracle_gap(inst, bench["oracle_iters"])
        report.f_stars[name] = f_star

        baseline_hits = None
        for scfg in solvers_cfg:
            scfg = dict(scfg)
            sname = scfg.pop("name", scfg.get("kind", "solver"))
            mcfg = solver_config_from({**scfg, "max_iter": bench["max_iter"],
                                       "eps": 0.0})
            if progress:
                progress(f"instance {name}: solver {sname}")
            runs = [mmfista_run(inst.hierarchy, inst.z, inst.x0, mcfg,
                                x_true=inst.x_true) for _ in range(reps)]
            runs.sort(key=lambda r: r[1].time_s[-1])
            x, trace = runs[len(runs) // 2]   # median wall time
            hits = threshold_times(trace, f_star, f0, thresholds)
            if baseline_hits is None:
                baseline_hits = hits   # first configured solver is the baseline
            report.traces[(name, sname)] = trace
            report.rows.append(BenchmarkRow(
                instance=name, solver=sname, hits=hits,
                baseline_hits=baseline_hits, thresholds=thresholds,
                snr_z=inst.snr_z, snr_final=snr_db(inst.x_true, x),
                total_work=trace.work_units[-1],
                total_seconds=trace.time_s[-1], converged=trace.converged))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "report.csv")
        for (iname, sname), trace in report.traces.items():
            trace.to_csv(out / f"trace_{iname}_{sname}.csv")
    return report


def _oracle_gap(inst: Instance, oracle_iters: int) -> tuple[float, float]:
    """(f_star, f0): reference optimum from a long baseline run, and the
    objective at the common initializer."""
    objs = inst.hierarchy.objectives(inst.z)
    obj = objs[0]
    sched = MomentumSchedule()
    stop = StopRule(eps=0.0, max_iter=oracle_iters)
    _, trace = fista_run(obj, inst.x0, sched, default_tau(obj), stop)
    f_star = float(np.min(trace.column("F")))
    return f_star, trace.F[0]
