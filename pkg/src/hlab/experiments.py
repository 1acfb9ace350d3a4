"""Monte Carlo campaigns over an eps ladder and convergence-rate fits.

A campaign is a pure function of its configuration: per-cell seeds derive
from the master seed through a published SHA-256 construction, cells are
computed independently (possibly on a thread pool), and reductions happen
in sorted cell order, so serial and parallel runs emit byte-identical
reports.

Replicate r uses the same derived seed at every rung of the ladder (common
random numbers): the rate-carrying low-wavevector spectral content is then
shared across rungs and cancels in the log-log slope, which cuts the rate
estimator's variance by more than an order of magnitude at equal cost.
Streams remain independent across replicates.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__ as _version
from .corrector import CorrectorBundle, HomogSolution, solve_corrector, solve_homogenized
from .errors import CampaignError, ConfigError, DegenerateFitError, SolverStagnationError
from .fields import (
    GAUSSIAN,
    RANDOM_PHASE,
    DEFAULT_RANDOM_PHASE_MODES,
    SpectrumModel,
    rho_discrete,
    rho_spectral,
    synthesize,
)
from .grid import TorusGrid
from .hetero import (
    ErrorMetrics,
    SolverConfig,
    bump_source,
    error_metrics,
    solve_hetero,
)

ENERGY_IDENTITY_TOL = 1e-6


def cell_seed(master_seed: int, d: int, replicate: int) -> int:
    """Derived 64-bit seed: first 8 little-endian bytes of
    SHA-256("hlab:{master}:{d}:{replicate}")."""
    digest = hashlib.sha256(f"hlab:{master_seed}:{d}:{replicate}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    ci_low: float
    ci_high: float


def fit_rate(pairs) -> RateFit:
    """Weighted least squares of log(mean) against log(eps).

    ``pairs`` is a sequence of (eps, mean, stderr) or (eps, mean); weights
    come from the delta-method variance of log(mean).  Requires at least 3
    ladder points with positive means.
    """
    rows = [tuple(p) for p in pairs]
    if len(rows) < 3:
        raise DegenerateFitError("degenerate fit input: need >= 3 ladder points")
    eps = np.array([r[0] for r in rows], dtype=float)
    means = np.array([r[1] for r in rows], dtype=float)
    if np.any(~np.isfinite(means)) or np.any(means <= 0):
        raise DegenerateFitError("degenerate fit input: non-positive mean")
    stderr = np.array(
        [r[2] if len(r) > 2 and r[2] is not None else 0.0 for r in rows], dtype=float
    )
    y = np.log(means)
    x = np.log(eps)
    if np.all(stderr > 0):
        w = (means / stderr) ** 2
    else:
        w = np.ones_like(y)
    W = np.sum(w)
    xbar = np.sum(w * x) / W
    ybar = np.sum(w * y) / W
    sxx = np.sum(w * (x - xbar) ** 2)
    slope = float(np.sum(w * (x - xbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    if np.all(stderr > 0):
        se = float(math.sqrt(1.0 / sxx))
    else:
        resid = y - (intercept + slope * x)
        dof = max(len(y) - 2, 1)
        se = float(math.sqrt(np.sum(resid**2) / dof / np.sum((x - xbar) ** 2)))
    return RateFit(slope, intercept, se, slope - 1.96 * se, slope + 1.96 * se)


def fit_log_corrected(pairs) -> tuple[float, float]:
    """One-parameter fit mean = C * eps * sqrt(|ln eps|) (the d=4 model).

    Returns (C, rms residual in log space), reported alongside the power fit;
    at desk scale the two models are not reliably separable.
    """
    rows = [tuple(p) for p in pairs]
    eps = np.array([r[0] for r in rows], dtype=float)
    means = np.array([r[1] for r in rows], dtype=float)
    if np.any(means <= 0):
        raise DegenerateFitError("degenerate fit input: non-positive mean")
    basis = eps * np.sqrt(np.abs(np.log(eps)))
    logc = np.mean(np.log(means) - np.log(basis))
    resid = np.log(means) - (logc + np.log(basis))
    return float(math.exp(logc)), float(np.sqrt(np.mean(resid**2)))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 3
    n: int = 128
    length: float = 2.0
    model: SpectrumModel = SpectrumModel("band-limited-flat", sigma2=16.0, k_max=8.0)
    mode: str = RANDOM_PHASE
    n_modes: int = DEFAULT_RANDOM_PHASE_MODES
    ladder: tuple[float, ...] = (0.5, 0.25, 0.125)
    seeds: int = 16
    master_seed: int = 1729
    solver: SolverConfig = SolverConfig()
    rho_source: str = "disc"

    def __post_init__(self):
        if self.rho_source not in ("disc", "continuum"):
            raise ConfigError(f"rho_source must be 'disc' or 'continuum', got {self.rho_source!r}")
        if self.mode not in (GAUSSIAN, RANDOM_PHASE):
            raise ConfigError(f"unknown synthesis mode {self.mode!r}")
        if self.seeds < 4:
            raise ConfigError("need at least 4 seeds per rung")
        if len(self.ladder) == 0:
            raise ConfigError("empty eps ladder")
        if any(b >= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigError("eps ladder must be strictly decreasing")
        grid = self.grid()
        for eps in self.ladder:
            grid.check_resolution(eps)

    def grid(self) -> TorusGrid:
        return TorusGrid(self.d, self.n, self.length)

    def echo(self) -> dict:
        d = asdict(self)
        d["model"] = asdict(self.model)
        d["solver"] = asdict(self.solver)
        d["ladder"] = list(self.ladder)
        return d


def default_config(d: int = 3) -> ExperimentConfig:
    """Campaign defaults: the full d=3 study plus d=4/d=5 smoke scales."""
    if d == 3:
        return ExperimentConfig()
    if d == 4:
        return ExperimentConfig(
            d=4, n=32, length=1.0, ladder=(0.5, 2.0**-1.5, 0.25), seeds=8
        )
    if d == 5:
        return ExperimentConfig(
            d=5, n=16, length=0.5, ladder=(0.5, 2.0**-1.5, 0.25), seeds=8
        )
    raise ConfigError(f"no default campaign for d={d}")


# ---------------------------------------------------------------------------
# Campaign
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    eps_index: int
    replicate: int
    eps: float
    seed: int
    metrics: ErrorMetrics
    iterations: int
    residual: float
    real_identity_defect: float
    imag_identity_defect: float
    apriori_ok: bool
    corrector_residual: float


@dataclass(frozen=True)
class EpsAggregate:
    eps: float
    cells: int
    l2_rms: float
    l2_rms_stderr: float
    h1_exp_rms: float
    h1_exp_rms_stderr: float
    grad_corr_rms: float
    grad_corr_rms_stderr: float
    eps_u1_sq_mean: float
    eps_u1_sq_stderr: float
    eps_grad_u1_sq_mean: float
    eps_grad_u1_sq_stderr: float
    mean_iterations: float


@dataclass(frozen=True)
class ExperimentRecord:
    config: ExperimentConfig
    rho_table: dict
    cells: list[CellResult]
    aggregates: list[EpsAggregate]
    fits: dict
    log_corrected: dict
    failed_cells: list


def _rms_with_stderr(values: np.ndarray) -> tuple[float, float]:
    sq = values**2
    m = sq.mean()
    se = sq.std(ddof=1) / math.sqrt(len(sq)) if len(sq) > 1 else 0.0
    rms = math.sqrt(m)
    return rms, se / (2.0 * rms) if m > 0 else 0.0


def _mean_with_stderr(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(
        values.std(ddof=1) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    )


def run_campaign(cfg: ExperimentConfig, threads: int = 1, progress=None) -> ExperimentRecord:
    """Run the full (eps, replicate) grid and aggregate rate fits.

    Per cell: synthesize -> corrector -> heterogeneous solve -> error metrics
    against the rung's homogenized solution.  The discrete energy identities
    and the a-priori H^1 bound are re-asserted for every successful solve and
    the campaign fails loudly if any cell violates them; solver stagnation
    marks the cell failed, and more than 10% failed cells abort the campaign.
    """
    grid = cfg.grid()
    f = bump_source(grid)

    rho_cont = rho_spectral(cfg.model, cfg.d) if cfg.model.sigma2 >= 0 else 0.0
    rho_table = {}
    u0_by_eps: dict[int, HomogSolution] = {}
    for i, eps in enumerate(cfg.ladder):
        disc = rho_discrete(cfg.model, grid, eps)
        reg = rho_discrete(cfg.model, grid, eps, regularized=True)
        rho_table[eps] = {"disc": disc, "continuum": rho_cont, "regularized": reg}
        rho_used = disc if cfg.rho_source == "disc" else rho_cont
        u0_by_eps[i] = solve_homogenized(f, rho_used)

    def run_cell(eps_index: int, replicate: int):
        eps = cfg.ladder[eps_index]
        seed = cell_seed(cfg.master_seed, cfg.d, replicate)
        real = synthesize(cfg.model, grid, eps, seed, cfg.mode, cfg.n_modes)
        bundle = solve_corrector(real)
        sol = solve_hetero(real, f, cfg.solver)
        met = error_metrics(sol, u0_by_eps[eps_index], bundle)
        return CellResult(
            eps_index=eps_index,
            replicate=replicate,
            eps=eps,
            seed=seed,
            metrics=met,
            iterations=sol.iterations,
            residual=sol.residual,
            real_identity_defect=sol.energy.real_identity_defect,
            imag_identity_defect=sol.energy.imag_identity_defect,
            apriori_ok=sol.energy.apriori_satisfied(cfg.solver.tolerance),
            corrector_residual=bundle.residual,
        )

    jobs = [(i, r) for i in range(len(cfg.ladder)) for r in range(cfg.seeds)]
    results: dict[tuple[int, int], CellResult] = {}
    failures: list[tuple[int, int, str]] = []

    def worker(job):
        try:
            return job, run_cell(*job), None
        except SolverStagnationError as exc:
            return job, None, str(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(worker, jobs))
    else:
        outs = [worker(j) for j in jobs]
    for job, cell, err in outs:
        if cell is None:
            failures.append((job[0], job[1], err))
        else:
            results[job] = cell
        if progress is not None:
            progress(job, err)

    if len(failures) > 0.1 * len(jobs):
        raise CampaignError(
            f"campaign failed: {len(failures)}/{len(jobs)} cells stagnated"
        )

    cells = [results[j] for j in sorted(results)]
    for c in cells:
        if (
            c.real_identity_defect > ENERGY_IDENTITY_TOL
            or c.imag_identity_defect > ENERGY_IDENTITY_TOL
        ):
            raise CampaignError(
                f"energy identity violated at eps={c.eps} replicate={c.replicate}: "
                f"defects {c.real_identity_defect:.2e}/{c.imag_identity_defect:.2e}"
            )
        if not c.apriori_ok:
            raise CampaignError(
                f"a-priori H1 bound violated at eps={c.eps} replicate={c.replicate}"
            )

    aggregates = []
    for i, eps in enumerate(cfg.ladder):
        rows = [c for c in cells if c.eps_index == i]
        if not rows:
            continue
        l2 = np.array([c.metrics.l2_err for c in rows])
        h1 = np.array([c.metrics.h1_exp_err for c in rows])
        gc = np.array([c.metrics.grad_corr_err for c in rows])
        u1 = np.array([c.metrics.eps_u1_l2 for c in rows])
        gu1 = np.array([c.metrics.eps_grad_u1_l2 for c in rows])
        l2_rms, l2_se = _rms_with_stderr(l2)
        h1_rms, h1_se = _rms_with_stderr(h1)
        gc_rms, gc_se = _rms_with_stderr(gc)
        u1_m, u1_se = _mean_with_stderr(u1**2)
        gu1_m, gu1_se = _mean_with_stderr(gu1**2)
        aggregates.append(
            EpsAggregate(
                eps=eps,
                cells=len(rows),
                l2_rms=l2_rms,
                l2_rms_stderr=l2_se,
                h1_exp_rms=h1_rms,
                h1_exp_rms_stderr=h1_se,
                grad_corr_rms=gc_rms,
                grad_corr_rms_stderr=gc_se,
                eps_u1_sq_mean=u1_m,
                eps_u1_sq_stderr=u1_se,
                eps_grad_u1_sq_mean=gu1_m,
                eps_grad_u1_sq_stderr=gu1_se,
                mean_iterations=float(np.mean([c.iterations for c in rows])),
            )
        )

    fits = {}
    log_corrected = {}
    series = {
        "l2_err": [(a.eps, a.l2_rms, a.l2_rms_stderr) for a in aggregates],
        "h1_exp_err": [(a.eps, a.h1_exp_rms, a.h1_exp_rms_stderr) for a in aggregates],
        "grad_corr_err": [
            (a.eps, a.grad_corr_rms, a.grad_corr_rms_stderr) for a in aggregates
        ],
        "eps_u1_sq": [(a.eps, a.eps_u1_sq_mean, a.eps_u1_sq_stderr) for a in aggregates],
        "eps_grad_u1_sq": [
            (a.eps, a.eps_grad_u1_sq_mean, a.eps_grad_u1_sq_stderr) for a in aggregates
        ],
    }
    for name, pts in series.items():
        try:
            fits[name] = fit_rate(pts)
        except DegenerateFitError:
            fits[name] = None
        try:
            log_corrected[name] = fit_log_corrected(pts)
        except DegenerateFitError:
            log_corrected[name] = None

    return ExperimentRecord(
        config=cfg,
        rho_table=rho_table,
        cells=cells,
        aggregates=aggregates,
        fits=fits,
        log_corrected=log_corrected,
        failed_cells=failures,
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

RESULTS_COLUMNS = "d,eps,seed,l2_err,h1_exp_err,grad_corr_err,eps_u1_l2,iters,residual"


def emit_report(record: ExperimentRecord, out_dir) -> dict:
    """Write results.csv, summary.json, and plotdata.csv under ``out_dir``.

    Output is byte-stable: floats are rendered with shortest round-trip
    repr, rows are sorted, and no timestamps are embedded.
    """
    import pathlib

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = record.config

    lines = [RESULTS_COLUMNS]
    for c in record.cells:
        m = c.metrics
        lines.append(
            ",".join(
                [
                    repr(cfg.d),
                    repr(c.eps),
                    repr(c.seed),
                    repr(m.l2_err),
                    repr(m.h1_exp_err),
                    repr(m.grad_corr_err),
                    repr(m.eps_u1_l2),
                    repr(c.iterations),
                    repr(c.residual),
                ]
            )
        )
    results_path = out / "results.csv"
    results_path.write_text("\n".join(lines) + "\n")

    plot_lines = ["metric,eps,log10_eps,value,log10_value,stderr"]
    series = {
        "l2_err": [(a.eps, a.l2_rms, a.l2_rms_stderr) for a in record.aggregates],
        "h1_exp_err": [
            (a.eps, a.h1_exp_rms, a.h1_exp_rms_stderr) for a in record.aggregates
        ],
        "grad_corr_err": [
            (a.eps, a.grad_corr_rms, a.grad_corr_rms_stderr) for a in record.aggregates
        ],
        "eps_u1_sq": [
            (a.eps, a.eps_u1_sq_mean, a.eps_u1_sq_stderr) for a in record.aggregates
        ],
        "eps_grad_u1_sq": [
            (a.eps, a.eps_grad_u1_sq_mean, a.eps_grad_u1_sq_stderr)
            for a in record.aggregates
        ],
    }
    for name, pts in sorted(series.items()):
        for eps, val, se in pts:
            lv = math.log10(val) if val > 0 else float("nan")
            plot_lines.append(
                f"{name},{eps!r},{math.log10(eps)!r},{val!r},{lv!r},{se!r}"
            )
    plot_path = out / "plotdata.csv"
    plot_path.write_text("\n".join(plot_lines) + "\n")

    def fit_dict(fit):
        if fit is None:
            return None
        return {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "slope_stderr": fit.slope_stderr,
            "ci": [fit.ci_low, fit.ci_high],
        }

    summary = {
        "tool_version": _version,
        "config": cfg.echo(),
        "rho": {repr(k): v for k, v in record.rho_table.items()},
        "fits": {k: fit_dict(v) for k, v in record.fits.items()},
        "log_corrected_fits": {
            k: (None if v is None else {"coefficient": v[0], "log_rms_residual": v[1]})
            for k, v in record.log_corrected.items()
        },
        "aggregates": [asdict(a) for a in record.aggregates],
        "failed_cells": [[i, r, msg] for i, r, msg in record.failed_cells],
        "cells_total": len(record.cells) + len(record.failed_cells),
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {
        "results": results_path,
        "summary": summary_path,
        "plotdata": plot_path,
    }
