"""Command-line interface.

Subcommands: field, corrector, rho, solve, rate, lemma, moments, admissible.
Every command honors --config (flat key=value file), --out, --seed, and
--threads; defaults reproduce the standard d=3 campaign configuration.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

from . import __version__
from .config import load_config, render_config
from .corrector import solve_corrector, solve_homogenized
from .errors import HlabError
from .experiments import cell_seed, default_config, emit_report, run_campaign
from .fields import check_admissibility, rho_discrete, rho_spectral, synthesize
from .hetero import bump_source, solve_hetero
from .io import save_bundle, save_realization, save_solution
from .kernels import feps_moments, lemma_sweep
from .corrector import rho_empirical


def _global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=pathlib.Path, help="flat key=value config file")
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("hlab_out"))
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--threads", type=int, default=1)


def _load(args) -> "ExperimentConfig":
    cfg = load_config(args.config) if args.config else default_config(3)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def _add_eps(parser, required=False):
    parser.add_argument(
        "--eps", type=float, required=required,
        help="correlation length (default: first ladder entry)",
    )


def cmd_field(args) -> int:
    cfg = _load(args)
    eps = args.eps if args.eps else cfg.ladder[0]
    seed = cell_seed(cfg.master_seed, cfg.d, args.replicate)
    real = synthesize(cfg.model, cfg.grid(), eps, seed, cfg.mode, cfg.n_modes)
    args.out.mkdir(parents=True, exist_ok=True)
    path = save_realization(args.out / "field.bin", real)
    print(f"wrote {path} (eps={eps}, seed={seed})")
    return 0


def cmd_corrector(args) -> int:
    cfg = _load(args)
    eps = args.eps if args.eps else cfg.ladder[0]
    seed = cell_seed(cfg.master_seed, cfg.d, args.replicate)
    real = synthesize(cfg.model, cfg.grid(), eps, seed, cfg.mode, cfg.n_modes)
    bundle = solve_corrector(real)
    rho_d = rho_discrete(cfg.model, cfg.grid(), eps)
    out = save_bundle(args.out / "bundle", bundle, rho_d)
    print(f"wrote {out} (corrector residual {bundle.residual:.2e})")
    return 0


def cmd_rho(args) -> int:
    cfg = _load(args)
    grid = cfg.grid()
    eps = args.eps if args.eps else cfg.ladder[-1]
    report = {
        "continuum": rho_spectral(cfg.model, cfg.d),
        "disc": rho_discrete(cfg.model, grid, eps),
        "regularized": rho_discrete(cfg.model, grid, eps, regularized=True),
        "eps": eps,
    }
    if args.seeds > 0:
        bundles = []
        for rep in range(args.seeds):
            seed = cell_seed(cfg.master_seed, cfg.d, rep)
            bundles.append(
                solve_corrector(synthesize(cfg.model, grid, eps, seed, cfg.mode, cfg.n_modes))
            )
        est, se = rho_empirical(bundles)
        report["empirical"] = est
        report["empirical_stderr"] = se
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_solve(args) -> int:
    cfg = _load(args)
    grid = cfg.grid()
    eps = args.eps if args.eps else cfg.ladder[0]
    seed = cell_seed(cfg.master_seed, cfg.d, args.replicate)
    real = synthesize(cfg.model, grid, eps, seed, cfg.mode, cfg.n_modes)
    f = bump_source(grid)
    sol = solve_hetero(real, f, cfg.solver)
    out = save_solution(args.out / "solve", sol, {"eps": eps, "seed": seed})
    print(
        f"wrote {out} (iterations={sol.iterations}, residual={sol.residual:.2e}, "
        f"H1={sol.energy.h1_norm:.6g} <= {sol.energy.f_hminus1:.6g})"
    )
    return 0


def cmd_rate(args) -> int:
    cfg = _load(args)
    record = run_campaign(cfg, threads=args.threads)
    paths = emit_report(record, args.out)
    for name, fit in record.fits.items():
        if fit is None:
            print(f"{name}: slope undefined (degenerate data)")
        else:
            print(f"{name}: slope={fit.slope:.3f} ci=({fit.ci_low:.3f},{fit.ci_high:.3f})")
    print(f"wrote {paths['results']}, {paths['summary']}, {paths['plotdata']}")
    return 0


def cmd_lemma(args) -> int:
    cfg = _load(args)
    seps = [float(t) for t in args.separations.split(",")]
    rows = ["alpha,beta,lam,separation,integral,bound,ratio,stderr"]
    for alpha, beta in ((2.0, 2.0), (2.0, 1.0), (1.0, 1.0)):
        for res in lemma_sweep(
            alpha, beta, args.lam, seps, d=3, n_samples=args.samples,
            seed=cfg.master_seed,
        ):
            c = res.case
            rows.append(
                f"{c.alpha!r},{c.beta!r},{c.lam!r},{c.separation!r},"
                f"{res.integral!r},{res.bound!r},{res.ratio!r},{res.stderr!r}"
            )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "lemma.csv"
    path.write_text("\n".join(rows) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_moments(args) -> int:
    cfg = _load(args)
    grid = cfg.grid()
    f = bump_source(grid)
    diag = feps_moments(
        cfg.model,
        grid,
        cfg.ladder,
        args.seeds,
        f,
        mode="gaussian",
        master_seed=cfg.master_seed,
        rho_source=cfg.rho_source,
        min_seeds=min(args.seeds, 16),
    )
    rows = ["d,eps,E_l2_sq,E_grad_sq,stderr_l2,stderr_grad"]
    for i, eps in enumerate(diag.eps):
        rows.append(
            f"{cfg.d},{eps!r},{diag.l2_sq_mean[i]!r},{diag.grad_sq_mean[i]!r},"
            f"{diag.l2_sq_stderr[i]!r},{diag.grad_sq_stderr[i]!r}"
        )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "moments.csv"
    path.write_text("\n".join(rows) + "\n")
    print(f"wrote {path} (l2 slope={diag.l2_slope:.3f}, grad slope={diag.grad_slope:.3f})")
    return 0


def cmd_admissible(args) -> int:
    cfg = _load(args)
    rep = check_admissibility(cfg.model, cfg.d)
    print(
        json.dumps(
            {
                "rho_finite": rep.rho_finite,
                "s_condition": rep.s_condition,
                "witness_s": rep.witness_s,
                "rho": rep.rho,
                "weighted_integral": rep.weighted_integral,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def cmd_show_config(args) -> int:
    print(render_config(_load(args)), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlab",
        description="homogenization laboratory for elliptic problems with "
        "a large imaginary random potential",
    )
    parser.add_argument("--version", action="version", version=f"hlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p)
        p.set_defaults(fn=fn)
        return p

    p = add("field", cmd_field, "synthesize a potential realization and dump it")
    _add_eps(p)
    p.add_argument("--replicate", type=int, default=0)

    p = add("corrector", cmd_corrector, "solve the corrector and serialize the bundle")
    _add_eps(p)
    p.add_argument("--replicate", type=int, default=0)

    p = add("rho", cmd_rho, "report spectral / discrete / empirical rho")
    _add_eps(p)
    p.add_argument("--seeds", type=int, default=8, help="bundles for the empirical estimate (0 to skip)")

    p = add("solve", cmd_solve, "run one heterogeneous solve cell")
    _add_eps(p)
    p.add_argument("--replicate", type=int, default=0)

    add("rate", cmd_rate, "run the full eps-ladder campaign and emit reports")

    p = add("lemma", cmd_lemma, "Monte Carlo table for the convolution estimates")
    p.add_argument("--separations", default="0.25,0.5,1,2,4")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10**6)

    p = add("moments", cmd_moments, "eps-scaling of the f_eps moments")
    p.add_argument("--seeds", type=int, default=16)

    add("admissible", cmd_admissible, "admissibility report for the configured model")
    add("show-config", cmd_show_config, "print the effective configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except HlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
