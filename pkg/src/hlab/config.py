"""Flat key = value configuration files with [grid] [model] [solver] [campaign] sections.

Unknown sections or keys are errors; values are plain scalars except
``ladder``, a comma-separated decreasing list of eps values.
"""

from __future__ import annotations

import configparser

from .errors import ConfigError
from .experiments import ExperimentConfig, default_config
from .fields import SpectrumModel
from .hetero import SolverConfig

_SCHEMA = {
    "grid": {"d": int, "n": int, "length": float},
    "model": {
        "family": str,
        "sigma2": float,
        "k_max": float,
        "gamma": float,
        "ell": float,
        "mode": str,
        "modes_m": int,
    },
    "solver": {"tol": float, "max_iter": int, "restart": int},
    "campaign": {
        "ladder": str,
        "seeds": int,
        "master_seed": int,
        "rho_source": str,
    },
}


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string(text)
    raw: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        raw[section] = {}
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            try:
                raw[section][key] = _SCHEMA[section][key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {value!r}") from exc

    grid_sec = raw.get("grid", {})
    d = grid_sec.get("d", 3)
    base = default_config(d) if d in (3, 4, 5) else default_config(3)

    model_sec = raw.get("model", {})
    model = SpectrumModel(
        family=model_sec.get("family", base.model.family),
        sigma2=model_sec.get("sigma2", base.model.sigma2),
        k_max=model_sec.get("k_max", base.model.k_max),
        gamma=model_sec.get("gamma", base.model.gamma),
        ell=model_sec.get("ell", base.model.ell),
    )
    solver_sec = raw.get("solver", {})
    solver = SolverConfig(
        tolerance=solver_sec.get("tol", base.solver.tolerance),
        max_iterations=solver_sec.get("max_iter", base.solver.max_iterations),
        restart=solver_sec.get("restart", base.solver.restart),
    )
    camp = raw.get("campaign", {})
    ladder = base.ladder
    if "ladder" in camp:
        try:
            ladder = tuple(float(tok) for tok in camp["ladder"].split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"bad ladder: {camp['ladder']!r}") from exc
    return ExperimentConfig(
        d=d,
        n=grid_sec.get("n", base.n),
        length=grid_sec.get("length", base.length),
        model=model,
        mode=model_sec.get("mode", base.mode),
        n_modes=model_sec.get("modes_m", base.n_modes),
        ladder=ladder,
        seeds=camp.get("seeds", base.seeds),
        master_seed=camp.get("master_seed", base.master_seed),
        solver=solver,
        rho_source=camp.get("rho_source", base.rho_source),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def render_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config_text` for the supported keys."""
    ladder = ",".join(repr(e) for e in cfg.ladder)
    return (
        "[grid]\n"
        f"d = {cfg.d}\nn = {cfg.n}\nlength = {cfg.length!r}\n\n"
        "[model]\n"
        f"family = {cfg.model.family}\nsigma2 = {cfg.model.sigma2!r}\n"
        f"k_max = {cfg.model.k_max!r}\ngamma = {cfg.model.gamma!r}\n"
        f"ell = {cfg.model.ell!r}\nmode = {cfg.mode}\nmodes_m = {cfg.n_modes}\n\n"
        "[solver]\n"
        f"tol = {cfg.solver.tolerance!r}\nmax_iter = {cfg.solver.max_iterations}\n"
        f"restart = {cfg.solver.restart}\n\n"
        "[campaign]\n"
        f"ladder = {ladder}\nseeds = {cfg.seeds}\nmaster_seed = {cfg.master_seed}\n"
        f"rho_source = {cfg.rho_source}\n"
    )
