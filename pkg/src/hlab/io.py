"""Binary field dumps and JSON manifests.

Field files carry a fixed little-endian header -- magic ``HLAB1``, then
d (u32), n (u32), a reserved u32 (zero), and the side length L (f64) --
followed by n^d complex values as interleaved f64 (re, im) pairs in
row-major order.  A JSON sidecar at ``<path>.json`` records the seed and
synthesis provenance.
"""

from __future__ import annotations

import json
import pathlib
import struct
from dataclasses import asdict

import numpy as np

from . import __version__
from .corrector import CorrectorBundle
from .fields import FieldRealization
from .grid import SpectralField, TorusGrid, from_nodal
from .hetero import HeteroSolution

MAGIC = b"HLAB1"
_HEADER = struct.Struct("<5sIIId")


def save_field(path, field: SpectralField, meta: dict | None = None) -> pathlib.Path:
    """Write a field (nodal values) plus its JSON sidecar; returns the path."""
    path = pathlib.Path(path)
    grid = field.grid
    values = np.ascontiguousarray(field.to_nodal().values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.d, grid.n, 0, grid.length))
        fh.write(values.tobytes())
    sidecar = dict(meta or {})
    sidecar.setdefault("tool_version", __version__)
    path.with_name(path.name + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )
    return path


def load_field(path) -> tuple[SpectralField, dict]:
    path = pathlib.Path(path)
    with open(path, "rb") as fh:
        magic, d, n, _reserved, length = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise ValueError(f"not an hlab field file: bad magic {magic!r}")
        grid = TorusGrid(int(d), int(n), float(length))
        raw = fh.read(16 * grid.total_points)
    values = np.frombuffer(raw, dtype="<c16").reshape(grid.shape).astype(complex)
    sidecar_path = path.with_name(path.name + ".json")
    meta = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    return from_nodal(grid, values), meta


def realization_meta(realization: FieldRealization) -> dict:
    meta = {
        "seed": realization.seed,
        "eps": realization.eps,
        "mode": realization.mode,
    }
    if realization.model is not None:
        meta["model"] = asdict(realization.model)
    if realization.amplitude_bound is not None:
        meta["amplitude_bound"] = realization.amplitude_bound
    return meta


def save_realization(path, realization: FieldRealization) -> pathlib.Path:
    return save_field(path, realization.potential, realization_meta(realization))


def save_bundle(out_dir, bundle: CorrectorBundle, rho_disc: float | None = None) -> pathlib.Path:
    """Serialize a corrector bundle: one field file per component plus manifest."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = realization_meta(bundle.realization)
    save_field(out / "psi_eps.bin", bundle.psi_eps, meta)
    for i, comp in enumerate(bundle.grad_psi):
        save_field(out / f"grad_psi_{i}.bin", comp, meta)
    save_field(out / "chi_eps.bin", bundle.chi_eps, meta)
    manifest = {
        "eps": bundle.eps,
        "seed": bundle.seed,
        "rho_disc": rho_disc,
        "corrector_residual": bundle.residual,
        "tool_version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def save_solution(out_dir, solution: HeteroSolution, meta: dict | None = None) -> pathlib.Path:
    """Serialize a heterogeneous solve: the field plus a JSON solve report."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_field(out / "u_eps.bin", solution.u_eps, meta or {})
    report = {
        "seed": solution.seed,
        "iterations": solution.iterations,
        "relative_residual": solution.residual,
        "energy": {
            "h1_energy": solution.energy.h1_energy,
            "source_pairing": [
                solution.energy.source_pairing.real,
                solution.energy.source_pairing.imag,
            ],
            "imag_balance": solution.energy.imag_balance,
            "real_identity_defect": solution.energy.real_identity_defect,
            "imag_identity_defect": solution.energy.imag_identity_defect,
            "h1_norm": solution.energy.h1_norm,
            "f_hminus1": solution.energy.f_hminus1,
        },
        "tool_version": __version__,
    }
    (out / "solve_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    return out
