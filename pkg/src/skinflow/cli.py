"""Command-line front end: config parsing, experiment dispatch, CSV/manifest output.

Exit codes: 0 success, 1 config error, 2 numeric failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    BRANCH_NEG,
    BRANCH_POS,
    build_table1,
    build_table2,
    run_gamma_scan,
    run_lightcone,
    run_oscillation,
    run_scissors,
    run_sublattice_comparison,
    run_xi_scan,
)
from .lattice import ModelParams, build_hamiltonian, skin_profile
from .qlif import default_time_grid
from .spectral import DefectiveSpectrumError, diagonalize, ipr_numeric, mean_ipr

EXPERIMENTS = ("scissors", "gamma-scan", "xi-scan", "sublattice",
               "lightcone", "oscillation", "tables", "spectrum")

#: experiments whose default horizon is longer than the global default
_LONG_HORIZON = {"lightcone": 40.0, "oscillation": 40.0}

_DEFAULTS = {
    "t1": 1.0,
    "t2": 0.5,
    "gamma": 0.0,
    "cells": 21,
    "j0": 20,
    "d": 6,
    "dt": 0.05,
    "tmax": 20.0,
    "epsilon": 1e-6,
    "out": "out",
    "workers": 1,
}

_KEY_TYPES = {
    "t1": float, "t2": float, "gamma": float, "cells": int, "j0": int,
    "d": int, "dt": float, "tmax": float, "epsilon": float, "out": str,
    "workers": int,
}


class ConfigError(Exception):
    """Invalid run configuration (unknown key, bad value, broken invariant)."""


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    t1: float
    t2: float
    gamma: float
    cells: int
    j0: int
    d: int
    dt: float
    tmax: float
    epsilon: float
    out: str
    workers: int

    def model_params(self, gamma: float | None = None) -> ModelParams:
        g = self.gamma if gamma is None else gamma
        return ModelParams(t1=self.t1, t2=self.t2, gamma=g, n_cells=self.cells)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: data[k] for k in names})


def parse_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines; '#' starts a comment, blank lines skipped."""
    values: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _KEY_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _KEY_TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: cannot parse {value!r} as "
                f"{_KEY_TYPES[key].__name__} for key {key!r}"
            ) from exc
    return values


def build_config(experiment: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Merge defaults < config file < flags, then validate."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    merged = dict(_DEFAULTS)
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    if "tmax" not in file_values and flag_values.get("tmax") is None:
        merged["tmax"] = _LONG_HORIZON.get(experiment, merged["tmax"])

    config = RunConfig(experiment=experiment, **merged)
    try:
        params = config.model_params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    L = params.n_sites
    if not 0 <= config.j0 < L:
        raise ConfigError(f"j0 = {config.j0} outside chain of {L} sites")
    if config.d <= 0 or config.d % 2 != 0:
        raise ConfigError(f"pair distance d must be a positive even integer, got {config.d}")
    if experiment in ("scissors", "gamma-scan", "xi-scan", "sublattice"):
        if config.j0 - config.d - 1 < 0 or config.j0 + config.d + 1 >= L:
            raise ConfigError(
                f"observation sites j0 +- d (+1) outside chain for j0={config.j0}, d={config.d}"
            )
    if config.dt <= 0:
        raise ConfigError(f"dt must be positive, got {config.dt}")
    if config.tmax <= config.dt:
        raise ConfigError(f"tmax = {config.tmax} must exceed dt = {config.dt}")
    if config.epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {config.epsilon}")
    if config.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {config.workers}")
    return config


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    """Cell formatting: floats at 12 significant digits, None empty."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _gamma_label(gamma: float) -> str:
    return f"{gamma:+.2f}"


def emit_csv(config: RunConfig, result, out_dir: Path) -> tuple[list[Path], dict]:
    """Serialize one experiment result; returns written files and run meta."""
    files: list[Path] = []
    meta: dict = {}

    def emit(name: str, header: list[str], rows: list[tuple]) -> None:
        path = out_dir / name
        write_csv(path, header, rows)
        files.append(path)

    kind = config.experiment
    if kind == "scissors":
        for curves in result.curves:
            rows = [(t, rl, lr, rl - lr) for t, rl, lr in
                    zip(curves.times, curves.t_r_to_l, curves.t_l_to_r)]
            emit(f"scissors_gamma_{_gamma_label(curves.gamma)}.csv",
                 ["time", "T_RL", "T_LR", "delta"], rows)
        meta = result.meta
    elif kind == "gamma-scan":
        t10, t15 = result.sample_times
        rows = [(g, d10, d15) for g, d10, d15 in
                zip(result.gammas, result.delta_at_t[t10], result.delta_at_t[t15])]
        emit("gamma_scan.csv", ["gamma", "delta_t10", "delta_t15"], rows)
        meta = result.meta
    elif kind == "xi-scan":
        for scan in result:
            rows = sorted(zip(scan.xis, scan.gammas, scan.delta_T), key=lambda r: r[0])
            emit(f"xi_scan_{scan.branch}.csv", ["xi", "gamma", "delta_t10"], rows)
            _merge_meta(meta, scan.meta)
    elif kind == "sublattice":
        for label in sorted(result.curves):
            rows = list(zip(result.gammas, result.curves[label]))
            emit(f"sublattice_{label}.csv", ["gamma", "delta_t10"], rows)
        meta = result.meta
    elif kind == "lightcone":
        rows = []
        for curve in result:
            for dist, t_star in zip(curve.distances, curve.onset_times):
                rows.append((curve.gamma, int(dist), t_star, curve.v_eff))
        rows.sort(key=lambda r: (r[0], r[1]))
        emit("lightcone.csv", ["gamma", "d", "t_star", "v_eff_fit"], rows)
        for curve in result:
            _merge_meta(meta, curve.meta)
        meta["blocking"] = {_gamma_label(c.gamma): c.blocking for c in result}
    elif kind == "oscillation":
        rows = [(rep.n_sites, rep.gamma, rep.period, rep.amplitude)
                for rep in sorted(result, key=lambda r: (r.n_sites, r.gamma))]
        emit("oscillation.csv", ["L", "gamma", "period", "amplitude"], rows)
        for rep in result:
            _merge_meta(meta, rep.meta)
    elif kind == "tables":
        table1, table2 = result
        emit("table1.csv",
             ["gamma", "r", "xi", "direction", "ipr_mean", "ipr_theory"],
             [(r.gamma, r.r, r.xi, r.direction, r.ipr_mean, r.ipr_closed_form)
              for r in sorted(table1, key=lambda r: r.gamma)])
        emit("table2.csv",
             ["t2", "phase", "v_max_exact", "v_max_formula"],
             [(r.t2, r.phase, r.v_max_exact, r.v_max_formula)
              for r in sorted(table2, key=lambda r: r.t2)])
    elif kind == "spectrum":
        spec, profile = result
        rows = [(n, spec.eigenvalues[n].real, spec.eigenvalues[n].imag,
                 ipr_numeric(spec.right_vecs[:, n]))
                for n in range(spec.dim)]
        emit("spectrum.csv", ["index", "energy_re", "energy_im", "ipr"], rows)
        meta = {
            "residuals": [spec.biorth_residual],
            "fallbacks": 0,
            "mean_ipr": mean_ipr(spec),
            "skin": {"r": profile.r, "xi": profile.xi, "direction": profile.direction},
        }
    else:  # pragma: no cover - guarded by build_config
        raise ConfigError(f"unknown experiment {kind!r}")
    return files, meta


def _merge_meta(target: dict, meta: dict) -> None:
    target.setdefault("residuals", []).extend(meta.get("residuals", []))
    target["fallbacks"] = target.get("fallbacks", 0) + meta.get("fallbacks", 0)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_json_manifest(config: RunConfig, files: list[Path], meta: dict,
                       duration: float, out_dir: Path) -> Path:
    residuals = [r for r in meta.get("residuals", []) if r is not None]
    manifest = {
        "config": config.to_dict(),
        "version": __version__,
        "duration_seconds": duration,
        "biorth_residuals": {
            "count": len(residuals),
            "max": max(residuals) if residuals else None,
            "fallbacks": meta.get("fallbacks", 0),
        },
        "files": [
            {"name": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size}
            for p in sorted(files, key=lambda p: p.name)
        ],
    }
    extra = {k: v for k, v in meta.items()
             if k not in ("residuals", "fallbacks")}
    if extra:
        manifest["extra"] = extra
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def run_experiment(config: RunConfig):
    grid = default_time_grid(t_max=config.tmax, dt=config.dt)
    common = dict(t1=config.t1, t2=config.t2, n_cells=config.cells,
                  workers=config.workers)
    if config.experiment == "scissors":
        return run_scissors(j0=config.j0, d=config.d, time_grid=grid, **common)
    if config.experiment == "gamma-scan":
        return run_gamma_scan(j0=config.j0, d=config.d, **common)
    if config.experiment == "xi-scan":
        return [run_xi_scan(branch, j0=config.j0, d=config.d, **common)
                for branch in (BRANCH_POS, BRANCH_NEG)]
    if config.experiment == "sublattice":
        return run_sublattice_comparison(j0=config.j0, d=config.d, **common)
    if config.experiment == "lightcone":
        return run_lightcone(epsilon=config.epsilon, j0=config.j0,
                             t_max=config.tmax, dt=config.dt, **common)
    if config.experiment == "oscillation":
        return run_oscillation(d=config.d, t1=config.t1, t2=config.t2,
                               t_max=config.tmax, dt=config.dt,
                               workers=config.workers)
    if config.experiment == "tables":
        return (build_table1(t1=config.t1, t2=config.t2, n_cells=config.cells),
                build_table2(t1=config.t1))
    if config.experiment == "spectrum":
        params = config.model_params()
        return diagonalize(build_hamiltonian(params)), skin_profile(params)
    raise ConfigError(f"unknown experiment {config.experiment!r}")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skinflow",
        description="Directional information flow in a non-reciprocal SSH chain.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="plain-text key = value file")
    parser.add_argument("--t1", type=float, help="intracell hopping (default 1)")
    parser.add_argument("--t2", type=float, help="intercell hopping (default 0.5)")
    parser.add_argument("--gamma", type=float, help="non-reciprocity (default 0)")
    parser.add_argument("--cells", type=int, help="unit cells N; L = 2N sites (default 21)")
    parser.add_argument("--j0", type=int, help="initial excitation site (default 20)")
    parser.add_argument("--d", type=int, help="observation distance, even (default 6)")
    parser.add_argument("--dt", type=float, help="time grid step (default 0.05)")
    parser.add_argument("--tmax", type=float,
                        help="time horizon (default 20; 40 for lightcone/oscillation)")
    parser.add_argument("--epsilon", type=float, help="onset threshold (default 1e-6)")
    parser.add_argument("--out", help="output directory (default ./out)")
    parser.add_argument("--workers", type=int, help="scan worker threads (default 1)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    flag_values = {key: getattr(args, key) for key in _KEY_TYPES}
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        config = build_config(args.experiment, file_values, flag_values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3

    started = time.monotonic()
    try:
        result = run_experiment(config)
    except (DefectiveSpectrumError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        files, meta = emit_csv(config, result, out_dir)
        duration = time.monotonic() - started
        manifest = emit_json_manifest(config, files, meta, duration, out_dir)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(files)} data file(s) and {manifest.name} to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
