"""Command-line entry point: ``qgap run``, ``qgap sweep`` and ``qgap calib-import``.

Outputs go under ``$QGAP_OUTPUT_ROOT`` (default ``./qgap_output``). Every file
carries the config hash and seed, and nothing time-dependent is written, so
two runs of the same config produce byte-identical files. Wall-clock timings
are printed to stderr only.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import RunConfig
from .errors import ConfigurationError, InvalidModelError
from .spectral import write_spectrum

OUTPUT_ENV = "QGAP_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "qgap_output"))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else f"{float(x):.17g}"
    return str(x)


def _yaml_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _yaml_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_yaml_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return "nan" if math.isnan(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_record(record, out_dir: Path) -> None:
    """Summary, trace, time series and snapshot spectra for one run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = record.config
    seed = cfg.sampling.seed
    tag = {"config_hash": record.config_hash, "seed": seed}
    est = record.estimate
    summary = {
        **tag,
        "version": __version__,
        "name": cfg.name,
        "delta_exact": record.delta_exact,
        "delta0": record.delta0,
        "theta_opt": record.trace.theta_opt,
        "cost_opt": record.trace.cost_opt,
        "termination_reason": record.trace.termination_reason,
        "n_evaluations": record.trace.n_evals,
        "estimate": est.to_dict(),
        "als_converged": record.final.baseline.converged,
        "als_iterations": record.final.baseline.iterations_used,
        "snapshots": {k: record.evaluation_at(i).theta for k, i in record.snapshots.items()},
        "config": cfg.to_dict(),
    }
    (out_dir / "summary.yaml").write_text(yaml.safe_dump(_yaml_safe(summary), sort_keys=False))

    header = f"# config_hash={record.config_hash}\n# seed={seed}\n"
    lines = ["iteration\ttheta\tcost\tstep\tpenalized\tdelta_bare\tdelta_corr\trel_error_bare\trel_error_corr"]
    for i, entry in enumerate(record.trace.entries):
        ev = record.evaluation_at(i)
        e = ev.estimate
        lines.append("\t".join(_fmt(v) for v in (entry.iteration, entry.theta, entry.cost, entry.step,
                                                 ev.penalized, e.delta_bare, e.delta_corr,
                                                 e.rel_error_bare, e.rel_error_corr)))
    (out_dir / "trace.tsv").write_text(header + "\n".join(lines) + "\n")

    final = record.final
    grid = final.series.grid
    lines = ["n\tt\tP_plus\tP_minus"]
    for n in range(grid.length):
        lines.append("\t".join(_fmt(v) for v in (n, n * grid.dt, final.series.values[0, n],
                                                 final.series.values[1, n])))
    (out_dir / "series_final.tsv").write_text(header + "\n".join(lines) + "\n")

    label = "none"
    if cfg.noise.kind != "none":
        label = cfg.noise.kind if cfg.noise.kind != "depolarizing" else f"depolarizing({cfg.noise.p:g})"
    for snap, idx in record.snapshots.items():
        ev = record.evaluation_at(idx)
        meta = {**tag, "theta": ev.theta, "M": cfg.trotter.m_steps, "noise": label,
                "shots": "exact" if cfg.sampling.shots is None else cfg.sampling.shots, "snapshot": snap}
        for part, values in (("raw", ev.spectrum.values), ("corrected", ev.baseline.corrected),
                             ("baseline", ev.baseline.baseline)):
            write_spectrum(ev.spectrum.with_values(values, part=part), out_dir / f"spectrum_{snap}_{part}.tsv",
                           header=meta)


def _print_summary(record, stream=None) -> None:
    stream = stream or sys.stdout
    e = record.estimate
    print(f"config {record.config_hash} seed {record.config.sampling.seed}", file=stream)
    print(f"theta_opt   = {record.trace.theta_opt:.10f} ({record.trace.termination_reason}, "
          f"{record.trace.n_evals} evaluations)", file=stream)
    print(f"Delta_exact = {e.delta_exact:.10f}", file=stream)
    print(f"Delta_bare  = {e.delta_bare:.10f}  rel_error = {e.rel_error_bare:.6f}", file=stream)
    print(f"Delta_corr  = {e.delta_corr:.10f}  rel_error = {e.rel_error_corr:.6f}", file=stream)
    if not record.final.baseline.converged:
        print("warning: ALS baseline did not converge", file=stream)


def _run_dir(cfg: RunConfig) -> Path:
    return output_root() / f"{cfg.name}-{cfg.config_hash()}-seed{cfg.sampling.seed}"


def cmd_run(config_path: str) -> int:
    from .estimate import run_qge

    cfg = RunConfig.load(config_path)
    record = run_qge(cfg, base_dir=Path(config_path).resolve().parent)
    out = _run_dir(cfg)
    write_record(record, out)
    _print_summary(record)
    print(f"outputs: {out}")
    print(f"timings: " + ", ".join(f"{k}={v:.2f}s" for k, v in record.timings.items()), file=sys.stderr)
    return EXIT_OK


def parse_sweep_values(axis: str, values: str) -> list:
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not items:
        raise ConfigurationError("empty sweep value list")
    out = []
    for item in items:
        try:
            if axis == "M":
                out.append(int(item))
            elif axis == "N":
                if ":" in item:
                    n, j = item.split(":", 1)
                    out.append((int(n), float(j)))
                else:
                    out.append((int(item), None))
            elif axis == "p":
                out.append(float(item))
            else:
                raise ConfigurationError(f"unknown sweep axis {axis!r}; use M, N or p")
        except ValueError as exc:
            raise ConfigurationError(f"bad sweep value {item!r} for axis {axis}") from exc
    return out


def sweep_config(cfg: RunConfig, axis: str, value) -> RunConfig:
    if axis == "M":
        return cfg.replace(**{"trotter.m_steps": value, "name": f"{cfg.name}-M{value}"})
    if axis == "N":
        n, j = value
        changes = {"model.n_qubits": n, "name": f"{cfg.name}-N{n}"}
        if j is not None:
            changes["model.j_over_h"] = j
            changes["name"] += f"-J{j:g}"
        return cfg.replace(**changes)
    return cfg.replace(**{"noise.kind": "depolarizing", "noise.p": value, "name": f"{cfg.name}-p{value:g}"})


def _sweep_point(args):
    from .estimate import run_qge

    cfg_dict, base_dir = args
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        record = run_qge(cfg, base_dir=base_dir)
    except Exception as exc:  # recorded per point, the sweep continues
        return cfg_dict, None, f"{type(exc).__name__}: {exc}"
    write_record(record, _run_dir(cfg))
    return cfg_dict, record.estimate.to_dict() | {"theta_opt": record.trace.theta_opt}, None


def cmd_sweep(config_path: str, axis: str, values: str, workers: int = 1) -> int:
    cfg = RunConfig.load(config_path)
    points = parse_sweep_values(axis, values)
    configs = [sweep_config(cfg, axis, v) for v in points]
    base_dir = Path(config_path).resolve().parent
    jobs = [(c.to_dict(), base_dir) for c in configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    cols = ["value", "rel_error_bare", "rel_error_corr", "delta_bare", "delta_corr", "delta_exact",
            "peak_height_bare", "peak_height_corr", "theta_opt", "status"]
    lines = [f"# config_hash={cfg.config_hash()}", f"# seed={cfg.sampling.seed}", f"# axis={axis}",
             "\t".join(cols)]
    failures = 0
    for value, (_, est, err) in zip(points, results):
        label = f"{value[0]}:{value[1]:g}" if axis == "N" and value[1] is not None else \
            str(value[0] if axis == "N" else value)
        if est is None:
            failures += 1
            lines.append("\t".join([label] + ["nan"] * (len(cols) - 2) + [f"error: {err}"]))
            print(f"{axis}={label}: failed ({err})", file=sys.stderr)
            continue
        lines.append("\t".join([label] + [_fmt(est[c]) for c in cols[1:-1]] + ["ok"]))
        print(f"{axis}={label}: rel_error_bare={est['rel_error_bare']:.6f} "
              f"rel_error_corr={est['rel_error_corr']:.6f}")
    out = output_root() / f"sweep-{cfg.name}-{cfg.config_hash()}-seed{cfg.sampling.seed}-{axis}.tsv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    print(f"table: {out}")
    return EXIT_OK


def cmd_calibration_import(csv_path: str, out_path: str) -> int:
    from .noise import parse_calibration

    path = Path(csv_path)
    if not path.is_file():
        raise ConfigurationError(f"calibration file not found: {path}")
    parsed = parse_calibration(path)
    for lineno, reason in parsed.rejected:
        print(f"rejected line {lineno}: {reason}", file=sys.stderr)
    for note in parsed.warnings:
        print(f"warning: {note}", file=sys.stderr)
    if not parsed.records:
        raise ConfigurationError(f"no valid calibration rows in {path}")
    doc = {"source": path.name, "records": [r.to_dict() for r in parsed.records],
           "rejected": [{"line": n, "reason": r} for n, r in parsed.rejected],
           "warnings": list(parsed.warnings)}
    Path(out_path).write_text(yaml.safe_dump(doc, sort_keys=False))
    print(f"{len(parsed.records)} records written to {out_path}; {len(parsed.rejected)} rejected")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgap", description="Quantum gap estimation simulator")
    parser.add_argument("--version", action="version", version=f"qgap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one gap-estimation pipeline")
    p.add_argument("config")
    p = sub.add_parser("sweep", help="sweep Trotter depth, system size or depolarizing probability")
    p.add_argument("config")
    p.add_argument("--axis", required=True, choices=["M", "N", "p"])
    p.add_argument("--values", required=True, help="comma list; N values may be N:J, e.g. 7:0.5")
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("calib-import", help="validate calibration data and write a noise-spec file")
    p.add_argument("csv")
    p.add_argument("out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "sweep":
            return cmd_sweep(args.config, args.axis, args.values, args.workers)
        return cmd_calibration_import(args.csv, args.out)
    except (ConfigurationError, InvalidModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
