"""Command-line interface, model config files, and result serialization.

Model files are plain key-value text: `B` holds semicolon-separated matrix
rows, `pi` the block weights, optional `d` the embedding rank and `regime`
the sparsity regime. CLI flags override file values. Every randomized
subcommand requires an explicit --seed; there is no wall-clock seeding.

Exit codes: 0 success, 2 configuration error (message names the field),
1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import chernoff as _chernoff
from . import embed as _embed
from . import harness as _harness
from . import limits as _limits
from .errors import ConfigError, RdpgError
from .model import BlockModelParams, mixture_from_block_model, sample_rdpg

CSV_FORMAT = "csv"
JSON_FORMAT = "json"


# ---------------------------------------------------------------------------
# Model config files
# ---------------------------------------------------------------------------


def parse_matrix(text: str) -> np.ndarray:
    """Parse 'a b; c d' (spaces or commas within rows) into a 2-D array."""
    rows = []
    for chunk in text.strip().split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        rows.append([float(v) for v in chunk.replace(",", " ").split()])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"B: cannot parse matrix from {text!r}")
    return np.asarray(rows)


def parse_vector(text: str) -> np.ndarray:
    return np.asarray([float(v) for v in text.replace(",", " ").split()])


def parse_model_file(path: str | Path) -> dict:
    """Read a key-value model file; keys B, pi, d, regime."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key == "b":
            values["B"] = parse_matrix(value)
        elif key == "pi":
            values["pi"] = parse_vector(value)
        elif key == "d":
            values["d"] = int(value)
        elif key == "regime":
            if value.lower() not in (_limits.DENSE, _limits.VANISHING):
                raise ConfigError(f"regime: must be dense or vanishing, got {value!r}")
            values["regime"] = value.lower()
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def resolve_model(args) -> tuple[BlockModelParams, int, str]:
    """Combine --model file and flag overrides into validated parameters."""
    values = parse_model_file(args.model) if getattr(args, "model", None) else {}
    if getattr(args, "B", None):
        values["B"] = parse_matrix(args.B)
    if getattr(args, "pi", None):
        values["pi"] = parse_vector(args.pi)
    if getattr(args, "d", None) is not None:
        values["d"] = args.d
    if getattr(args, "regime", None):
        values["regime"] = args.regime
    if "B" not in values:
        raise ConfigError("B: block probability matrix missing (--model or --B)")
    if "pi" not in values:
        raise ConfigError("pi: block weights missing (--model or --pi)")
    try:
        params = BlockModelParams(block_probs=values["B"], weights=values["pi"])
    except (ValueError, RdpgError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    rank = values.get(
        "d", int(np.sum(np.linalg.eigvalsh(params.block_probs) > 1e-10))
    )
    regime = values.get("regime", _limits.DENSE)
    return params, rank, regime


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def _json_safe(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return _json_safe(value.item())
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_results(report, path: str | Path, format: str = CSV_FORMAT) -> None:
    """Write a report as RFC-4180 CSV or as JSON {manifest, rows}.

    `report` is a dict with keys 'columns', 'rows' (list of dicts) and
    optionally 'manifest'. Infinite values serialize as the string "inf".
    """
    path = Path(path)
    columns = report["columns"]
    rows = report["rows"]
    if format == CSV_FORMAT:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(c)) for c in columns])
    elif format == JSON_FORMAT:
        payload = {
            "manifest": _json_safe(report.get("manifest", {})),
            "rows": _json_safe(rows),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"format: must be csv or json, got {format!r}")


class RunManifest:
    """Provenance for one CLI run: config echo, seed, wall time, outputs."""

    def __init__(self, command: str, config: dict, base_seed: int | None):
        self.command = command
        self.config = config
        self.base_seed = base_seed
        self.outputs: list[str] = []
        self._start = time.monotonic()

    def add_output(self, path: str | Path) -> None:
        self.outputs.append(str(path))

    def as_dict(self) -> dict:
        return {
            "artifact_version": __version__,
            "command": self.command,
            "config": _json_safe(self.config),
            "base_seed": self.base_seed,
            "wall_time_s": round(time.monotonic() - self._start, 3),
            "outputs": list(self.outputs),
        }

    def write(self, path: str | Path) -> None:
        for out in self.outputs:
            if not Path(out).exists():
                raise RuntimeError(f"declared output {out} was not written")
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)
            fh.write("\n")


def _echo_config(args) -> dict:
    skip = {"func"}
    return {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in skip
    }


def _parse_range(text: str) -> np.ndarray:
    """Parse 'start:stop:step' (inclusive stop within half a step) or a list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range: expected start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"range: step must be positive in {text!r}")
        count = int(math.floor((stop - start) / step + 0.5)) + 1
        return start + step * np.arange(max(count, 0))
    return parse_vector(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _matrix_rows(name: str, M: np.ndarray) -> list[dict]:
    return [
        {"name": name, "i": i, "j": j, "value": float(M[i, j])}
        for i in range(M.shape[0])
        for j in range(M.shape[1] if M.ndim > 1 else 1)
    ]


def cmd_sample(args) -> int:
    params, rank, _ = resolve_model(args)
    F = mixture_from_block_model(params, rank)
    manifest = RunManifest("sample", _echo_config(args), args.seed)
    sample = sample_rdpg(F, args.n, args.rho, args.seed)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    adjacency = prefix.with_name(prefix.name + "_adjacency.csv")
    latents = prefix.with_name(prefix.name + "_latents.csv")
    labels = prefix.with_name(prefix.name + "_labels.csv")
    np.savetxt(adjacency, sample.adjacency, fmt="%d", delimiter=",")
    np.savetxt(latents, sample.latents, delimiter=",")
    np.savetxt(labels, sample.labels, fmt="%d", delimiter=",")
    for p in (adjacency, latents, labels):
        manifest.add_output(p)
    manifest.write(prefix.with_name(prefix.name + "_manifest.json"))
    print(f"wrote {adjacency}, {latents}, {labels}")
    return 0


def cmd_embed(args) -> int:
    A = np.loadtxt(args.adjacency, delimiter=",")
    manifest = RunManifest("embed", _echo_config(args), None)
    emb = (
        _embed.ase(A, args.dim) if args.method == _embed.ASE else _embed.lse(A, args.dim)
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out, emb.rows, delimiter=",")
    manifest.add_output(out)
    manifest.write(out.with_suffix(".manifest.json"))
    print(f"wrote {out}")
    return 0


def _experiment_config(args, params, regime, clusterers=None, methods=None) -> _harness.ExperimentConfig:
    return _harness.ExperimentConfig(
        model=params,
        n_values=tuple(int(v) for v in parse_vector(args.n)),
        replicates=args.replicates,
        base_seed=args.seed,
        regime=regime,
        methods=tuple(methods or args.methods.split(",")),
        clusterers=tuple(clusterers if clusterers is not None else ()),
        restarts=getattr(args, "restarts", 10),
        n_jobs=args.jobs,
    )


def cmd_clt_check(args) -> int:
    params, _, regime = resolve_model(args)
    manifest = RunManifest("clt-check", _echo_config(args), args.seed)
    config = _experiment_config(args, params, regime)
    report = _harness.run_clt_check(config)
    rows = []
    for blk in report.blocks:
        d = blk.empirical_cov.shape[0]
        for i in range(d):
            for j in range(d):
                rows.append(
                    {
                        "block": blk.block,
                        "entry_i": i,
                        "entry_j": j,
                        "empirical": float(blk.empirical_cov[i, j]),
                        "theoretical": float(blk.theoretical_cov[i, j]),
                        "rel_err": blk.rel_frobenius_error,
                        "coverage": blk.coverage,
                        "method": blk.method,
                        "n": blk.n,
                    }
                )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(
        {
            "columns": [
                "block", "entry_i", "entry_j", "empirical", "theoretical",
                "rel_err", "coverage", "method", "n",
            ],
            "rows": rows,
            "manifest": manifest.as_dict(),
        },
        out,
        args.format,
    )
    manifest.add_output(out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {out} ({len(rows)} rows, {report.failures} failed replicates)")
    return 0


def cmd_frobenius_check(args) -> int:
    params, _, regime = resolve_model(args)
    manifest = RunManifest("frobenius-check", _echo_config(args), args.seed)
    config = _experiment_config(args, params, regime)
    rows = [dataclasses.asdict(r) for r in _harness.run_frobenius_check(config)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(
        {
            "columns": ["n", "method", "empirical", "theoretical", "ratio", "stderr", "replicates"],
            "rows": rows,
            "manifest": manifest.as_dict(),
        },
        out,
        args.format,
    )
    manifest.add_output(out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def cmd_cluster_experiment(args) -> int:
    params, _, regime = resolve_model(args)
    manifest = RunManifest("cluster-experiment", _echo_config(args), args.seed)
    config = _experiment_config(args, params, regime, clusterers=args.clusterers.split(","))
    rows = [dataclasses.asdict(r) for r in _harness.run_clustering_experiment(config)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(
        {
            "columns": ["n", "method", "clusterer", "mean_error", "stderr", "replicates"],
            "rows": rows,
            "manifest": manifest.as_dict(),
        },
        out,
        args.format,
    )
    manifest.add_output(out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def cmd_chernoff(args) -> int:
    g0 = _limits.GaussianParams(mean=parse_vector(args.mean0), cov=parse_matrix(args.cov0))
    g1 = _limits.GaussianParams(mean=parse_vector(args.mean1), cov=parse_matrix(args.cov1))
    result = _chernoff.gaussian_chernoff_information(g0, g1)
    if result.infinite:
        print("value inf")
        print("t_star nan")
    else:
        print(f"value {result.value}")
        print(f"t_star {result.t_star}")
    return 0


def cmd_ratio_grid(args) -> int:
    manifest = RunManifest("ratio-grid", _echo_config(args), None)
    pi = parse_vector(args.pi)
    cells = _chernoff.rho_ratio_grid(
        _parse_range(args.p), _parse_range(args.r), pi, args.n, model=args.grid_model
    )
    rows = [dataclasses.asdict(c) for c in cells]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(
        {
            "columns": ["p", "r", "rho_a", "rho_l", "ratio", "status"],
            "rows": rows,
            "manifest": manifest.as_dict(),
        },
        out,
        args.format,
    )
    manifest.add_output(out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {out} ({len(rows)} cells)")
    return 0


def cmd_section43(args) -> int:
    manifest = RunManifest("section43", _echo_config(args), args.seed)
    report = _harness.run_section43_replication(
        args.which,
        replicates=args.replicates,
        base_seed=args.seed,
        n_jobs=args.jobs,
        restarts=args.restarts,
    )
    rows = [dataclasses.asdict(report)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(
        {
            "columns": list(rows[0].keys()),
            "rows": rows,
            "manifest": manifest.as_dict(),
        },
        out,
        args.format,
    )
    manifest.add_output(out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(
        f"{report.which}: GMM*ASE {report.gmm_ase_error:.4f} (+-{report.gmm_ase_stderr:.4f}) "
        f"GMM*LSE {report.gmm_lse_error:.4f} (+-{report.gmm_lse_stderr:.4f}) "
        f"rho_a/rho_l {report.rho_ratio:.4f}"
    )
    return 0


def cmd_limits(args) -> int:
    params, rank, regime = resolve_model(args)
    F = mixture_from_block_model(params, rank)
    gauss_ase = _limits.sbm_block_gaussians(F, "ase", regime, args.n)
    gauss_lse = _limits.sbm_block_gaussians(F, "lse", regime, args.n)
    np.set_printoptions(precision=8, suppress=False)
    print(f"atoms (rows):\n{F.atoms}")
    for k in range(F.n_atoms):
        print(f"block {k + 1}:")
        print(f"  ase mean: {gauss_ase[k].mean}")
        print(f"  ase cov * n:\n{gauss_ase[k].cov * args.n}")
        print(f"  lse mean (centroid at n={args.n}): {gauss_lse[k].mean}")
        print(f"  lse cov * n^2:\n{gauss_lse[k].cov * args.n ** 2}")
    if args.out:
        rows = []
        for k in range(F.n_atoms):
            rows.append(
                {
                    "block": k + 1,
                    "ase_mean": gauss_ase[k].mean,
                    "ase_cov_scaled": gauss_ase[k].cov * args.n,
                    "lse_mean": gauss_lse[k].mean,
                    "lse_cov_scaled": gauss_lse[k].cov * args.n**2,
                }
            )
        manifest = RunManifest("limits", _echo_config(args), None)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_results(
            {"columns": list(rows[0].keys()), "rows": rows, "manifest": manifest.as_dict()},
            out,
            JSON_FORMAT,
        )
        manifest.add_output(out)
        manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
        print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--model", help="model config file (keys B, pi, d, regime)")
    p.add_argument("--B", help="block matrix, rows separated by ';'")
    p.add_argument("--pi", help="block weights, e.g. '0.6,0.4'")
    p.add_argument("--d", type=int, help="embedding rank (defaults to rank of B)")
    p.add_argument("--regime", choices=[_limits.DENSE, _limits.VANISHING])


def _add_run_flags(p: argparse.ArgumentParser, default_out: str):
    p.add_argument("--seed", type=int, required=True, help="base seed (required)")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--n", required=True, help="graph sizes, e.g. '1000' or '1000,2000'")
    p.add_argument("--methods", default="ase,lse")
    p.add_argument("--jobs", type=int, default=1, help="replicate-level worker processes")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out", default=default_out)
    p.add_argument("--format", choices=[CSV_FORMAT, JSON_FORMAT], default=CSV_FORMAT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdpglimits",
        description="Spectral embedding limit theory for random dot product graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample one SBM/RDPG graph")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-prefix", default="sample")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("embed", help="embed an adjacency CSV")
    p.add_argument("--adjacency", required=True)
    p.add_argument("--method", choices=[_embed.ASE, _embed.LSE], required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--out", default="embedding.csv")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("clt-check", help="empirical vs theoretical row covariances")
    _add_model_flags(p)
    _add_run_flags(p, "clt_check.csv")
    p.set_defaults(func=cmd_clt_check)

    p = sub.add_parser("frobenius-check", help="embedding Frobenius error vs limit")
    _add_model_flags(p)
    _add_run_flags(p, "frobenius_check.csv")
    p.set_defaults(func=cmd_frobenius_check)

    p = sub.add_parser("cluster-experiment", help="clustering error rates by method")
    _add_model_flags(p)
    _add_run_flags(p, "cluster_experiment.csv")
    p.add_argument(
        "--clusterers", default="kmeans,gmm,linear_oracle,bayes_oracle"
    )
    p.set_defaults(func=cmd_cluster_experiment)

    p = sub.add_parser("chernoff", help="Chernoff information of two Gaussians")
    p.add_argument("--mean0", required=True)
    p.add_argument("--cov0", required=True)
    p.add_argument("--mean1", required=True)
    p.add_argument("--cov1", required=True)
    p.set_defaults(func=cmd_chernoff)

    p = sub.add_parser("ratio-grid", help="rho_a/rho_l over a (p, r) grid")
    p.add_argument("--grid-model", choices=[_chernoff.TWO_BLOCK_PQ, _chernoff.THREE_BLOCK_PQ],
                   default=_chernoff.TWO_BLOCK_PQ)
    p.add_argument("--pi", required=True)
    p.add_argument("--p", required=True, help="grid, 'start:stop:step' or list")
    p.add_argument("--r", required=True, help="grid, 'start:stop:step' or list")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", default="ratio_grid.csv")
    p.add_argument("--format", choices=[CSV_FORMAT, JSON_FORMAT], default=CSV_FORMAT)
    p.set_defaults(func=cmd_ratio_grid)

    p = sub.add_parser("section43", help="built-in clustering comparisons")
    p.add_argument(
        "--which",
        choices=sorted(_harness.REPLICATION_PRESETS),
        required=True,
    )
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out", default="section43.csv")
    p.add_argument("--format", choices=[CSV_FORMAT, JSON_FORMAT], default=CSV_FORMAT)
    p.set_defaults(func=cmd_section43)

    p = sub.add_parser("limits", help="print block-conditional limit Gaussians")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="optional JSON output path")
    p.set_defaults(func=cmd_limits)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (RdpgError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
