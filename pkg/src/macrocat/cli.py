"""Command-line front end.

Subcommands::

    macrocat analytic        --out DIR [--config experiment.json]
    macrocat simulate-counts --out DIR [--config experiment.json] [--seed N]
    macrocat tomography      --out DIR [--config experiment.json] [--seed N]
    macrocat wigner          --out DIR --config state.json
    macrocat roundtrip-check --out DIR [--config roundtrip.json]

Every run writes a ``manifest.json`` recording the command, the fully
resolved configuration and the package version; re-running the command
with the manifest's config regenerates the output directory byte for
byte (no timestamps or machine state enter any output file).

Exit codes: 0 success, 1 configuration error, 2 numerical error, 3 I/O
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, counting, fock, pipeline, sampling, tomography
from .errors import ConfigError, NumericError

log = logging.getLogger("macrocat")


class _Parser(argparse.ArgumentParser):
    # argparse would sys.exit(2) on unknown flags; route through the
    # config-error path so the documented exit taxonomy holds
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="macrocat", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("analytic", "write the analytic conditional curves and summary"),
        ("simulate-counts", "Monte Carlo counting run with binned statistics"),
        ("tomography", "simulate homodyne records and reconstruct the state"),
        ("wigner", "tabulate the Wigner function of a displaced superposition"),
        ("roundtrip-check", "displacement/undisplacement locality check"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, default=None, help="JSON config path")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def _load_json(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _experiment_config(args) -> pipeline.ExperimentConfig:
    doc = _load_json(args.config)
    try:
        config = pipeline.ExperimentConfig.from_json_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.seed is not None:
        config = config.replace_seed(args.seed)
    return config


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(outdir: Path, command: str, config_doc: dict, outputs: list[str]) -> None:
    _write_json(
        outdir / "manifest.json",
        {
            "command": command,
            "config": config_doc,
            "package": "macrocat",
            "version": __version__,
            "outputs": sorted(outputs),
        },
    )


def _curve_centers(config: pipeline.ExperimentConfig, n_bins: int = 41) -> np.ndarray:
    sig = counting.count_marginal_std(config.count_params(phi=0.0))
    edges = np.linspace(-4.0 * sig, 4.0 * sig, n_bins + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def cmd_analytic(args) -> list[str]:
    config = _experiment_config(args)
    centers = _curve_centers(config)
    outdir = args.out
    counting.write_conditional_curves(
        outdir / "curves_phi0.csv", centers, config.count_params(phi=0.0)
    )
    counting.write_conditional_curves(
        outdir / "curves_phi90.csv", centers, config.count_params(phi=math.pi / 2.0)
    )
    delta_a = pipeline.default_delta_a(config.alpha)
    summary = {
        "variance_ratio": counting.variance_peak_ratio(config.eta_total),
        "discrimination_error": counting.distinguishability_error(
            config.count_params(phi=0.0), delta_a
        ),
        "concurrence": config.model_concurrence(),
    }
    _write_json(outdir / "summary.json", summary)
    outputs = ["curves_phi0.csv", "curves_phi90.csv", "summary.json"]
    _write_manifest(outdir, "analytic", config.to_json_dict(), outputs)
    return outputs


def cmd_simulate_counts(args) -> list[str]:
    config = _experiment_config(args)
    log.info(
        "sampling %d count shots per setting at alpha=%g", config.n_count_shots, config.alpha
    )
    result = pipeline.run_counts_scenario(config)
    outputs = pipeline.write_count_outputs(args.out, result, config)
    log.info(
        "variance ratio %.4f, discrimination error %.4f",
        result.variance_ratio,
        result.discrimination_error,
    )
    _write_manifest(args.out, "simulate-counts", config.to_json_dict(), outputs)
    return outputs


def cmd_tomography(args) -> list[str]:
    config = _experiment_config(args)
    log.info("sampling %d quadrature records", config.n_quad_shots)
    scenario = pipeline.run_tomography_scenario(config)
    sampling.write_quadrature_csv(args.out / "records.csv", scenario.records)
    result_doc = scenario.result.to_json_dict()
    result_doc["fidelity_to_model"] = scenario.fidelity_to_model
    _write_json(args.out / "result.json", result_doc)
    delta_a = pipeline.default_delta_a(config.alpha)
    summary = {
        "variance_ratio": counting.variance_peak_ratio(config.eta_total),
        "discrimination_error": counting.distinguishability_error(
            config.count_params(phi=0.0), delta_a
        ),
        "concurrence": scenario.result.concurrence,
    }
    _write_json(args.out / "summary.json", summary)
    log.info(
        "reconstruction: %d iterations, concurrence %.4f, fidelity to model %.4f",
        scenario.result.iterations,
        scenario.result.concurrence,
        scenario.fidelity_to_model,
    )
    outputs = ["records.csv", "result.json", "summary.json"]
    _write_manifest(args.out, "tomography", config.to_json_dict(), outputs)
    return outputs


def _coeff(value) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"coefficient must be a number or [re, im] pair, got {value!r}")


def cmd_wigner(args) -> list[str]:
    """Config: {"alpha", "c0", "c1", "dim", "grid": {"min", "max", "step"}}.

    The tabulated state is ``c0 D(alpha)|0> + c1 D(alpha)|1>``, normalized.
    """
    doc = _load_json(args.config)
    known = {"alpha", "c0", "c1", "dim", "grid"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown state fields: {sorted(unknown)}")
    alpha = float(doc.get("alpha", 0.0))
    c0 = _coeff(doc.get("c0", 1.0))
    c1 = _coeff(doc.get("c1", 0.0))
    dim = int(doc.get("dim", 16))
    grid_doc = doc.get("grid", {})
    lo = float(grid_doc.get("min", -6.0))
    hi = float(grid_doc.get("max", 6.0))
    step = float(grid_doc.get("step", 0.1))
    if hi <= lo or step <= 0:
        raise ConfigError("grid must satisfy min < max and step > 0")
    if c0 == 0 and c1 == 0:
        raise ConfigError("c0 and c1 cannot both vanish")
    disp = fock.displacement_matrix(alpha, dim)
    vec = c0 * disp[:, 0] + c1 * disp[:, 1]
    rho = fock.DensityMatrix.from_pure(vec, dim, 1)
    axis = np.arange(lo, hi + step / 2.0, step)
    grid_w = fock.wigner(rho, axis, axis)
    with open(args.out / "wigner.csv", "w", newline="") as fh:
        fh.write("x,p,w\n")
        for i, x in enumerate(axis):
            for j, p in enumerate(axis):
                fh.write(f"{x:.17g},{p:.17g},{grid_w[i, j]:.17g}\n")
    resolved = {
        "alpha": alpha,
        "c0": [c0.real, c0.imag],
        "c1": [c1.real, c1.imag],
        "dim": dim,
        "grid": {"min": lo, "max": hi, "step": step},
    }
    _write_manifest(args.out, "wigner", resolved, ["wigner.csv"])
    return ["wigner.csv"]


def cmd_roundtrip_check(args) -> list[str]:
    """Config: {"alpha_small", "mismatch_etas", "dim", "phi"}; all optional."""
    doc = _load_json(args.config)
    known = {"alpha_small", "mismatch_etas", "dim", "phi"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown roundtrip-spec fields: {sorted(unknown)}")
    alpha_small = float(doc.get("alpha_small", 2.0))
    etas = [float(v) for v in doc.get("mismatch_etas", [1.0, 0.99, 0.95])]
    dim = int(doc.get("dim", 32))
    phi = float(doc.get("phi", 0.0))
    rows = []
    try:
        for eta in etas:
            res = pipeline.displacement_roundtrip_check(alpha_small, eta, dim=dim, phi=phi)
            rows.append(
                {
                    "mismatch_eta": res.mismatch_eta,
                    "fidelity_to_loss_model": res.fidelity_to_loss_model,
                    "concurrence_roundtrip": res.concurrence_roundtrip,
                    "concurrence_initial": res.concurrence_initial,
                }
            )
    except ValueError as exc:
        raise NumericError(str(exc)) from exc
    monotone = all(
        rows[i]["concurrence_roundtrip"] >= rows[i + 1]["concurrence_roundtrip"] - 1e-6
        for i in range(len(rows) - 1)
    ) if sorted(etas, reverse=True) == etas else None
    _write_json(
        args.out / "roundtrip.json",
        {
            "alpha_small": alpha_small,
            "dim": dim,
            "phi": phi,
            "results": rows,
            "concurrence_monotone": monotone,
        },
    )
    resolved = {"alpha_small": alpha_small, "mismatch_etas": etas, "dim": dim, "phi": phi}
    _write_manifest(args.out, "roundtrip-check", resolved, ["roundtrip.json"])
    return ["roundtrip.json"]


_COMMANDS = {
    "analytic": cmd_analytic,
    "simulate-counts": cmd_simulate_counts,
    "tomography": cmd_tomography,
    "wigner": cmd_wigner,
    "roundtrip-check": cmd_roundtrip_check,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        print(f"wrote {', '.join(outputs)} to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
