"""Command-line sweeps over the protocol's figures of merit.

Subcommands: fringe, visibility, sensitivity, fisher-ratio, loss-bound and
validate.  Tables are written as CSV (header row, `#`-prefixed metadata
lines, 12 significant digits) or JSON ({"meta": ..., "rows": [...]}).
Identical configuration produces byte-identical output.

Exit codes: 0 success, 1 validation-invariant failure, 2 configuration
error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, analytic, estimation, fock, qfi
from .optimize import golden_section_minimize
from .params import LossPlacement, LossSpec, ProtocolParams
from .validate import run_validation

_DEFAULTS = {
    "fringe": {"n_range": None, "n": 20.0, "phi_range": (-math.pi / 2, math.pi / 2, 501)},
    "visibility": {"n_range": (5.0, 80.0, 5.0), "n": None, "phi_range": None},
    "sensitivity": {"n_range": (1.0, 50.0, 1.0), "n": None, "phi_range": None},
    "fisher-ratio": {"n_range": (1.0, 100.0, 1.0), "n": None, "phi_range": None},
    "loss-bound": {"n_range": (1.0, 100.0, 1.0), "n": None, "phi_range": None},
}
_ORACLE_COMMANDS = {"fringe", "visibility", "sensitivity"}
_LOSS_COMMANDS = {"fringe", "sensitivity"}
_MAX_LOSSY_ORACLE_POINTS = 512

_CONFIG_KEYS = {
    "n",
    "n_range",
    "phi_range",
    "theta",
    "loss_T",
    "loss_placement",
    "with_oracle",
    "format",
    "out",
    "n_max",
}


class ConfigError(Exception):
    pass


@dataclass
class SweepConfig:
    command: str
    n_values: np.ndarray
    phi_values: np.ndarray | None
    theta: float
    loss: LossSpec
    with_oracle: bool
    fmt: str
    out: str | None
    n_max: int | None


# --------------------------------------------------------------------------
# argument parsing and config resolution


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrmzi",
        description="Sweeps and validation for nonlinear-phase interferometry with homodyne readout.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fringe", "mean-quadrature fringe against the nonlinear phase"),
        ("visibility", "fringe visibility against the mean photon number"),
        ("sensitivity", "optimized phase sensitivity with reference limits"),
        ("fisher-ratio", "available information fraction against the photon number"),
        ("loss-bound", "allowable maximum loss against the photon number"),
        ("validate", "run the oracle cross-validation report"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--n", type=float, default=None, help="single mean photon number")
        p.add_argument("--n-range", default=None, metavar="A:B:STEP", help="inclusive photon-number grid")
        p.add_argument(
            "--phi-range", default=None, metavar="A:B:POINTS", help="nonlinear-phase grid (fringe only)"
        )
        p.add_argument("--theta", type=float, default=None, help="linear phase, radians (default pi/2)")
        p.add_argument("--loss-T", type=float, default=None, dest="loss_T", help="loss transmissivity")
        p.add_argument(
            "--loss-placement",
            default=None,
            choices=["before", "after", "none"],
            help="loss channel position relative to the nonlinear phase",
        )
        p.add_argument(
            "--with-oracle",
            action="store_true",
            default=None,
            help="add Fock-simulation columns next to every analytic column (slow for large N)",
        )
        p.add_argument("--format", default=None, choices=["csv", "json"], help="output format (default csv)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--n-max", type=int, default=None, dest="n_max", help="truncation override for the oracle")
        p.add_argument("--config", default=None, help="JSON config file; CLI flags take precedence")
    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config file {path}: unknown field(s) {sorted(unknown)}")
    return data


def _parse_step_range(text: str, field: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{field} must look like A:B:STEP, got {text!r}")
    try:
        a, b, step = (float(x) for x in parts)
    except ValueError as exc:
        raise ConfigError(f"{field}: non-numeric component in {text!r}") from exc
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(step)) or step <= 0 or b < a:
        raise ConfigError(f"{field}: need finite A <= B and STEP > 0, got {text!r}")
    values = np.arange(a, b + 0.5 * step, step)
    if values.size == 0:
        raise ConfigError(f"{field}: empty grid from {text!r}")
    return values


def _parse_point_range(text: str, field: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{field} must look like A:B:POINTS, got {text!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
        points = int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"{field}: non-numeric component in {text!r}") from exc
    if not (math.isfinite(a) and math.isfinite(b)) or b < a or points < 1:
        raise ConfigError(f"{field}: need finite A <= B and POINTS >= 1, got {text!r}")
    return np.linspace(a, b, points)


def _pick(args_value, file_config: dict, key: str, default):
    if args_value is not None:
        return args_value
    if key in file_config:
        return file_config[key]
    return default


def _resolve_config(args: argparse.Namespace) -> SweepConfig:
    file_config = _load_config_file(args.config) if args.config else {}
    command = args.command
    defaults = _DEFAULTS.get(command, {"n_range": None, "n": 20.0, "phi_range": None})

    if args.n is not None and args.n_range is not None:
        raise ConfigError("--n and --n-range are mutually exclusive")
    n_single = _pick(args.n, file_config, "n", None)
    n_range = _pick(args.n_range, file_config, "n_range", None)
    if n_single is not None and args.n is None and args.n_range is not None:
        n_single = None  # CLI range wins over a config-file scalar
    if n_range is not None and n_single is None:
        if isinstance(n_range, str):
            n_values = _parse_step_range(n_range, "--n-range")
        else:
            raise ConfigError("n_range in the config file must be a string A:B:STEP")
    elif n_single is not None:
        n_values = np.array([float(n_single)])
    elif defaults["n_range"] is not None:
        a, b, step = defaults["n_range"]
        n_values = np.arange(a, b + 0.5 * step, step)
    else:
        n_values = np.array([defaults["n"]])
    if np.any(~np.isfinite(n_values)) or np.any(np.diff(n_values) <= 0) and n_values.size > 1:
        raise ConfigError("photon-number grid must be finite and strictly increasing")

    phi_spec = _pick(args.phi_range, file_config, "phi_range", None)
    if phi_spec is not None and command != "fringe":
        raise ConfigError(f"--phi-range applies to the fringe command, not {command}")
    if command == "fringe":
        if phi_spec is None:
            a, b, points = defaults["phi_range"]
            phi_values = np.linspace(a, b, points)
        elif isinstance(phi_spec, str):
            phi_values = _parse_point_range(phi_spec, "--phi-range")
        else:
            raise ConfigError("phi_range in the config file must be a string A:B:POINTS")
    else:
        phi_values = None

    theta = float(_pick(args.theta, file_config, "theta", math.pi / 2))
    if not math.isfinite(theta):
        raise ConfigError(f"theta must be finite, got {theta}")

    loss_t = _pick(args.loss_T, file_config, "loss_T", None)
    placement_name = _pick(args.loss_placement, file_config, "loss_placement", None)
    if (loss_t is not None or placement_name not in (None, "none")) and command not in _LOSS_COMMANDS:
        raise ConfigError(f"loss flags are not supported by the {command} command")
    if placement_name in (None, "none"):
        loss = LossSpec.none()
        if loss_t is not None and placement_name is None:
            raise ConfigError("--loss-T needs --loss-placement before|after")
    else:
        if loss_t is None:
            raise ConfigError("--loss-placement needs --loss-T")
        try:
            loss = LossSpec(float(loss_t), LossPlacement(placement_name))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    with_oracle = bool(_pick(args.with_oracle, file_config, "with_oracle", False))
    if with_oracle and command not in _ORACLE_COMMANDS and command != "validate":
        raise ConfigError(f"--with-oracle is not available for the {command} command (pure closed form)")

    fmt = _pick(args.format, file_config, "format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    out = _pick(args.out, file_config, "out", None)
    n_max = _pick(args.n_max, file_config, "n_max", None)
    if n_max is not None:
        n_max = int(n_max)
        if n_max < 1:
            raise ConfigError(f"--n-max must be >= 1, got {n_max}")

    return SweepConfig(
        command=command,
        n_values=np.asarray(n_values, dtype=float),
        phi_values=phi_values,
        theta=theta,
        loss=loss,
        with_oracle=with_oracle,
        fmt=fmt,
        out=out,
        n_max=n_max,
    )


# --------------------------------------------------------------------------
# rendering


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _base_meta(config: SweepConfig) -> dict[str, str]:
    meta = {
        "command": config.command,
        "version": __version__,
        "theta": _fmt(config.theta),
        "n_values": ",".join(_fmt(v) for v in config.n_values),
    }
    if config.loss.is_active:
        meta["loss_T"] = _fmt(config.loss.transmissivity)
        meta["loss_placement"] = config.loss.placement.value
    if config.with_oracle:
        truncations = sorted({config.n_max or fock.default_n_max(n) for n in config.n_values})
        meta["truncation_n_max"] = ",".join(str(t) for t in truncations)
    return meta


def _render_csv(meta: dict[str, str], header: list[str], rows: list[list[float]]) -> str:
    lines = [f"# {key}: {value}" for key, value in meta.items()]
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _render_json(meta: dict[str, str], header: list[str], rows: list[list[float]]) -> str:
    payload = {
        "meta": meta,
        "rows": [dict(zip(header, (float(_fmt(v)) for v in row))) for row in rows],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _emit(config: SweepConfig, meta: dict[str, str], header: list[str], rows: list[list[float]]) -> None:
    text = _render_csv(meta, header, rows) if config.fmt == "csv" else _render_json(meta, header, rows)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# table builders


def _lossy_mean(config: SweepConfig, n: float, phi: float) -> float:
    params = ProtocolParams(n, config.theta, phi)
    return analytic.moments_with_loss(params, config.loss).mean


def _build_fringe(config: SweepConfig) -> tuple[dict, list[str], list[list[float]]]:
    phis = config.phi_values
    header = ["n", "phi", "raw_mean", "normalized_mean"]
    oracle = config.with_oracle
    if oracle:
        header += ["oracle_raw_mean", "oracle_normalized_mean", "dev_raw_mean", "dev_normalized_mean"]
    lossy = config.loss.is_active
    if oracle and lossy and phis.size * config.n_values.size > _MAX_LOSSY_ORACLE_POINTS:
        raise ConfigError(
            "oracle fringe with loss runs one open-system simulation per row; "
            f"keep the grid at or below {_MAX_LOSSY_ORACLE_POINTS} points"
        )
    rows: list[list[float]] = []
    max_dev = 0.0
    for n in config.n_values:
        sqrt_n = math.sqrt(n)
        if lossy:
            raw = np.array([_lossy_mean(config, n, p) for p in phis])
        else:
            raw = np.asarray(analytic.mean_x_value(n, phis, config.theta))
        if oracle:
            if lossy:
                o_raw = np.array(
                    [
                        fock.end_to_end_moments(
                            ProtocolParams(n, config.theta, p), config.loss, n_max=config.n_max
                        ).mean
                        for p in phis
                    ]
                )
            else:
                o_raw = fock.x_moment_grid(n, phis, [config.theta], n_max=config.n_max)[0][:, 0]
        for i, phi in enumerate(phis):
            row = [n, phi, raw[i], raw[i] / sqrt_n]
            if oracle:
                dev = abs(raw[i] - o_raw[i])
                row += [o_raw[i], o_raw[i] / sqrt_n, dev, dev / sqrt_n]
                max_dev = max(max_dev, dev)
            rows.append(row)
    meta = _base_meta(config)
    meta["phi_points"] = str(phis.size)
    if oracle:
        meta["max_abs_dev_raw_mean"] = _fmt(max_dev)
    return meta, header, rows


def _oracle_visibility(n: float, theta: float, n_max: int | None) -> float:
    lo, hi = -math.pi / 2, math.pi / 2
    grid = np.linspace(lo, hi, analytic.VISIBILITY_GRID_POINTS)
    vals = fock.x_moment_grid(n, grid, [theta], n_max=n_max)[0][:, 0]

    def point(phi: float) -> float:
        return fock.end_to_end_moments(ProtocolParams(n, theta, float(phi)), n_max=n_max).mean

    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))
    _, mn = golden_section_minimize(
        point, grid[max(i_min - 1, 0)], grid[min(i_min + 1, grid.size - 1)], tol=analytic.VISIBILITY_TOL
    )
    _, neg_mx = golden_section_minimize(
        lambda p: -point(p), grid[max(i_max - 1, 0)], grid[min(i_max + 1, grid.size - 1)], tol=analytic.VISIBILITY_TOL
    )
    mx = max(-neg_mx, float(vals[i_max]))
    mn = min(mn, float(vals[i_min]))
    denom = abs(mx) + abs(mn)
    return (mx - mn) / denom if denom else 0.0


def _build_visibility(config: SweepConfig) -> tuple[dict, list[str], list[list[float]]]:
    header = ["n", "visibility"]
    if config.with_oracle:
        header += ["oracle_visibility", "dev_visibility"]
    rows = []
    for n in config.n_values:
        if n <= 0:
            raise ConfigError(f"visibility needs N > 0, got {n}")
        v = analytic.visibility(n, config.theta)
        row = [n, v]
        if config.with_oracle:
            ov = _oracle_visibility(n, config.theta, config.n_max)
            row += [ov, abs(v - ov)]
        rows.append(row)
    return _base_meta(config), header, rows


def _build_sensitivity(config: SweepConfig) -> tuple[dict, list[str], list[list[float]]]:
    header = ["n", "delta_phi", "phi_star", "theta_star", "qcrb", "heisenberg"]
    if config.with_oracle:
        header += ["oracle_delta_phi", "dev_delta_phi"]
    rows = []
    for n in config.n_values:
        if n <= 0:
            raise ConfigError(f"sensitivity needs N > 0, got {n}")
        if config.loss.is_active:
            rpt = estimation.lossy_optimum(n, config.loss.transmissivity, config.loss.placement)
        else:
            rpt = estimation.find_optimum(n)
        row = [n, rpt.delta_phi, rpt.phi_star, rpt.theta_star, qfi.qcrb(n), 1.0 / n]
        if config.with_oracle:
            oracle_value = estimation.oracle_sensitivity_at(
                ProtocolParams(n, rpt.theta_star, rpt.phi_star),
                config.loss if config.loss.is_active else None,
                n_max=config.n_max,
            )
            row += [oracle_value, abs(oracle_value - rpt.delta_phi)]
        rows.append(row)
    return _base_meta(config), header, rows


def _build_fisher_ratio(config: SweepConfig) -> tuple[dict, list[str], list[list[float]]]:
    rows = []
    for n in config.n_values:
        if n <= 0:
            raise ConfigError(f"fisher-ratio needs N > 0, got {n}")
        rows.append([n, estimation.fisher_ratio(n)])
    return _base_meta(config), ["n", "fisher_ratio"], rows


def _build_loss_bound(config: SweepConfig) -> tuple[dict, list[str], list[list[float]]]:
    rows = []
    for n in config.n_values:
        if n < 1.0:
            raise ConfigError(f"the loss bound is defined for N >= 1, got {n}")
        rows.append([n, estimation.allowable_max_loss(n)])
    return _base_meta(config), ["n", "allowable_max_loss"], rows


_BUILDERS = {
    "fringe": _build_fringe,
    "visibility": _build_visibility,
    "sensitivity": _build_sensitivity,
    "fisher-ratio": _build_fisher_ratio,
    "loss-bound": _build_loss_bound,
}


def _run_validate(config: SweepConfig) -> int:
    report = run_validation()
    if config.fmt == "json":
        text = report.to_json() + "\n"
    else:
        header = ["kind", "id", "passed", "max_deviation", "tolerance", "note"]
        lines = [f"# command: validate", f"# version: {__version__}", ",".join(header)]
        for c in report.checks:
            lines.append(
                ",".join(
                    ["check", c.check_id, str(int(c.passed)), _fmt(c.max_deviation), _fmt(c.tolerance), ""]
                )
            )
        for f in report.findings:
            note = f.description.replace(",", ";")
            lines.append(",".join(["finding", f.finding_id, "", "", "", note]))
        text = "\n".join(lines) + "\n"
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    return 0 if report.passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        if config.command == "validate":
            return _run_validate(config)
        meta, header, rows = _BUILDERS[config.command](config)
        _emit(config, meta, header, rows)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
