"""Command-line front end.

    smilewa convert|check|calibrate|svi --input F [--output F] [--maturity T]
            [--grid-n N] [--format csv|json] [--seed S] [--probe-eps E]
            [--family NAME] [--wa-strict]

Inputs are parameter JSON files (``{"family": ...}``, ``{"svi": {...}}`` or
``{"ssvi": {...}}``) or pillar CSV files with a ``k,sigma`` or
``delta,sigma`` header. Grids are written as ``delta,k,sigma_total``.
Failures print ``code=NAME message`` on stderr and exit with a distinct code.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bs_core import norm_cdf, norm_ppf
from .calibration import FIT_FAMILIES, FitConfig, LInterpConfig, PillarSet, calibrate_l_interp, calibrate_wa_fit
from .delta_map import DeltaSmile, KGrid, check_sigma_wa, to_strike
from .diagnostics import atm_expansion, durrleman_check, fukasawa_check, wing_report
from .errors import (
    ConstraintViolation,
    ConvergenceError,
    DataError,
    DomainError,
    InputFormatError,
    MembershipError,
    OptimizationFailure,
    QuadratureError,
    SingularExpansion,
    SmileError,
    ValidationError,
)
from .svi import SsviParams, SviParams, ssvi_tilde, svi_strike_smile, svi_tilde_k, svi_to_delta, wing_slopes
from .wa_param import QuadratureSpec, WAParams, from_dict, validate

log = logging.getLogger("smilewa")

EXIT_OK = 0
EXIT_MEMBERSHIP = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_CONSTRAINT = 5
EXIT_OPTIMIZATION = 6
EXIT_DATA = 7
EXIT_NUMERICAL = 8
EXIT_USAGE = 64

# most specific first
_ERROR_CODES: list[tuple[type, int, str]] = [
    (InputFormatError, EXIT_IO, "IO"),
    (MembershipError, EXIT_MEMBERSHIP, "MEMBERSHIP"),
    (ValidationError, EXIT_VALIDATION, "VALIDATION"),
    (ConstraintViolation, EXIT_CONSTRAINT, "CONSTRAINT"),
    (OptimizationFailure, EXIT_OPTIMIZATION, "OPTIMIZATION"),
    (DataError, EXIT_DATA, "DATA"),
    (ConvergenceError, EXIT_NUMERICAL, "NUMERICAL"),
    (QuadratureError, EXIT_NUMERICAL, "NUMERICAL"),
    (SingularExpansion, EXIT_NUMERICAL, "NUMERICAL"),
    (DomainError, EXIT_NUMERICAL, "NUMERICAL"),
    (SmileError, EXIT_NUMERICAL, "NUMERICAL"),
    (OSError, EXIT_IO, "IO"),
]


@dataclass(frozen=True)
class CliConfig:
    command: str
    input_path: Path
    output_path: Path | None
    maturity: float = 1.0
    grid_n: int = 401
    format: str = "csv"
    probe_eps: float = 1e-6
    seed: int = 0
    family: str = "l_interp"
    wa_strict: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors get their own exit code
        self.print_usage(sys.stderr)
        sys.stderr.write(f"code=USAGE {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smilewa", description="Delta-space volatility smile toolkit.")
    p.add_argument("--version", action="version", version=f"smilewa {__version__}")
    p.add_argument("command", choices=["convert", "check", "calibrate", "svi"])
    p.add_argument("--input", "-i", required=True, type=Path, help="parameter JSON or pillar CSV")
    p.add_argument("--output", "-o", type=Path, default=None, help="output file (stdout if omitted)")
    p.add_argument("--maturity", "-T", type=float, default=1.0, help="maturity in years (pillar CSV)")
    p.add_argument("--grid-n", type=int, default=401, help="number of grid rows")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probe-eps", type=float, default=1e-6, help="wing probe distance in delta")
    p.add_argument("--family", default="l_interp",
                   choices=["l_interp", *sorted(FIT_FAMILIES)], help="calibration method")
    p.add_argument("--wa-strict", action="store_true",
                   help="enforce weak-arbitrage bullets (l_interp) or bounded alpha limit (check)")
    return p


def parse_config(argv=None) -> CliConfig:
    ns = build_parser().parse_args(argv)
    if ns.grid_n < 3:
        build_parser().error("--grid-n must be at least 3")
    if not (ns.maturity > 0 and math.isfinite(ns.maturity)):
        build_parser().error("--maturity must be positive")
    if not 0 < ns.probe_eps < 0.5:
        build_parser().error("--probe-eps must lie in (0, 1/2)")
    return CliConfig(
        command=ns.command, input_path=ns.input, output_path=ns.output, maturity=ns.maturity,
        grid_n=ns.grid_n, format=ns.format, probe_eps=ns.probe_eps, seed=ns.seed,
        family=ns.family, wa_strict=ns.wa_strict,
    )


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise InputFormatError("top-level JSON value must be an object", line=1)
    return data


def _svi_from(data: dict):
    try:
        if "svi" in data:
            d = data["svi"]
            return SviParams(float(d["a"]), float(d["b"]), float(d["rho"]), float(d["m"]), float(d["sigma_bar"]))
        d = data["ssvi"]
        return SsviParams(float(d["theta"]), float(d["phi"]), float(d["rho"]))
    except KeyError as exc:
        raise ValidationError(f"missing SVI parameter {exc.args[0]!r}") from None
    except DomainError as exc:
        raise ValidationError(str(exc)) from None


def load_input(cfg: CliConfig):
    """Return ``(kind, obj)`` with kind in {"wa", "svi", "pillars"}."""
    path = cfg.input_path
    if path.suffix.lower() == ".csv":
        return "pillars", PillarSet.from_csv(path, cfg.maturity)
    data = _read_json(path)
    if "svi" in data or "ssvi" in data:
        return "svi", _svi_from(data)
    if "family" in data:
        return "wa", from_dict(data)
    raise InputFormatError("JSON must contain 'family', 'svi' or 'ssvi'", line=1)


def delta_grid(n: int, lo: float = 1e-4, hi: float = 1 - 1e-4) -> np.ndarray:
    return np.linspace(lo, hi, n)


def grid_rows(smile: DeltaSmile, n: int) -> np.ndarray:
    d = delta_grid(n)
    s = np.asarray(smile(d), dtype=float)
    u = np.asarray(norm_ppf(d))
    k = -(u - 0.5 * s) * s
    return np.column_stack([d, k, s])


def format_grid(rows: np.ndarray, fmt: str) -> str:
    if fmt == "json":
        return _dump_json({"columns": ["delta", "k", "sigma_total"], "rows": rows.tolist()})
    lines = ["delta,k,sigma_total"]
    lines += [f"{d!r},{k!r},{s!r}" for d, k, s in rows.tolist()]
    return "\n".join(lines) + "\n"


def _smile_for(kind: str, obj, cfg: CliConfig) -> DeltaSmile:
    if kind == "wa":
        return obj.smile()
    if kind == "svi":
        return svi_to_delta(obj)
    return calibrate_l_interp(obj, LInterpConfig(wa_strict=cfg.wa_strict)).smile


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_convert(cfg: CliConfig) -> int:
    kind, obj = load_input(cfg)
    smile = _smile_for(kind, obj, cfg)
    _write(format_grid(grid_rows(smile, cfg.grid_n), cfg.format), cfg.output_path)
    return EXIT_OK


def cmd_check(cfg: CliConfig) -> int:
    kind, obj = load_input(cfg)
    report: dict = {"input_kind": kind, "probe_eps": cfg.probe_eps}
    ok = True
    strike = None
    delta_smile = None
    if kind == "svi":
        strike = svi_strike_smile(obj)
        try:
            k_t = svi_tilde_k(obj) if isinstance(obj, SviParams) else ssvi_tilde(obj)[0]
            report["tilde_k"] = k_t
            report["tilde_delta"] = float(norm_cdf(math.sqrt(-2 * k_t)))
        except DomainError as exc:
            report["tilde_k"] = report["tilde_delta"] = None
            report["switch_point_error"] = str(exc)
            ok = False
        try:
            delta_smile = svi_to_delta(obj)
            report["membership"] = check_sigma_wa(delta_smile).to_dict()
        except MembershipError as exc:
            report["membership"] = exc.report.to_dict() if exc.report else {"passed": False}
            ok = False
    else:
        if kind == "wa":
            vrep = validate(obj, strict=cfg.wa_strict)
            report["validation"] = vrep.to_dict()
            ok = ok and vrep.passed
        delta_smile = _smile_for(kind, obj, cfg)
        mrep = check_sigma_wa(delta_smile)
        report["membership"] = mrep.to_dict()
        report["tilde_delta"] = mrep.tilde_delta
        ok = ok and mrep.passed
        if mrep.checks.get("l_increasing") and mrep.checks["l_divergence"].get("lower_ok") \
                and mrep.checks["l_divergence"].get("upper_ok"):
            strike = to_strike(delta_smile, check=False)

    if strike is not None:
        fk = fukasawa_check(strike)
        report["fukasawa"] = fk.to_dict()
        ok = ok and fk.passed
        report["durrleman"] = durrleman_check(strike, KGrid(n=1001)).to_dict()
        try:
            report["atm_expansion"] = atm_expansion(strike).to_dict()
        except (SingularExpansion, DomainError) as exc:
            report["atm_expansion"] = {"error": str(exc)}
    if delta_smile is not None:
        right, left = wing_report(delta_smile, cfg.probe_eps)
        report["wings"] = {"right": right.to_dict(), "left": left.to_dict()}
    report["passed"] = ok
    _write(_dump_json(report), cfg.output_path)
    return EXIT_OK if ok else EXIT_MEMBERSHIP


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".report.json")


def cmd_calibrate(cfg: CliConfig) -> int:
    kind, obj = load_input(cfg)
    if kind != "pillars":
        raise InputFormatError("calibrate expects a pillar CSV file")
    if cfg.family == "l_interp":
        res = calibrate_l_interp(obj, LInterpConfig(wa_strict=cfg.wa_strict))
    else:
        res = calibrate_wa_fit(obj, cfg.family, FitConfig(seed=cfg.seed))
    rows = grid_rows(res.smile, cfg.grid_n)
    report = res.to_dict()
    report.update({"family": cfg.family, "maturity": cfg.maturity, "seed": cfg.seed,
                   "pillars": {"delta": list(res.pillars.x), "sigma": list(res.pillars.sigma)}})
    if cfg.format == "json":
        _write(_dump_json({"grid": {"columns": ["delta", "k", "sigma_total"], "rows": rows.tolist()},
                           "report": report}), cfg.output_path)
    else:
        _write(format_grid(rows, "csv"), cfg.output_path)
        if cfg.output_path is not None:
            _write(_dump_json(report), _sidecar(cfg.output_path))
        else:
            sys.stderr.write(_dump_json(report))
    return EXIT_OK


def cmd_svi(cfg: CliConfig) -> int:
    kind, obj = load_input(cfg)
    if kind != "svi":
        raise InputFormatError("svi expects a JSON file with an 'svi' or 'ssvi' object")
    if isinstance(obj, SsviParams):
        k_t, d_t = ssvi_tilde(obj)
        model = "ssvi"
    else:
        k_t = svi_tilde_k(obj)
        d_t = float(norm_cdf(math.sqrt(-2 * k_t)))
        model = "svi"
    out = {"model": model, "tilde_k": k_t, "tilde_delta": d_t, "wing_slopes": wing_slopes(obj)}
    _write(_dump_json(out), cfg.output_path)
    return EXIT_OK


COMMANDS = {"convert": cmd_convert, "check": cmd_check, "calibrate": cmd_calibrate, "svi": cmd_svi}


def _configure_logging():
    level = os.environ.get("SMILEWA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    cfg = parse_config(argv)
    try:
        return COMMANDS[cfg.command](cfg)
    except Exception as exc:  # mapped to exit codes below
        for cls, code, name in _ERROR_CODES:
            if isinstance(exc, cls):
                sys.stderr.write(f"code={name} {exc}\n")
                log.debug("failure", exc_info=True)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
