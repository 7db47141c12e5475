"""Command-line driver: single runs and parameter sweeps.

Exit codes: 0 success, 1 usage error, 2 runtime/statistics error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (
    AnalysisError,
    SHANNON_QBER_LIMIT,
    SweepRecord,
    SweepResult,
    run_sweep,
)
from .analytic import (
    Phase,
    PhysicalParams,
    ProtocolAngles,
    chsh_cr,
    p_corr,
    theta_from_physical,
)
from .protocol import ProtocolError, run_protocol, security_identity_check

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

OUTPUT_DIR_ENV = "E91SIM_OUTPUT_DIR"
MODES = ("single", "sweep-skr", "sweep-chsh")
FORMATS = ("csv", "json")
DEFAULT_EVENTS = 50_000

MODE_DEFAULTS = {
    "single": {"alpha": "pi/8", "beta": "pi/8", "theta": "0"},
    "sweep-skr": {"alpha": "pi/8", "beta": "0:pi:17", "theta": "0:2pi:21"},
    "sweep-chsh": {"alpha": "pi/8", "beta": "pi/8", "theta": "0:2pi:21"},
}

CONFIG_KEYS = {
    "mode", "alpha", "beta", "theta", "fss", "lifetime", "events", "seed",
    "output", "format", "plot", "allow_degenerate", "workers",
}


class UsageError(Exception):
    pass


_PI_RE = re.compile(
    r"""^\s*(?P<sign>[+-])?\s*
        (?P<coef>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)?\s*\*?\s*
        pi\s*
        (/\s*(?P<den>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?))?\s*$""",
    re.VERBOSE,
)


def parse_angle(text) -> float:
    """Radians from a number or a rational multiple of pi ("3pi/8", "-pi/4")."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    m = _PI_RE.match(s)
    if m:
        value = math.pi * float(m.group("coef") or 1.0)
        if m.group("den"):
            den = float(m.group("den"))
            if den == 0:
                raise UsageError(f"malformed angle {text!r}: division by zero")
            value /= den
        return -value if m.group("sign") == "-" else value
    try:
        value = float(s)
    except ValueError:
        raise UsageError(f"malformed angle {text!r}") from None
    if not math.isfinite(value):
        raise UsageError(f"malformed angle {text!r}")
    return value


@dataclass(frozen=True)
class Axis:
    """A single angle or a start:stop:count grid."""

    text: str
    values: tuple

    @property
    def is_grid(self) -> bool:
        return ":" in self.text


def parse_axis(text, name: str) -> Axis:
    raw = str(text)
    if ":" not in raw:
        try:
            return Axis(raw, (parse_angle(raw),))
        except UsageError as exc:
            raise UsageError(f"--{name}: {exc}") from None
    parts = raw.split(":")
    if len(parts) != 3:
        raise UsageError(f"--{name}: malformed grid spec {raw!r}, expected start:stop:count")
    try:
        start, stop = parse_angle(parts[0]), parse_angle(parts[1])
        count = int(parts[2])
    except (UsageError, ValueError):
        raise UsageError(f"--{name}: malformed grid spec {raw!r}") from None
    if count < 2:
        raise UsageError(f"--{name}: grid spec {raw!r} needs count >= 2")
    if not stop > start:
        raise UsageError(f"--{name}: grid spec {raw!r} needs stop > start")
    return Axis(raw, tuple(float(v) for v in np.linspace(start, stop, count)))


@dataclass
class RunConfig:
    mode: str
    alpha: Axis
    beta: Axis
    theta: Optional[Axis]
    fss_energy: Optional[float]
    exciton_lifetime: Optional[float]
    n_events: int
    seed: int
    output_path: Path
    output_format: str
    emit_plot: bool
    allow_degenerate: bool
    workers: int = 1

    def theta_values(self) -> tuple:
        if self.theta is not None:
            return self.theta.values
        phase = theta_from_physical(PhysicalParams(self.fss_energy, self.exciton_lifetime))
        return (phase.theta_fss,)

    def metadata(self) -> dict:
        return {
            "artifact": "e91sim",
            "version": __version__,
            "mode": self.mode,
            "master_seed": self.seed,
            "n_events": self.n_events,
            "alpha": self.alpha.text,
            "beta": self.beta.text,
            "theta": None if self.theta is None else self.theta.text,
            "fss_energy": self.fss_energy,
            "exciton_lifetime": self.exciton_lifetime,
            "allow_degenerate": self.allow_degenerate,
            "output_format": self.output_format,
        }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="e91sim",
        description="Simulate the E91 protocol with a dephased entangled-photon source.",
    )
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--alpha", help="radians, 'pi/8' style, or start:stop:count")
    p.add_argument("--beta", help="radians, 'pi/8' style, or start:stop:count")
    p.add_argument("--theta", help="dephasing phase; excludes --fss/--lifetime")
    p.add_argument("--fss", type=float, help="fine structure splitting (micro-eV)")
    p.add_argument("--lifetime", type=float, help="exciton lifetime (ps)")
    p.add_argument("--events", type=int, help=f"events per run (default {DEFAULT_EVENTS})")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--output", help=f"output file (default in ${OUTPUT_DIR_ENV} or cwd)")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--plot", action="store_true", default=None,
                   help="also write gnuplot data and an SVG figure")
    p.add_argument("--allow-degenerate", dest="allow_degenerate",
                   action=argparse.BooleanOptionalAction, default=None,
                   help="permit beta = 0 mod pi (default: on for sweep-skr only)")
    p.add_argument("--workers", type=int, help="processes for sweeps (default 1)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise UsageError(f"config file {path}: unknown key(s) {', '.join(unknown)}")
    return data


def parse_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    opts = _load_config_file(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key != "config" and value is not None:
            opts[key] = value

    mode = opts.get("mode", "single")
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}")
    defaults = MODE_DEFAULTS[mode]

    has_theta = opts.get("theta") is not None
    has_phys = opts.get("fss") is not None or opts.get("lifetime") is not None
    if has_theta and has_phys:
        raise UsageError("--theta and --fss/--lifetime are mutually exclusive")
    fss = lifetime = None
    theta = None
    if has_phys:
        if opts.get("fss") is None or opts.get("lifetime") is None:
            raise UsageError("--fss and --lifetime must be given together")
        fss, lifetime = float(opts["fss"]), float(opts["lifetime"])
        try:
            PhysicalParams(fss, lifetime)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        theta = parse_axis(opts.get("theta", defaults["theta"]), "theta")

    alpha = parse_axis(opts.get("alpha", defaults["alpha"]), "alpha")
    beta = parse_axis(opts.get("beta", defaults["beta"]), "beta")
    if mode == "single":
        for name, axis in (("alpha", alpha), ("beta", beta), ("theta", theta)):
            if axis is not None and axis.is_grid:
                raise UsageError(f"--{name}: grid spec {axis.text!r} not allowed in single mode")

    n_events = int(opts.get("events", DEFAULT_EVENTS))
    if n_events < 1:
        raise UsageError(f"--events must be >= 1, got {n_events}")
    workers = int(opts.get("workers", 1))
    if workers < 1:
        raise UsageError(f"--workers must be >= 1, got {workers}")
    fmt = opts.get("format", "csv")
    if fmt not in FORMATS:
        raise UsageError(f"unknown format {fmt!r}")
    output = opts.get("output")
    if output is None:
        output = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{mode}.{fmt}"

    allow = opts.get("allow_degenerate")
    if allow is None:
        allow = mode == "sweep-skr"

    return RunConfig(
        mode=mode,
        alpha=alpha,
        beta=beta,
        theta=theta,
        fss_energy=fss,
        exciton_lifetime=lifetime,
        n_events=n_events,
        seed=int(opts.get("seed", 0)),
        output_path=Path(output),
        output_format=fmt,
        emit_plot=bool(opts.get("plot", False)),
        allow_degenerate=bool(allow),
        workers=workers,
    )


def _single(config: RunConfig) -> tuple[SweepResult, dict]:
    alpha, beta = config.alpha.values[0], config.beta.values[0]
    theta = config.theta_values()[0]
    angles = ProtocolAngles(alpha, beta)
    phase = Phase(theta)
    _, stats = run_protocol(angles, phase, config.n_events, config.seed, config.allow_degenerate)
    record = SweepRecord(
        alpha=alpha,
        beta=beta,
        theta=theta,
        skr_simulated=stats.skr,
        skr_analytic=float(p_corr(angles, phase)),
        cr_estimate=stats.cr_estimate,
        cr_analytic=float(chsh_cr(angles, phase)),
        n_events=stats.n_events,
        n_coincident=stats.n_coincident,
        seed=config.seed,
    )
    identity = security_identity_check(stats)
    print(f"SKR={stats.skr:.6f} QBER={stats.qber:.6f} LKR={stats.lkr:.6f}")
    cr = "n/a" if stats.cr_estimate is None else f"{stats.cr_estimate:.6f}"
    print(f"CR={cr} CR_analytic={record.cr_analytic:.6f} SKR_analytic={record.skr_analytic:.6f}")
    print(f"events={stats.n_events} coincident={stats.n_coincident} "
          f"correlated={stats.n_correlated} identity={'pass' if identity else 'FAIL'}")
    result = SweepResult([record], None, None, [stats.qber < SHANNON_QBER_LIMIT])
    extra = {
        "n_correlated": stats.n_correlated,
        "lkr": stats.lkr,
        "security_identity": identity,
        "cr_pair_counts": {f"{a},{b}": n for (a, b), n in stats.cr_pair_counts.items()},
    }
    return result, extra


def _fmt_r2(x) -> str:
    return "n/a" if x is None else f"{x:.6f}"


def _sweep(config: RunConfig) -> tuple[SweepResult, dict]:
    result = run_sweep(
        config.alpha.values,
        config.beta.values,
        config.theta_values(),
        config.n_events,
        config.seed,
        allow_degenerate=config.allow_degenerate,
        workers=config.workers,
    )
    print(f"points={len(result.grid)} events_per_point={config.n_events}")
    print(f"R2_SKR={_fmt_r2(result.r_squared_skr)} R2_CR={_fmt_r2(result.r_squared_cr)}")
    flagged = [r for r, f in zip(result.grid, result.shannon_flags) if f]
    print(f"shannon_limit QBER<{SHANNON_QBER_LIMIT}: {len(flagged)}/{len(result.grid)} points")
    for r in flagged:
        print(f"  alpha={r.alpha:.6f} beta={r.beta:.6f} theta={r.theta:.6f} "
              f"QBER={r.qber_simulated:.6f}")
    return result, {}


def _emit_plot(config: RunConfig, result: SweepResult) -> list[Path]:
    from . import plotting
    from .report import write_gnuplot_data

    stem = config.output_path.with_suffix("")
    written = [write_gnuplot_data(result, stem.with_suffix(".dat"))]
    if config.mode == "sweep-chsh":
        written.append(plotting.plot_chsh(result, stem.with_suffix(".svg")))
    elif config.mode == "sweep-skr":
        written.append(plotting.plot_skr(result, stem.with_suffix(".svg")))
    return written


def execute(config: RunConfig) -> int:
    from .report import write_results, write_sidecar

    out_dir = config.output_path.parent
    if not out_dir.is_dir():
        print(f"error: output directory {out_dir} does not exist", file=sys.stderr)
        return EXIT_IO
    try:
        if config.mode == "single":
            result, extra = _single(config)
        else:
            result, extra = _sweep(config)
    except (ProtocolError, AnalysisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    meta = config.metadata()
    meta["shannon_limit"] = SHANNON_QBER_LIMIT
    meta["shannon_flagged"] = [i for i, f in enumerate(result.shannon_flags) if f]
    try:
        write_results(result, config.output_format, config.output_path, extra)
        write_sidecar(config.output_path, meta)
        written = _emit_plot(config, result) if config.emit_plot else []
    except OSError as exc:
        print(f"error: cannot write {exc.filename or config.output_path}: {exc.strerror}",
              file=sys.stderr)
        return EXIT_IO
    print(f"wrote {config.output_path}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
