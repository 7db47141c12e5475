"""CSV/JSON result files, run-metadata sidecars and gnuplot data files."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Union

from .analysis import SweepRecord, SweepResult

CSV_COLUMNS = (
    "alpha",
    "beta",
    "theta",
    "n_events",
    "n_coincident",
    "skr_sim",
    "skr_analytic",
    "qber_sim",
    "cr_estimate",
    "cr_analytic",
    "seed",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    # repr of a Python float is the shortest round-trip decimal
    return repr(float(x))


def record_row(r: SweepRecord) -> list[str]:
    values = (
        r.alpha,
        r.beta,
        r.theta,
        r.n_events,
        r.n_coincident,
        r.skr_simulated,
        r.skr_analytic,
        r.qber_simulated,
        r.cr_estimate,
        r.cr_analytic,
        r.seed,
    )
    return [_fmt(v) for v in values]


def record_json(r: SweepRecord) -> dict:
    return dict(zip(CSV_COLUMNS, (
        r.alpha, r.beta, r.theta, r.n_events, r.n_coincident, r.skr_simulated,
        r.skr_analytic, r.qber_simulated, r.cr_estimate, r.cr_analytic, r.seed,
    )))


def _as_result(result: Union[SweepResult, SweepRecord]) -> SweepResult:
    if isinstance(result, SweepRecord):
        return SweepResult([result], None, None)
    return result


def to_csv(result: Union[SweepResult, SweepRecord]) -> str:
    result = _as_result(result)
    if not result.grid:
        raise ValueError("refusing to serialize an empty grid")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in result.grid:
        writer.writerow(record_row(r))
    return buf.getvalue()


def to_json(result: Union[SweepResult, SweepRecord], extra: dict = None) -> str:
    result = _as_result(result)
    if not result.grid:
        raise ValueError("refusing to serialize an empty grid")
    doc = {
        "records": [record_json(r) for r in result.grid],
        "r_squared_skr": result.r_squared_skr,
        "r_squared_cr": result.r_squared_cr,
        "shannon_flags": list(result.shannon_flags),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2) + "\n"


def read_csv(text: str) -> list[dict]:
    """Parse a results CSV back into typed records (None for empty fields)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    out = []
    for row in rows[1:]:
        rec = {}
        for name, value in zip(CSV_COLUMNS, row):
            if value == "":
                rec[name] = None
            elif name in ("n_events", "n_coincident", "seed"):
                rec[name] = int(value)
            else:
                rec[name] = float(value)
        out.append(rec)
    return out


def write_results(
    result: Union[SweepResult, SweepRecord], fmt: str, path, extra: dict = None
) -> Path:
    path = Path(path)
    if fmt == "csv":
        text = to_csv(result)
    elif fmt == "json":
        text = to_json(result, extra)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    path.write_text(text)
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_sidecar(path, metadata: dict) -> Path:
    side = sidecar_path(path)
    side.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    return side


def write_gnuplot_data(result: SweepResult, path) -> Path:
    """Whitespace-delimited columns; blank line whenever beta or alpha changes
    so that ``splot ... with pm3d`` sees one scan per beta."""
    path = Path(path)
    lines = ["# alpha beta theta skr_sim skr_analytic abs_cr_estimate abs_cr_analytic"]
    prev = None
    for r in result.grid:
        key = (r.alpha, r.beta)
        if prev is not None and key != prev:
            lines.append("")
        prev = key
        cr = "NaN" if r.cr_estimate is None else repr(abs(r.cr_estimate))
        lines.append(
            " ".join(
                [repr(r.alpha), repr(r.beta), repr(r.theta), repr(r.skr_simulated),
                 repr(r.skr_analytic), cr, repr(abs(r.cr_analytic))]
            )
        )
    path.write_text("\n".join(lines) + "\n")
    return path
