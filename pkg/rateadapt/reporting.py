"""CSV / JSON / text emission for analysis and simulation results."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from rateadapt.metrics import KpiReport

logger = logging.getLogger(__name__)

KPI_COLUMNS = (
    "scheme",
    "n",
    "T",
    "theta",
    "p_ack",
    "psd",
    "latency_slots",
    "latency_s",
    "success_latency_slots",
    "success_latency_s",
    "energy_J",
)

SIM_EXTRA_COLUMNS = (
    "packets",
    "psd_stderr",
    "latency_slots_stderr",
    "energy_J_stderr",
    "psd_analytic",
    "latency_slots_analytic",
    "energy_J_analytic",
)

# Enough digits for exact float round trips
FLOAT_FORMAT = "{:.17g}"


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def _write_rows(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: format_value(row.get(c)) for c in columns})
    logger.info("Wrote %s", path)
    return path


def kpi_row(report: KpiReport) -> Dict[str, Any]:
    row = {
        "scheme": report.scheme.value,
        "n": report.fragments,
        "T": report.deadline,
        "theta": report.threshold,
        "p_ack": report.p_ack,
        "psd": report.psd,
        "latency_slots": report.latency_slots,
        "latency_s": report.latency_s,
        "success_latency_slots": report.success_latency_slots,
        "success_latency_s": report.success_latency_s,
        "energy_J": report.energy_j,
    }
    for c in report.classes:
        row[f"psd_c{c.index}"] = c.psd
        row[f"latency_slots_c{c.index}"] = c.latency_slots
    return row


def class_columns(class_count: int) -> List[str]:
    return [f"psd_c{m}" for m in range(1, class_count + 1)] + [
        f"latency_slots_c{m}" for m in range(1, class_count + 1)
    ]


def write_kpi_csv(path: Path, reports: Sequence[KpiReport]) -> Path:
    class_count = max((r.class_count for r in reports), default=0)
    columns = list(KPI_COLUMNS) + class_columns(class_count)
    return _write_rows(path, columns, (kpi_row(r) for r in reports))


def write_sim_kpi_csv(path: Path, rows: Sequence[Mapping[str, Any]]) -> Path:
    columns = list(KPI_COLUMNS) + list(SIM_EXTRA_COLUMNS)
    return _write_rows(path, columns, rows)


def write_table_csv(path: Path, columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> Path:
    return _write_rows(path, columns, rows)


def write_meta_csv(
    path: Path,
    deltas: np.ndarray,
    analytic: np.ndarray,
    empirical: Optional[np.ndarray] = None,
) -> Path:
    columns = ["delta", "ccdf_analytic"] + (["ccdf_empirical"] if empirical is not None else [])
    rows = []
    for i, delta in enumerate(deltas):
        row = {"delta": float(delta), "ccdf_analytic": float(analytic[i])}
        if empirical is not None:
            row["ccdf_empirical"] = float(empirical[i])
        rows.append(row)
    return _write_rows(path, columns, rows)


def write_samples(path: Path, samples: Iterable[float]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for value in samples:
            handle.write(FLOAT_FORMAT.format(float(value)) + "\n")
    logger.info("Wrote %s", path)
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def to_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False, default=_json_default)


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(payload) + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def _fmt(value: Optional[float], spec: str = ".6g") -> str:
    return "n/a" if value is None else format(value, spec)


def format_report(reports: Sequence[KpiReport], output_format: str = "pretty") -> str:
    """
    Render KPI reports for the terminal.

    'pretty' lists the class-averaged KPIs with the per-class PSD range,
    'json' dumps the full reports, 'simple' prints one line per report.
    """
    if output_format == "json":
        return to_json([r.to_dict() for r in reports])

    if output_format == "simple":
        return "\n".join(
            f"{r.scheme.value} n={r.fragments} psd={_fmt(r.psd)} "
            f"latency_s={_fmt(r.latency_s)} energy_J={_fmt(r.energy_j)}"
            for r in reports
        )

    output = []
    for r in reports:
        psds = [c.psd for c in r.classes]
        output.append(f"{r.scheme.label}  n={r.fragments}  T={r.deadline}")
        output.append(f"   theta_n: {_fmt(r.threshold)}   M1: {_fmt(r.m1)}   M2: {_fmt(r.m2)}")
        output.append(f"   p_ack: {_fmt(r.p_ack)}   classes: {r.class_count}")
        output.append(
            f"   PSD: {_fmt(r.psd)}  (classes {_fmt(min(psds))} .. {_fmt(max(psds))})"
        )
        output.append(
            f"   latency ({r.latency_mode}): {_fmt(r.latency_slots)} slots / {_fmt(r.latency_s)} s"
        )
        output.append(f"   energy: {_fmt(r.energy_j)} J")
        output.append("-" * 40)
    return "\n".join(output)
