"""
Report writers.

Responsible for:
- the JSON report (sorted keys, non finite floats spelled as strings)
- one CSV per certificate with its top sample points
- one CSV per estimate with the per sample norms and ratios
"""
import csv
import json
import logging
import math
from pathlib import Path

from hypocert.models import EstimateMeasurement, InequalityCertificate, VerificationReport

_LOGGER = logging.getLogger(__name__)


def sanitize(value):
    """Recursively replace inf and nan by strings so the output is strict JSON."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        # numpy scalars
        return sanitize(value.item())
    return value


def report_json(report: VerificationReport, include_timings: bool = True) -> str:
    document = report.to_dict()
    if not include_timings:
        document.pop("wall_times", None)
        document.pop("tool_version", None)
    return json.dumps(sanitize(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def write_certificate_csv(cert: InequalityCertificate, path: Path) -> None:
    width = max((len(row) for row in cert.top_points), default=0)
    # rows are the point coordinates followed by lhs, rhs and their ratio
    dim = max(width - 3, 0)
    fieldnames = [f"xi_{k}" for k in range(dim)] + ["lhs", "rhs", "ratio"]
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in cert.top_points:
            writer.writerow(dict(zip(fieldnames, sanitize(list(row)))))


def write_estimate_csv(measurement: EstimateMeasurement, path: Path) -> None:
    names = list(measurement.rhs_terms)
    fieldnames = ["sample", "lhs"] + [f"rhs_{name}" for name in names] + ["ratio"]
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for i, (lhs, ratio) in enumerate(zip(measurement.lhs_norms, measurement.ratios)):
            row = {"sample": i, "lhs": lhs, "ratio": ratio}
            row.update({f"rhs_{name}": measurement.rhs_terms[name][i] for name in names})
            writer.writerow(sanitize(row))


def write_report(report: VerificationReport, output_dir: str | Path) -> Path:
    """Write report.json plus the CSV tables into output_dir; returns the JSON path."""
    output = Path(output_dir)
    output.mkdir(parents=True, exist_ok=True)
    path = output / "report.json"
    path.write_text(report_json(report), encoding="utf-8")

    if report.certificates:
        cert_dir = output / "certificates"
        cert_dir.mkdir(exist_ok=True)
        for cert in report.certificates:
            write_certificate_csv(cert, cert_dir / f"{_safe_name(cert.name)}.csv")
    if report.spectral:
        estimate_dir = output / "estimates"
        estimate_dir.mkdir(exist_ok=True)
        for measurement in report.spectral:
            write_estimate_csv(measurement, estimate_dir / f"{_safe_name(measurement.which)}.csv")
    _LOGGER.info("Report written to %s", path)
    return path
