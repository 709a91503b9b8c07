"""CSV / JSON writers for experiment results.

Column orders are fixed and floats are written with ``repr`` so that an
identical configuration always produces byte-identical files.
"""

import csv
import json
import math
from pathlib import Path

from .baselines import write_assignment
from .runner import METRICS
from .strategy import write_snapshots

METRICS_COLUMNS = ["parameter", "parameter_value", "scheme", "replication", "metric", "value"]
SUMMARY_COLUMNS = ["parameter", "parameter_value", "scheme", "metric", "mean", "ci95", "n"]
GAIN_COLUMNS = ["parameter", "parameter_value", "scheme", "end", "gain"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _clean(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _label(result, parameter):
    if parameter is None:
        return "", ""
    cfg = result.config.to_dict()
    return parameter, cfg[parameter]


def metric_rows(result, parameter=None):
    param, value = _label(result, parameter)
    scheme = result.config.scheme
    for i, report in enumerate(result.reports):
        for name in METRICS:
            yield [param, value, scheme, i, name, getattr(report, name)]
        for n, u in enumerate(report.per_device_success_rate):
            yield [param, value, scheme, i, f"u_{n + 1}", u]


def summary_rows(result, parameter=None):
    param, value = _label(result, parameter)
    for name, agg in result.aggregate.items():
        yield [param, value, result.config.scheme, name, agg["mean"], agg["ci95"], agg["n"]]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_config_echo(path, config, extra=None):
    payload = {"config": config.to_dict()}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_results(out_dir, results, parameter=None, extra=None):
    """Write every standard output for a list of ``ExperimentResult``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config_echo(out / "config_echo.json", results[0].config, extra)
    _write_rows(out / "metrics.csv", METRICS_COLUMNS,
                (row for r in results for row in metric_rows(r, parameter)))
    _write_rows(out / "summary.csv", SUMMARY_COLUMNS,
                (row for r in results for row in summary_rows(r, parameter)))
    gain = []
    for r in results:
        param, value = _label(r, parameter)
        gain.extend([param, value, r.config.scheme, end, g] for end, g in r.gain_curve)
    _write_rows(out / "gain_curve.csv", GAIN_COLUMNS, gain)
    reports = [{"label": dict(zip(("parameter", "value"), _label(r, parameter))),
                "scheme": r.config.scheme,
                "aggregate": r.aggregate,
                "reports": [rep.to_dict() for rep in r.reports]} for r in results]
    with open(out / "reports.json", "w") as fh:
        json.dump(_clean(reports), fh, sort_keys=True)
        fh.write("\n")
    if len(results) == 1:
        r = results[0]
        if r.strategies is not None:
            write_snapshots(out / "strategies.csv", list(r.snapshots) + [("final", r.strategies)])
        if r.assignment is not None:
            write_assignment(out / "assignment.csv", r.assignment)
    return out
