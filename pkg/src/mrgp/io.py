"""CSV ingestion and report/forecast emission."""
from __future__ import annotations

import csv
import datetime as dt
import math
import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .gp import ForecastDistribution
from .harness import SweepReport, TrialResult
from .representations import SeriesGrid


class CSVFormatError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def load_series_csv(path, days_per_year: int = 250) -> SeriesGrid:
    """Read ``index,value`` or ``date,value`` rows into a grid.

    Integer indices must be consecutive. ISO dates must be strictly
    increasing and are numbered 0, 1, 2, ... in file order.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise CSVFormatError(f"{path}: empty file") from None
        if header not in (["index", "value"], ["date", "value"]):
            raise CSVFormatError(f"{path}:1: header must be 'index,value' or 'date,value'")
        dated = header[0] == "date"
        keys, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise CSVFormatError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                key = dt.date.fromisoformat(row[0].strip()) if dated else int(row[0])
                val = float(row[1])
            except ValueError as exc:
                raise CSVFormatError(f"{path}:{lineno}: malformed row {row!r} ({exc})") from None
            if not math.isfinite(val):
                raise CSVFormatError(f"{path}:{lineno}: non-finite value {row[1]!r}")
            if keys:
                prev = keys[-1]
                if key == prev:
                    raise CSVFormatError(f"{path}:{lineno}: duplicate index {row[0].strip()}")
                if key < prev:
                    raise CSVFormatError(f"{path}:{lineno}: index not increasing")
                if not dated and key != prev + 1:
                    raise CSVFormatError(f"{path}:{lineno}: gap in index after {prev}")
            keys.append(key)
            values.append(val)
    if len(values) < 2:
        raise CSVFormatError(f"{path}: need at least 2 rows")
    start = 0 if dated else keys[0]
    if start < 0:
        raise CSVFormatError(f"{path}:2: negative index")
    origin = divmod(start, days_per_year)
    return SeriesGrid(np.array(values), days_per_year, origin)


def write_series_csv(grid: SeriesGrid, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for day, v in zip(grid.days, grid.values):
            w.writerow([int(day), repr(float(v))])
    return path


def write_paths_csv(paths: np.ndarray, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path"] + [f"h{h}" for h in range(1, paths.shape[1] + 1)])
        for i, row in enumerate(paths):
            w.writerow([i] + [_fmt(v) for v in row])
    return path


FORECAST_COLUMNS = ["h", "pred_mean", "pred_std", "empirical_mean", "empirical_std"]


def write_forecast_csv(fc: ForecastDistribution, path, empirical_mean=None, empirical_std=None) -> Path:
    path = Path(path)
    n = len(fc.mean)
    em = np.full(n, math.nan) if empirical_mean is None else np.asarray(empirical_mean)[:n]
    es = np.full(n, math.nan) if empirical_std is None else np.asarray(empirical_std)[:n]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_COLUMNS)
        for h, m, s, a, b in zip(fc.horizons, fc.mean, fc.std, em, es):
            w.writerow([_fmt(int(h)), _fmt(m), _fmt(s), _fmt(a), _fmt(b)])
    return path


def read_forecast_csv(path) -> ForecastDistribution:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"h", "pred_mean", "pred_std"} - set(reader.fieldnames or ())
        if missing:
            raise CSVFormatError(f"{path}:1: missing columns {sorted(missing)}")
        rows = list(reader)
    if not rows:
        raise CSVFormatError(f"{path}: no forecast rows")
    return ForecastDistribution(
        [float(r["h"]) for r in rows],
        [float(r["pred_mean"]) for r in rows],
        [float(r["pred_std"]) for r in rows],
    )


def report_columns(horizons: Sequence[int]) -> list[str]:
    return (["axis_value", "model", "representation", "kernel"]
            + [f"mse_h{h}" for h in horizons] + ["trajectory_mse"]
            + [f"std_err_h{h}" for h in horizons]
            + ["coverage_2sigma", "diverged", "n_trials"]
            + [f"mse_h{h}_std" for h in horizons])


def write_report_csv(report: SweepReport, directory, name: str | None = None,
                     dump_forecasts: bool = False) -> list[Path]:
    """Write the aggregated sweep CSV (and optional per-trial forecast dumps)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    horizons = report.horizons
    out = directory / f"sweep_{name or report.axis}.csv"
    written = [out]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(report_columns(horizons))
        for pt in report.points:
            for r in pt.rows:
                m, s = r.mean, r.std
                w.writerow(
                    [pt.value, r.model, r.representation, r.kernel]
                    + [_fmt(m[f"mse_h{h}"]) for h in horizons]
                    + [_fmt(m["trajectory_mse"])]
                    + [_fmt(m[f"std_err_h{h}"]) for h in horizons]
                    + [_fmt(m["coverage_2sigma"]), r.diverged, r.n_trials]
                    + [_fmt(s[f"mse_h{h}"]) for h in horizons]
                )
    if dump_forecasts:
        fdir = directory / "forecasts"
        fdir.mkdir(exist_ok=True)
        for pt in report.points:
            for trial in pt.trials:
                written.extend(_dump_trial(trial, fdir, f"{report.axis}-{pt.value}"))
    return written


def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", s)


def _dump_trial(trial: TrialResult, fdir: Path, prefix: str) -> list[Path]:
    paths = []
    for m in trial.models:
        if m.forecast is None:
            continue
        name = _slug(f"{prefix}_{m.model}_{m.representation}_{m.kernel}_trial{trial.trial_index}.csv")
        paths.append(write_forecast_csv(m.forecast, fdir / name,
                                        trial.empirical_mean, trial.empirical_std))
    return paths


def read_report_csv(path) -> list[dict]:
    """Load a report back, checking the fixed column layout."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CSVFormatError(f"{path}:{lineno}: {len(row)} fields, header has {len(header)}")
            rows.append(dict(zip(header, row)))
    if header[:4] != ["axis_value", "model", "representation", "kernel"]:
        raise CSVFormatError(f"{path}:1: unexpected header")
    return rows
