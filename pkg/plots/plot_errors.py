#!/usr/bin/env python3
"""Render estimator error curves from a results CSV.

Input is the comparison harness CSV with header

    estimator,seed,buffer_index,samples_seen,param_err,pred_excess,burn_in

and this script depends on nothing but that file format. It draws one line
per estimator (mean across seeds at each buffer index) with a min-max band
over seeds, y log-scaled unless --linear-y, and writes a raster image.
Burn-in rows are dropped unless --include-burnin is given.

Exit status: 0 on success, 2 on a malformed CSV, a missing metric column,
an empty input, or an unwritable output path.
"""

import argparse
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_HEADER = (
    "estimator",
    "seed",
    "buffer_index",
    "samples_seen",
    "param_err",
    "pred_excess",
    "burn_in",
)
METRIC_COLUMNS = ("param_err", "pred_excess")


class CsvFormatError(ValueError):
    """Input file does not conform to the results-CSV schema."""


@dataclass(frozen=True)
class Row:
    estimator: str
    seed: int
    buffer_index: int
    param_err: float
    pred_excess: float
    burn_in: bool


@dataclass(frozen=True)
class Series:
    """One estimator's aggregated curve: per-index mean and seed envelope."""

    estimator: str
    indices: tuple
    mean: tuple
    lo: tuple
    hi: tuple


def load_rows(path):
    """Parse the CSV into typed rows, validating schema line by line."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise CsvFormatError(f"{path}: file is empty")
    header = tuple(lines[0].split(","))
    if header != EXPECTED_HEADER:
        missing = [col for col in EXPECTED_HEADER if col not in header]
        if missing:
            raise CsvFormatError(
                f"{path}: header is missing column(s): {', '.join(missing)}"
            )
        raise CsvFormatError(
            f"{path}: unexpected header {','.join(header)!r}"
        )
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(EXPECTED_HEADER):
            raise CsvFormatError(
                f"{path}:{lineno}: expected {len(EXPECTED_HEADER)} fields, "
                f"got {len(parts)}"
            )
        if parts[6] not in ("true", "false"):
            raise CsvFormatError(
                f"{path}:{lineno}: burn_in must be true/false, got {parts[6]!r}"
            )
        try:
            rows.append(
                Row(
                    estimator=parts[0],
                    seed=int(parts[1]),
                    buffer_index=int(parts[2]),
                    param_err=float(parts[4]),
                    pred_excess=float(parts[5]),
                    burn_in=parts[6] == "true",
                )
            )
        except ValueError as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    return rows


def extract_series(rows, metric, include_burnin=False):
    """Aggregate rows into one Series per estimator; pure data projection.

    At each buffer index the mean is a left-to-right sum over seed-sorted
    values, matching the aggregation used by the CSV producer's summary
    command so final values cross-check exactly.
    """
    if metric not in METRIC_COLUMNS:
        raise CsvFormatError(
            f"unknown metric {metric!r}; expected one of {METRIC_COLUMNS}"
        )
    grouped = {}
    for row in rows:
        if row.burn_in and not include_burnin:
            continue
        value = getattr(row, metric)
        grouped.setdefault(row.estimator, {}).setdefault(
            row.buffer_index, []
        ).append((row.seed, value))
    series = []
    for estimator in sorted(grouped):
        per_index = grouped[estimator]
        indices = sorted(per_index)
        means, los, his = [], [], []
        for index in indices:
            values = [v for _, v in sorted(per_index[index])]
            total = 0.0
            for v in values:
                total += v
            means.append(total / len(values))
            los.append(min(values))
            his.append(max(values))
        series.append(
            Series(
                estimator=estimator,
                indices=tuple(indices),
                mean=tuple(means),
                lo=tuple(los),
                hi=tuple(his),
            )
        )
    return series


def render(series, metric, log_y=True):
    """Draw the aggregated curves; returns the matplotlib figure."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for curve in series:
        (line,) = ax.plot(curve.indices, curve.mean, label=curve.estimator)
        if any(lo != hi for lo, hi in zip(curve.lo, curve.hi)):
            ax.fill_between(
                curve.indices,
                curve.lo,
                curve.hi,
                color=line.get_color(),
                alpha=0.2,
                linewidth=0,
            )
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("buffer index")
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    return fig


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Plot estimator error curves from a results CSV."
    )
    parser.add_argument("--in", dest="in_path", required=True, metavar="PATH")
    parser.add_argument(
        "--metric", choices=METRIC_COLUMNS, default="param_err"
    )
    parser.add_argument("--out", required=True, metavar="PATH")
    parser.add_argument(
        "--linear-y", action="store_true", help="linear y axis (default: log)"
    )
    parser.add_argument(
        "--include-burnin",
        action="store_true",
        help="keep rows flagged as burn-in (default: drop them)",
    )
    args = parser.parse_args(argv)
    try:
        rows = load_rows(args.in_path)
        series = extract_series(rows, args.metric, args.include_burnin)
        if not series:
            raise CsvFormatError(f"{args.in_path}: no data rows to plot")
        fig = render(series, args.metric, log_y=not args.linear_y)
        fig.savefig(args.out, dpi=150)
    except (CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(series)} estimators)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
