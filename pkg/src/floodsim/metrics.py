"""Metrics persistence and the cross-seed summary table.

Metrics files are CSV, one line per evaluated round, reals printed with 17
significant digits so parsing them back recovers the exact float64 values.
Wall-clock timing stays in memory only; persisted files must be
byte-identical across reruns of the same (config, seed).
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError
from .server import MetricsRecord

FIELDS = ("round", "test_accuracy", "test_loss", "mean_phi", "mean_lambda", "update_norm")


def emit_metrics(records: list[MetricsRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(FIELDS) + "\n")
        for r in records:
            fh.write(
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (r.round, r.test_accuracy, r.test_loss, r.mean_phi, r.mean_lambda, r.update_norm)
            )


def read_metrics(path) -> list[MetricsRecord]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != ",".join(FIELDS):
        raise ParseError(f"{path}: line 1: bad metrics header")
    records = []
    prev_round = -1
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(FIELDS):
            raise ParseError(f"{path}: line {lineno}: expected {len(FIELDS)} fields")
        try:
            rnd = int(cells[0])
            vals = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        if rnd <= prev_round:
            raise ParseError(f"{path}: line {lineno}: rounds must be strictly increasing")
        prev_round = rnd
        records.append(MetricsRecord(rnd, *vals, wall_ms=0))
    return records


def final_window_accuracies(records: list[MetricsRecord], window: int) -> np.ndarray:
    """Test accuracies of the last `window` evaluated rounds."""
    return np.array([r.test_accuracy for r in records[-window:]])


def write_summary(rows: list[tuple[str, int, float, float]], path) -> None:
    """rows: (method, num_seeds, accuracy_mean, accuracy_std)."""
    with open(path, "w") as fh:
        fh.write("method,num_seeds,accuracy_mean,accuracy_std\n")
        for method, n, mean, std in rows:
            fh.write("%s,%d,%.17g,%.17g\n" % (method, n, mean, std))
