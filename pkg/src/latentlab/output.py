"""CSV emission with stable schemas and 6-significant-digit formatting."""

from __future__ import annotations

import math
from pathlib import Path

# Schema registry: bump the version whenever a column list changes.
SCHEMAS: dict[str, tuple[int, tuple[str, ...]]] = {
    "toy_sweep": (1, ("D", "alpha", "seed", "energy_distance", "train_loss_final", "n_samples")),
    "loss_trace": (1, ("step", "loss")),
    "stage1_trace": (1, ("step", "rec_loss", "align_loss")),
    "samples_2d": (1, ("x", "y")),
    "noise_eval": (1, ("noise_level", "mse", "psnr_analog", "cknna")),
    "sigma_sweep": (1, ("sigma_bar", "energy_distance")),
    "oracle_checks": (1, ("name", "max_rel_err", "tolerance", "passed")),
    "metric_value": (1, ("metric", "value")),
}


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6g}"
    return str(v)


def write_csv(path, schema: str, rows) -> None:
    """Write rows under a registered schema header; floats get 6 significant digits."""
    _, columns = SCHEMAS[schema]
    out = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"write_csv[{schema}]: row width {len(row)} != {len(columns)}")
        out.append(",".join(format_value(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n")


def read_point_csv(path) -> list[list[float]]:
    """Read a numeric CSV, skipping a header line when the first cell is not a number."""
    rows = []
    with open(path) as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if i == 0:
                    continue
                raise
    return rows
