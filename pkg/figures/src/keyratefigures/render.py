"""Render rate-versus-distance and cutoff-versus-distance panels from
cvkeyrate CSV sweeps.

A figure spec is a small JSON file:

    {
      "title": "...",
      "y_scale": "log" | "linear",
      "y_column": "rate" | "d_max_opt",
      "output": "panel.png",
      "series": [{"csv": "data/one.csv", "label": "ideal"}, ...]
    }

Relative csv/output paths resolve against the spec file's directory. Only
the documented CSV columns are consumed (distance_km plus the requested
y column); the CSV must declare a known schema in its first comment line.
Zero-or-negative y values are dropped on log-scale panels. Rendering is
deterministic: fixed style, fixed dpi, no timestamps in the image metadata.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KNOWN_SCHEMAS = ("cvkeyrate.scan.v1", "cvkeyrate.optimize.v1")
Y_COLUMNS = ("rate", "d_max_opt")


class SchemaError(Exception):
    """A CSV or spec file does not match the documented schema."""


@dataclass(frozen=True)
class Series:
    label: str
    distance_km: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class FigureSpec:
    title: str
    y_scale: str
    y_column: str
    output: Path
    series: list[tuple[Path, str]]

    @classmethod
    def load(cls, path) -> "FigureSpec":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot load spec {path}: {exc}") from None
        for key in ("y_scale", "y_column", "output", "series"):
            if key not in raw:
                raise SchemaError(f"spec {path} is missing {key!r}")
        if raw["y_scale"] not in ("log", "linear"):
            raise SchemaError(f"y_scale must be log or linear, got {raw['y_scale']!r}")
        if raw["y_column"] not in Y_COLUMNS:
            raise SchemaError(f"y_column must be one of {Y_COLUMNS}, got {raw['y_column']!r}")
        base = path.parent
        series = []
        for entry in raw["series"]:
            if "csv" not in entry or "label" not in entry:
                raise SchemaError(f"spec {path}: every series needs 'csv' and 'label'")
            series.append((base / entry["csv"], str(entry["label"])))
        if not series:
            raise SchemaError(f"spec {path}: series list is empty")
        return cls(
            title=str(raw.get("title", "")),
            y_scale=raw["y_scale"],
            y_column=raw["y_column"],
            output=base / raw["output"],
            series=series,
        )


def read_series(csv_path, y_column, label) -> Series:
    """Load one CSV, honoring its schema declaration."""
    csv_path = Path(csv_path)
    try:
        lines = csv_path.read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read {csv_path}: {exc}") from None
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaError(f"{csv_path}: missing schema declaration")
    schema = lines[0].split("=", 1)[1].strip()
    if schema not in KNOWN_SCHEMAS:
        raise SchemaError(f"{csv_path}: unknown schema {schema!r}")
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise SchemaError(f"{csv_path}: no header row")
    header = body[0].split(",")
    if "distance_km" not in header or y_column not in header:
        raise SchemaError(f"{csv_path}: schema {schema} has no {y_column!r} column")
    xi, yi = header.index("distance_km"), header.index(y_column)
    xs, ys = [], []
    for row in body[1:]:
        parts = row.split(",")
        xs.append(float(parts[xi]))
        ys.append(float(parts[yi]) if parts[yi] else np.nan)
    return Series(label=label, distance_km=np.array(xs), y=np.array(ys))


def plottable(series: Series, y_scale) -> Series:
    """Drop unusable points: NaNs always, nonpositive values on log axes."""
    keep = np.isfinite(series.y)
    if y_scale == "log":
        keep &= series.y > 0.0
    return Series(series.label, series.distance_km[keep], series.y[keep])


def render(spec: FigureSpec) -> Path:
    """Render one panel; returns the written image path."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=150)
    drew_anything = False
    for csv_path, label in spec.series:
        series = plottable(read_series(csv_path, spec.y_column, label), spec.y_scale)
        if series.distance_km.size == 0:
            print(f"warning: {csv_path} contributes no plottable points", file=sys.stderr)
            continue
        ax.plot(series.distance_km, series.y, label=series.label, linewidth=1.6)
        drew_anything = True
    ax.set_xlabel("transmission distance (km)")
    ax.set_ylabel(
        "secret key rate (bits/pulse)" if spec.y_column == "rate" else "optimal cutoff d_max"
    )
    if spec.y_scale == "log":
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    if drew_anything:
        ax.legend(frameon=False)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, metadata={"Software": "keyrate-figures"})
    plt.close(fig)
    return spec.output


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render a figure panel from cvkeyrate CSV sweeps"
    )
    parser.add_argument("--spec", required=True, help="path to a figure spec (JSON)")
    args = parser.parse_args(argv)
    try:
        out = render(FigureSpec.load(args.spec))
    except SchemaError as exc:
        print(f"render: error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
