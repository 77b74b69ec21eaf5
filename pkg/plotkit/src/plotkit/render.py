"""Render overlay figures from a figure-spec JSON.

The spec lists trace CSVs with a role each: "line" series are drawn as
solid curves, "marker" series as discrete points subsampled every k-th
grid point. Output is written as both PNG and SVG next to the requested
path. Rendering is read-only over its inputs and deterministic: identical
spec and CSVs give byte-identical images.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLUMNS = {"S": 1, "I": 2, "R": 3}
MARKERS = ["o", "s", "^", "D", "v", "P", "X"]


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class Series:
    file: str
    role: str
    label: str


@dataclass
class FigureSpec:
    series: list[Series]
    column: str = "I"
    x_label: str = "time"
    y_label: str = "prevalence"
    marker_every: int = 25
    output: str = "figure.png"
    base_dir: Path = field(default_factory=Path)

    def resolve(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p


def load_spec(path) -> FigureSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not doc.get("series"):
        raise SpecError(f"{path}: spec must list at least one series")
    series = []
    for k, entry in enumerate(doc["series"]):
        missing = {"file", "role"} - set(entry)
        if missing:
            raise SpecError(f"series[{k}] is missing {sorted(missing)}")
        if entry["role"] not in ("line", "marker"):
            raise SpecError(f"series[{k}]: role must be line or marker, "
                            f"got {entry['role']!r}")
        series.append(Series(entry["file"], entry["role"],
                             entry.get("label", entry["file"])))
    column = doc.get("column", "I")
    if column not in COLUMNS:
        raise SpecError(f"column must be one of {sorted(COLUMNS)}")
    every = int(doc.get("marker_every", 25))
    if every < 1:
        raise SpecError("marker_every must be a positive integer")
    spec = FigureSpec(series, column,
                      doc.get("x_label", "time"),
                      doc.get("y_label", "prevalence"),
                      every, doc.get("output", "figure.png"),
                      base_dir=path.parent)
    for s in spec.series:
        if not spec.resolve(s.file).exists():
            raise SpecError(f"trace file not found: {s.file}")
    return spec


def read_trace(path) -> tuple[list[float], dict[str, list[float]]]:
    """Parse a t,S,I,R trace CSV into a time grid and per-column series."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:4]] != ["t", "S", "I", "R"]:
        raise SpecError(f"{path}: expected header t,S,I,R")
    try:
        data = [[float(x) for x in row[:4]] for row in rows[1:] if row]
    except ValueError as exc:
        raise SpecError(f"{path}: non-numeric value ({exc})") from exc
    if not data:
        raise SpecError(f"{path}: no data rows")
    cols = list(zip(*data))
    return list(cols[0]), {name: list(cols[k]) for name, k in COLUMNS.items()}


def render(spec: FigureSpec, output=None) -> list[Path]:
    """Draw the overlay and write it as PNG and SVG; returns both paths."""
    # stable SVG element ids, no embedded timestamps
    plt.rcParams["svg.hashsalt"] = "plotkit"
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=150)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    pair = 0
    last_role = None
    for s in spec.series:
        if last_role is not None and (s.role == "line"
                                      or last_role == "marker"):
            pair += 1
        t, cols = read_trace(spec.resolve(s.file))
        y = cols[spec.column]
        color = colors[pair % len(colors)]
        if s.role == "line":
            ax.plot(t, y, color=color, linewidth=1.4, label=s.label)
        else:
            k = spec.marker_every
            ax.plot(t[::k], y[::k], linestyle="none",
                    marker=MARKERS[pair % len(MARKERS)], markersize=4.5,
                    markerfacecolor="none", color=color, label=s.label)
        last_role = s.role
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    ax.legend(frameon=False, fontsize=8)
    out = Path(output) if output is not None else spec.resolve(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    png = out.with_suffix(".png")
    svg = out.with_suffix(".svg")
    fig.savefig(png, metadata={"Software": "plotkit"})
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return [png, svg]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="plotkit",
        description="Render a figure-spec JSON into PNG and SVG overlays.")
    p.add_argument("spec", help="path to the figure-spec JSON")
    p.add_argument("-o", "--output",
                   help="output image path (overrides the spec)")
    args = p.parse_args(argv)
    try:
        spec = load_spec(args.spec)
        paths = render(spec, args.output)
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
