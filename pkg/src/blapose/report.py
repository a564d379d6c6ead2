"""Report and plot emission: CSV, Markdown, and static SVG files.

The SVG writer is deliberately tiny and hand-rolled so that a rerun with
the same inputs produces byte-identical files (no timestamps, no
generator metadata, fixed float formatting).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .adjust import EvaluationReport


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


class SvgCanvas:
    def __init__(self, width: int = 640, height: int = 400, margin: int = 56):
        self.width = width
        self.height = height
        self.margin = margin
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, color="#333", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}"/>'
        )

    def polyline(self, points, color="#1f77b4", width=1.5):
        joined = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{joined}" fill="none" stroke="{color}" '
            f'stroke-width="{_fmt(width)}"/>'
        )

    def circle(self, x, y, r=3.0, color="#1f77b4"):
        self.parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{color}"/>'
        )

    def text(self, x, y, content, size=11, anchor="middle", color="#222"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{color}">{content}</text>'
        )

    def to_text(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _axes(canvas: SvgCanvas, x_label: str, y_label: str, title: str):
    m, w, h = canvas.margin, canvas.width, canvas.height
    canvas.line(m, h - m, w - m, h - m)
    canvas.line(m, m, m, h - m)
    canvas.text(w / 2, h - 12, x_label)
    canvas.text(14, h / 2, y_label)
    canvas.text(w / 2, 22, title, size=13)


def _scale(values, lo_pix, hi_pix):
    values = np.asarray(values, dtype=np.float64)
    vmin, vmax = float(values.min()), float(values.max())
    if vmax - vmin < 1e-12:
        vmax = vmin + 1.0
    span = vmax - vmin

    def to_pix(v):
        return lo_pix + (np.asarray(v, dtype=np.float64) - vmin) / span * (hi_pix - lo_pix)

    return to_pix, vmin, vmax


def training_curve_svg(log: list[dict], path: str | Path) -> None:
    """Loss-versus-epoch lines for train and (when present) validation."""
    canvas = SvgCanvas()
    _axes(canvas, "epoch", "loss", "Training curve")
    m, w, h = canvas.margin, canvas.width, canvas.height
    epochs = [entry["epoch"] for entry in log]
    series = [("train_loss", "#1f77b4")]
    if log and "val_loss" in log[0]:
        series.append(("val_loss", "#d62728"))
    all_vals = [entry[key] for key, _ in series for entry in log]
    to_x, _, _ = _scale(epochs, m, w - m)
    to_y, vmin, vmax = _scale(all_vals, h - m, m)
    for key, color in series:
        pts = [(to_x(e["epoch"]), to_y(e[key])) for e in log]
        canvas.polyline(pts, color=color)
    canvas.text(w - m, m + 12, f"max {vmax:.5f}", anchor="end", size=10)
    canvas.text(w - m, m + 26, f"min {vmin:.5f}", anchor="end", size=10)
    for i, (key, color) in enumerate(series):
        canvas.text(m + 10, m + 14 + 14 * i, key, anchor="start", size=10, color=color)
    Path(path).write_text(canvas.to_text())


def bone_stats_svg(bone_names, mean: np.ndarray, std: np.ndarray, path: str | Path) -> None:
    """Per-bone mean with one-sigma error bars."""
    canvas = SvgCanvas(width=720)
    _axes(canvas, "bone", "length (m)", "Bone length mean and spread")
    m, w, h = canvas.margin, canvas.width, canvas.height
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    n = len(bone_names)
    xs = np.linspace(m + 20, w - m - 20, n)
    to_y, _, _ = _scale(np.concatenate([mean - std, mean + std]), h - m, m)
    for i in range(n):
        x = float(xs[i])
        canvas.line(x, float(to_y(mean[i] - std[i])), x, float(to_y(mean[i] + std[i])), color="#888")
        canvas.circle(x, float(to_y(mean[i])))
        canvas.text(x, h - m + 14, str(i + 1), size=9)
    canvas.text(w / 2, h - 26, " ".join(bone_names), size=8)
    Path(path).write_text(canvas.to_text())


def per_action_error_svg(report: EvaluationReport, path: str | Path) -> None:
    """Per-action MPJPE bars (a compact stand-in for the results table)."""
    canvas = SvgCanvas(width=720)
    _axes(canvas, "action", "MPJPE (mm)", "Per-action reconstruction error")
    m, w, h = canvas.margin, canvas.width, canvas.height
    rows = list(report.rows) + [report.overall]
    xs = np.linspace(m + 30, w - m - 30, len(rows))
    values = [r.mpjpe_mm for r in rows]
    to_y, _, _ = _scale([0.0] + values, h - m, m)
    zero = float(to_y(0.0))
    for x, row in zip(xs, rows):
        top = float(to_y(row.mpjpe_mm))
        color = "#d62728" if row.action == "overall" else "#1f77b4"
        canvas.line(float(x), zero, float(x), top, color=color, width=14)
        canvas.text(float(x), h - m + 14, row.action, size=9)
        canvas.text(float(x), top - 5, f"{row.mpjpe_mm:.1f}", size=9)
    Path(path).write_text(canvas.to_text())


def write_report_files(report: EvaluationReport, out_dir: str | Path, stem: str = "report") -> list[Path]:
    """Emit the CSV / Markdown / JSON renderings of one evaluation."""
    from .bundle import canonical_json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    csv_path = out_dir / f"{stem}.csv"
    csv_path.write_text(report.to_csv_text())
    paths.append(csv_path)
    md_path = out_dir / f"{stem}.md"
    md_path.write_text(report.to_markdown_text())
    paths.append(md_path)
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(canonical_json(report.to_dict()) + "\n")
    paths.append(json_path)
    return paths
