"""Report writers: delimited tables, JSON and matplotlib figures.

Figures are drawn on a bare :class:`~matplotlib.figure.Figure` with the Agg
canvas so nothing touches pyplot's global state.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {"linewidth": 1.2}


def _figure(width=5.0, height=3.2):
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def write_csv(rows: list, path, columns=None) -> Path:
    """``rows`` are dicts; columns default to the keys of the first row."""
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v


def write_json(doc, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def loss_figure(history: list, path, title="training loss") -> Path:
    """One line per logged component, log-scaled."""
    fig = _figure()
    ax = fig.add_subplot(111)
    keys = [k for k in history[0] if k != "total"] if history else []
    steps = np.arange(len(history))
    for k in keys:
        vals = np.array([h[k] for h in history], dtype=np.float64)
        ax.plot(steps, np.maximum(vals, 1e-12), label=k, **STYLE)
    if history and "total" in history[0]:
        ax.plot(steps, [h["total"] for h in history], color="k", label="total", **STYLE)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_title(title)
    if keys:
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    return Path(path)


def metrics_figure(metrics: dict, path, title="evaluation") -> Path:
    fig = _figure()
    ax = fig.add_subplot(111)
    names = list(metrics)
    ax.barh(names, [float(metrics[k]) for k in names], color="0.35")
    ax.set_title(title)
    ax.tick_params(labelsize=7)
    fig.tight_layout()
    fig.savefig(path)
    return Path(path)


def image_grid_figure(images: list, path, titles=None, cols: int = 4) -> Path:
    """Tile RGB arrays ``(H, W, 3)`` in [0, 1]."""
    n = max(1, len(images))
    cols = min(cols, n)
    rows = -(-n // cols)
    fig = _figure(2.0 * cols, 2.0 * rows)
    for i, img in enumerate(images):
        ax = fig.add_subplot(rows, cols, i + 1)
        ax.imshow(np.clip(img, 0.0, 1.0), interpolation="nearest")
        ax.set_axis_off()
        if titles:
            ax.set_title(titles[i], fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    return Path(path)


def eval_report(report, out_dir, extra: dict | None = None) -> dict:
    """CSV, JSON and a bar chart for an :class:`~artikit.eval.EvalReport`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    doc.update(extra or {})
    paths = {
        "csv": write_csv([{"metric": k, "value": v} for k, v in doc.items()], out / "eval.csv", ["metric", "value"]),
        "json": write_json(doc, out / "eval.json"),
        "figure": metrics_figure({k: v for k, v in report.to_dict().items() if k != "matched_parts"},
                                 out / "eval.png"),
    }
    return {k: str(v) for k, v in paths.items()}


def training_report(history: list, out_dir, name: str) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [dict(step=i, **h) for i, h in enumerate(history)]
    return {
        "csv": str(write_csv(rows, out / f"{name}_loss.csv")),
        "figure": str(loss_figure(history, out / f"{name}_loss.png", title=f"{name} loss")),
    }
