"""Deterministic SVG plots of run and experiment directories."""

import logging
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import parse_csv  # noqa: E402

log = logging.getLogger(__name__)

_RC = {
    "svg.hashsalt": "bwlocksim",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 8,
}


class PlotError(ValueError):
    pass


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _read(path):
    return parse_csv(Path(path).read_text(encoding="utf-8"))


def plot_trace(run_dir):
    """Per-core misses per period, one panel per core (four on the default machine)."""
    run_dir = Path(run_dir)
    header, rows = _read(run_dir / "trace.csv")
    cores = sorted({int(r[1]) for r in rows})
    if not cores:
        log.warning("%s: empty trace, skipped", run_dir / "trace.csv")
        return None
    ncol = 2 if len(cores) > 1 else 1
    nrow = math.ceil(len(cores) / ncol)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(nrow, ncol, figsize=(8, 2.2 * nrow), sharex=True, squeeze=False)
        for ax, c in zip(axes.flat, cores):
            pts = [(int(r[0]) / 1e6, int(r[2])) for r in rows if int(r[1]) == c]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=0.8, color="C0")
            ax.set_title(f"Core{c}")
            ax.set_ylabel("LLC misses / period")
        for ax in axes.flat[len(cores):]:
            ax.set_visible(False)
        for ax in axes[-1]:
            ax.set_xlabel("time (ms)")
        fig.tight_layout()
        out = run_dir / "trace.svg"
        _save(fig, out)
    return out


def plot_frames(run_dir):
    """Frame processing time per frame and task; skipped when there are no frames."""
    run_dir = Path(run_dir)
    path = run_dir / "frames.csv"
    if not path.exists():
        return None
    _, rows = _read(path)
    if not rows:
        log.warning("%s: no frames recorded, frame plot skipped", path)
        return None
    tasks = []
    for r in rows:
        if r[0] not in tasks:
            tasks.append(r[0])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 3))
        for i, t in enumerate(tasks):
            pts = [(int(r[1]), int(r[4]) / 1e6) for r in rows if r[0] == t]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=0.8, label=t, color=f"C{i % 10}")
        ax.set_xlabel("frame")
        ax.set_ylabel("processing time (ms)")
        ax.legend(loc="upper right")
        fig.tight_layout()
        out = run_dir / "frames.svg"
        _save(fig, out)
    return out


def plot_fig2(path):
    _, rows = _read(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot([int(r[0]) for r in rows], [float(r[3]) for r in rows], marker="o", lw=1)
        ax.set_xlabel("co-runner bandwidth (MB/s)")
        ax.set_ylabel("normalized latency")
        fig.tight_layout()
        out = Path(path).with_suffix(".svg")
        _save(fig, out)
    return out


def plot_bars(path, value_cols):
    header, rows = _read(path)
    idx = [header.index(c) for c in value_cols]
    labels = [r[0] for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        w = 0.8 / len(idx)
        for j, (col, k) in enumerate(zip(value_cols, idx)):
            vals = [float(r[k]) for r in rows]
            ax.bar([i + j * w for i in range(len(rows))], vals, width=w, label=col)
        ax.set_xticks([i + w * (len(idx) - 1) / 2 for i in range(len(rows))])
        ax.set_xticklabels(labels)
        ax.set_ylabel("normalized performance")
        ax.legend(loc="upper right")
        fig.tight_layout()
        out = Path(path).with_suffix(".svg")
        _save(fig, out)
    return out


def plot_dir(path):
    """Plot a run directory, or every run below an experiment directory."""
    path = Path(path)
    if not path.is_dir():
        raise PlotError(f"{path} is not a directory")
    outs = []
    if (path / "trace.csv").exists():
        outs.append(plot_trace(path))
        outs.append(plot_frames(path))
    else:
        runs = sorted(p.parent for p in path.rglob("trace.csv"))
        if not runs and not any(path.rglob("fig*.csv")):
            raise PlotError(f"{path} contains no run directories")
        for r in runs:
            outs.append(plot_trace(r))
            outs.append(plot_frames(r))
    for csv in sorted(path.rglob("fig2.csv")):
        outs.append(plot_fig2(csv))
    for csv in sorted(path.rglob("fig6.csv")):
        outs.append(plot_bars(csv, ("rt_perf", "corunner_perf")))
    for csv in sorted(path.rglob("fig8.csv")):
        outs.append(plot_bars(csv, ("frame_perf", "corunner_perf")))
    return [o for o in outs if o is not None]
