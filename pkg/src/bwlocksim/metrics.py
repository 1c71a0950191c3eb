"""Per-period traces, frame records, run summaries and CSV export.

CSV output is byte-exact: LF line endings, no padding, integers for every
nanosecond value and ``repr`` for floats, so equal runs give equal files.
"""

import math
from dataclasses import dataclass, field

TRACE_HEADER = "t_ns,core,misses,frac_task,frac_throttled,frac_idle,frac_interrupt"
FRAMES_HEADER = "task,frame,start_ns,end_ns,proc_ns"
SUMMARY_HEADER = "key,value"
REGULATION_HEADER = "t_ns,core,budget,holder"


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodSample:
    t_ns: int  # period start
    core: int
    misses: int
    frac_task: float
    frac_throttled: float
    frac_idle: float
    frac_interrupt: float


@dataclass(frozen=True)
class FrameRecord:
    task: str
    frame: int
    start_ns: int
    end_ns: int

    @property
    def proc_ns(self):
        return self.end_ns - self.start_ns


@dataclass(frozen=True)
class RegulationSample:
    t_ns: int
    core: int
    budget: object  # lines, or None for unlimited
    holder: bool


@dataclass
class TaskStats:
    name: str
    kind: str
    core: int
    misses: int = 0
    ops: int = 0
    finish_ns: int = -1
    run_ns: int = 0


@dataclass
class MetricsLog:
    n_cores: int
    period: int
    quantum: int
    samples: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    regulation: list = field(default_factory=list)
    tasks: list = field(default_factory=list)
    duration_ns: int = 0

    def core_trace(self, core):
        return [s for s in self.samples if s.core == core]


@dataclass
class Summary:
    duration_ns: int
    values: dict  # "task.metric" -> number

    def get(self, task, metric, default=None):
        return self.values.get(f"{task}.{metric}", default)

    def tasks(self):
        return sorted({k.rsplit(".", 1)[0] for k in self.values})


def percentile(xs, p):
    """Nearest-rank percentile: the smallest value with at least p% at or below it."""
    if not xs:
        raise MetricsError("percentile of an empty sequence")
    if not 0 < p <= 100:
        raise MetricsError("p must be in (0, 100]")
    s = sorted(xs)
    rank = math.ceil(p / 100.0 * len(s))
    return s[max(rank, 1) - 1]


def summarize(log):
    """Per-task headline numbers for a finished run."""
    dur = log.duration_ns
    vals = {}
    by_task = {}
    for f in log.frames:
        by_task.setdefault(f.task, []).append(f.proc_ns)
    for ts in log.tasks:
        n = ts.name
        vals[f"{n}.misses"] = ts.misses
        if dur > 0:
            vals[f"{n}.throughput_MBps"] = ts.misses * 64 / dur * 1e3
        if ts.ops > 0:
            vals[f"{n}.accesses"] = ts.ops
            vals[f"{n}.latency_ns"] = ts.run_ns / ts.ops
        if ts.finish_ns >= 0:
            vals[f"{n}.finish_ns"] = ts.finish_ns
        fr = by_task.get(n)
        if fr:
            vals[f"{n}.frames"] = len(fr)
            vals[f"{n}.mean_frame_ns"] = sum(fr) / len(fr)
            vals[f"{n}.p99_frame_ns"] = percentile(fr, 99)
    return Summary(duration_ns=dur, values=vals)


# metric -> (direction, output name); "lower" means smaller observed is better
_NORMALIZED = {
    "mean_frame_ns": ("lower", "frame_perf"),
    "p99_frame_ns": ("lower", "p99_frame_perf"),
    "latency_ns": ("lower", "latency_perf"),
    "finish_ns": ("lower", "runtime_perf"),
    "throughput_MBps": ("higher", "throughput_perf"),
}


def normalize(observed, baseline):
    """Performance relative to a solo baseline, 1.0 meaning no slowdown.

    Times are inverted (baseline / observed) and throughputs divided
    directly (observed / baseline).  A metric with no matching baseline
    entry is an error.
    """
    out = {}
    for key, v in observed.values.items():
        task, metric = key.rsplit(".", 1)
        if metric not in _NORMALIZED:
            continue
        b = baseline.values.get(key)
        if b is None:
            raise MetricsError(f"no baseline for {key}")
        direction, name = _NORMALIZED[metric]
        if direction == "lower":
            out[f"{task}.{name}"] = b / v if v > 0 else math.inf
        else:
            out[f"{task}.{name}"] = v / b if b > 0 else math.inf
    return Summary(duration_ns=observed.duration_ns, values=out)


def _num(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if hasattr(v, "item"):  # numpy scalar
        return _num(v.item())
    return repr(float(v))


def _lines(header, rows):
    return header + "\n" + "".join(r + "\n" for r in rows)


def trace_csv(log):
    return _lines(TRACE_HEADER, (
        f"{s.t_ns},{s.core},{s.misses},{_num(s.frac_task)},{_num(s.frac_throttled)},"
        f"{_num(s.frac_idle)},{_num(s.frac_interrupt)}" for s in log.samples))


def frames_csv(log):
    return _lines(FRAMES_HEADER, (
        f"{f.task},{f.frame},{f.start_ns},{f.end_ns},{f.proc_ns}" for f in log.frames))


def summary_csv(summary):
    rows = [f"duration_ns,{summary.duration_ns}"]
    rows += [f"{k},{_num(summary.values[k])}" for k in sorted(summary.values)]
    return _lines(SUMMARY_HEADER, rows)


def regulation_csv(log):
    return _lines(REGULATION_HEADER, (
        f"{r.t_ns},{r.core},{'inf' if r.budget is None else r.budget},{int(r.holder)}"
        for r in log.regulation))


def export_csv(log, kind):
    """Render ``kind`` (trace, frames, summary, regulation) as CSV text."""
    if kind == "trace":
        return trace_csv(log)
    if kind == "frames":
        return frames_csv(log)
    if kind == "summary":
        return summary_csv(summarize(log))
    if kind == "regulation":
        return regulation_csv(log)
    raise MetricsError(f"unknown CSV kind {kind!r}")


def parse_csv(text):
    """Inverse of the exporters: header tuple and rows of strings."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    header = tuple(lines[0].split(","))
    return header, [tuple(l.split(",")) for l in lines[1:]]


def _parse_num(s):
    if s in ("inf", "-inf", "nan") or any(ch in s for ch in ".eE"):
        return float(s)
    return int(s)


def read_summary(text):
    """Parse :func:`summary_csv` output back into a :class:`Summary`."""
    header, rows = parse_csv(text)
    if header != tuple(SUMMARY_HEADER.split(",")):
        raise MetricsError("not a summary CSV")
    vals = {k: _parse_num(v) for k, v in rows}
    dur = vals.pop("duration_ns", 0)
    return Summary(duration_ns=dur, values=vals)
