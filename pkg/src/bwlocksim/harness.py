"""Run directories, cached solo baselines and the canned experiments.

A run directory holds::

    trace.csv        per-core, per-period samples
    frames.csv       one row per completed frame
    summary.csv      key,value headline numbers
    regulation.csv   per-core budget and lock-holder flag at every boundary
    normalized.csv   performance relative to solo baselines (when enabled)
    manifest.json    every resolved parameter, scenario hash, baseline hashes

Experiments write their scenario files under ``<out>/<exp>/scenarios/`` and
run each into ``<out>/<exp>/<scenario name>/``.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .kernel import BACKEND
from .metrics import (Summary, export_csv, normalize, read_summary, summarize,
                      summary_csv)
from .scenario import dumps, load, loads

log = logging.getLogger(__name__)

CSV_FILES = ("trace.csv", "frames.csv", "summary.csv", "regulation.csv")


@dataclass
class RunResult:
    out: Path
    summary: Summary
    normalized: Summary
    baselines: dict  # group -> Summary
    engine: object


def _write(path, text):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def baseline_summary(scen, cache_dir, backend=None):
    """Summary of a solo baseline scenario, computed once per content hash."""
    h = scen.content_hash(version=__version__)
    path = Path(cache_dir) / f"{h}.csv"
    if path.exists():
        log.debug("baseline cache hit %s", h[:12])
        return read_summary(path.read_text(encoding="utf-8")), h
    eng = scen.build_engine(backend)
    eng.run_until(scen.duration_ns)
    text = summary_csv(summarize(eng.log))
    path.parent.mkdir(parents=True, exist_ok=True)
    _write(path, text)
    return read_summary(text), h


def run_scenario(scen, out, backend=None, cache_dir=None):
    """Simulate ``scen`` and write a complete run directory to ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cache_dir = Path(cache_dir) if cache_dir else out.parent / ".baseline-cache"

    eng = scen.build_engine(backend)
    eng.run_until(scen.duration_ns)
    for name in CSV_FILES:
        _write(out / name, export_csv(eng.log, name[:-4]))
    summary = summarize(eng.log)

    baselines, hashes, norm = {}, {}, None
    if scen.normalize:
        merged = {}
        for g in scen.groups():
            s, h = baseline_summary(scen.baseline(g), cache_dir, backend)
            baselines[g], hashes[g] = s, h
            merged.update(s.values)
        norm = normalize(summary, Summary(summary.duration_ns, merged))
        _write(out / "normalized.csv", summary_csv(norm))

    manifest = {
        "tool": "bwlocksim",
        "version": __version__,
        "scenario_sha256": scen.content_hash(version=__version__),
        "source": Path(scen.source).name if scen.source else None,
        "parameters": scen.resolved(),
        "derived": {
            "capacity_lines_per_quantum": eng.state.cap_q,
            "minperf_lines_per_period": eng.regulator.minperf_lines,
            "memguard_reserve_lines": (eng.regulator.memguard.state.reserve
                                       if eng.regulator.memguard else None),
        },
        "baselines": hashes,
        "outputs": sorted(CSV_FILES + (("normalized.csv",) if norm else ())),
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(out=out, summary=summary, normalized=norm, baselines=baselines, engine=eng)


def run_file(path, out, overrides=None, backend=None, cache_dir=None):
    scen = load(path).with_overrides(**(overrides or {}))
    return run_scenario(scen, out, backend=backend, cache_dir=cache_dir)


# experiments

MPLAYER = dict(fps=24, critical_ms=2.9, critical_MB=2.0, compute_ms=7.5, noncritical_MB=1.88)
X11 = dict(fps=24, critical_ms=1.1, critical_MB=0.75, compute_ms=2.2, noncritical_MB=0.66)
X11_ARRIVAL_MS = 11.0  # X11 draws the frame after Mplayer's 10.4 ms decode
STREAM_MBPS = 550.0


def _stream(name, core, rate=STREAM_MBPS):
    return {"name": name, "kind": "stream", "core": core, "params": {"rate_MBps": rate}}


def _frame(name, core, params, lock="none", group=None, arrival_ms=0.0, jitter=0.0):
    t = {"name": name, "kind": "frame", "core": core, "lock": lock, "params": dict(params)}
    if group:
        t["group"] = group
    if arrival_ms:
        t["arrival_ms"] = arrival_ms
    if jitter:
        t["jitter"] = jitter
    return t


def _scenario(name, duration_ms, tasks, mode="unregulated", memguard=None, **extra):
    d = {"name": name, "duration_ms": duration_ms, "seed": 0,
         "regulator": {"mode": mode}, "tasks": tasks}
    if memguard:
        d["memguard"] = memguard
    d.update(extra)
    return d


def _run_docs(exp_dir, docs, overrides, backend):
    """Write each scenario document to disk, reload it and run it."""
    sdir = exp_dir / "scenarios"
    sdir.mkdir(parents=True, exist_ok=True)
    cache = exp_dir / ".baseline-cache"
    results = {}
    for d in docs:
        path = sdir / f"{d['name']}.yaml"
        _write(path, dumps(d))
        scen = loads(path.read_text(encoding="utf-8"), source=str(path))
        scen = scen.with_overrides(**(overrides or {}))
        results[d["name"]] = run_scenario(scen, exp_dir / d["name"], backend, cache)
    return results


def _csv(header, rows):
    return ",".join(header) + "\n" + "".join(",".join(_fmt(v) for v in r) + "\n" for r in rows)


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


FIG2_RATES = tuple(range(100, 1300, 100))


def exp_fig2(out, overrides=None, backend=None, rates=FIG2_RATES, duration_ms=100):
    """Probe latency on core 0 against three co-running streams of rising rate."""
    exp_dir = Path(out) / "fig2"
    docs = []
    for r in rates:
        tasks = [{"name": "latency", "kind": "latency", "core": 0,
                  "params": {"accesses_per_batch": 12500}}]
        tasks += [_stream(f"bw{c}", c, float(r)) for c in (1, 2, 3)]
        docs.append(_scenario(f"fig2-{r:04d}", duration_ms, tasks))
    res = _run_docs(exp_dir, docs, overrides, backend)
    rows = []
    for r, d in zip(rates, docs):
        rr = res[d["name"]]
        lat = rr.summary.get("latency", "latency_ns")
        base = rr.baselines["latency"].get("latency", "latency_ns")
        rows.append((int(r), lat, base, lat / base))
    text = _csv(("corunner_MBps", "latency_ns", "solo_latency_ns", "normalized_latency"), rows)
    _write(exp_dir / "fig2.csv", text)
    return rows


FIG6_MODES = (
    ("default", "none", "unregulated"),
    ("memguard", "none", "memguard"),
    ("fine", "fine", "bwlock"),
    ("coarse", "coarse", "bwlock"),
)


def exp_fig6(out, overrides=None, backend=None, duration_ms=2000):
    """Mplayer + X11 + two streams under Default, MemGuard, fine and coarse BwLock."""
    exp_dir = Path(out) / "fig6"
    docs = []
    for label, lock, mode in FIG6_MODES:
        tasks = [_frame("mplayer", 0, MPLAYER, lock, group="rt"),
                 _frame("x11", 1, X11, lock, group="rt", arrival_ms=X11_ARRIVAL_MS),
                 _stream("bw2", 2), _stream("bw3", 3)]
        mg = {"reserve_MBps": [450, 450, 100, 100], "reclaim": True} if mode == "memguard" else None
        docs.append(_scenario(f"fig6-{label}", duration_ms, tasks, mode, mg))
    res = _run_docs(exp_dir, docs, overrides, backend)
    rows = []
    for (label, _, _), d in zip(FIG6_MODES, docs):
        rr = res[d["name"]]
        n = rr.normalized
        obs = sum(rr.summary.get(s, "throughput_MBps") for s in ("bw2", "bw3"))
        base = sum(rr.baselines[s].get(s, "throughput_MBps") for s in ("bw2", "bw3"))
        rows.append((label, n.get("mplayer", "frame_perf"), n.get("x11", "frame_perf"),
                     obs, obs / base))
    text = _csv(("mode", "rt_perf", "x11_perf", "corunner_MBps", "corunner_perf"), rows)
    _write(exp_dir / "fig6.csv", text)
    return rows


FIG8_MODES = (("default", "none", "unregulated"), ("fine", "fine", "bwlock"),
              ("coarse", "coarse", "bwlock"))
FIG8_JITTER = 0.1


def exp_fig8(out, overrides=None, backend=None, duration_ms=2000):
    """Overloaded system: every core time-shares one Mplayer and one stream."""
    exp_dir = Path(out) / "fig8"
    docs = []
    for label, lock, mode in FIG8_MODES:
        tasks = []
        for c in range(4):
            tasks.append(_frame(f"mplayer{c}", c, MPLAYER, lock, jitter=FIG8_JITTER))
            tasks.append(_stream(f"bw{c}", c))
        docs.append(_scenario(f"fig8-{label}", duration_ms, tasks, mode))
    control = [_frame(f"mplayer{c}", c, MPLAYER, "none", jitter=FIG8_JITTER) for c in range(4)]
    docs.append(_scenario("fig8-control", duration_ms, control, "unregulated", normalize=False))
    res = _run_docs(exp_dir, docs, overrides, backend)

    def frame_ns(s):
        return sum(s.get(f"mplayer{c}", "mean_frame_ns") for c in range(4)) / 4

    ctrl = frame_ns(res["fig8-control"].summary)
    rows = []
    for label, _, _ in FIG8_MODES:
        rr = res[f"fig8-{label}"]
        ft = frame_ns(rr.summary)
        solo = sum(rr.baselines[f"mplayer{c}"].get(f"mplayer{c}", "mean_frame_ns")
                   for c in range(4)) / 4
        tp = sum(rr.summary.get(f"bw{c}", "throughput_MBps") for c in range(4))
        tb = sum(rr.baselines[f"bw{c}"].get(f"bw{c}", "throughput_MBps") for c in range(4))
        rows.append((label, ft, solo / ft, ft / ctrl, tp, tp / tb))
    rows.append(("control", ctrl, float("nan"), 1.0, 0.0, 0.0))
    text = _csv(("mode", "frame_ns", "frame_perf", "frame_vs_control", "corunner_MBps",
                 "corunner_perf"), rows)
    _write(exp_dir / "fig8.csv", text)
    return rows


TABLE2_PERIODS_US = (100, 250, 500, 1000, 2500)


def exp_table2(out, overrides=None, backend=None, periods_us=TABLE2_PERIODS_US,
               work_ms=200.0):
    """Timer-interrupt overhead of a CPU-only benchmark versus regulation period."""
    exp_dir = Path(out) / "table2"
    overrides = dict(overrides or {})
    overrides.pop("period_us", None)  # the sweep sets the period itself
    docs = []
    for p in periods_us:
        for h, tag in ((None, "irq"), (0, "noirq")):
            d = _scenario(f"table2-{p:04d}us-{tag}", work_ms * 1.2 + 10,
                          [{"name": "bench", "kind": "compute", "core": 0,
                            "params": {"work_ms": work_ms}}],
                          "bwlock", normalize=False)
            d["regulator"]["period_us"] = p
            if h is not None:
                d["engine"] = {"handler_ns": h}
            docs.append(d)
    res = _run_docs(exp_dir, docs, overrides, backend)
    rows = []
    for p in periods_us:
        rh = res[f"table2-{p:04d}us-irq"]
        r0 = res[f"table2-{p:04d}us-noirq"]
        th = rh.summary.get("bench", "finish_ns")
        t0 = r0.summary.get("bench", "finish_ns")
        if th is None or t0 is None:
            raise RuntimeError(f"benchmark did not finish at period {p}us")
        h = rh.engine.config.handler_ns
        period = rh.engine.reg_config.period
        rows.append((int(p), t0, th, 100.0 * (th - t0) / t0, 100.0 * h / period))
    text = _csv(("period_us", "t0_ns", "th_ns", "overhead_pct", "handler_over_period_pct"), rows)
    _write(exp_dir / "table2.csv", text)
    return rows


EXPERIMENTS = {"fig2": exp_fig2, "fig6": exp_fig6, "fig8": exp_fig8, "table2": exp_table2}


def backend_name(backend=None):
    return backend or BACKEND
