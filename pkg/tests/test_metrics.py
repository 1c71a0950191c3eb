import math

import pytest
from hypothesis import given, strategies as st

from bwlocksim.engine import simulate
from bwlocksim.metrics import (FrameRecord, MetricsError, MetricsLog, PeriodSample, Summary,
                               export_csv, normalize, parse_csv, percentile, read_summary,
                               summarize, summary_csv)
from bwlocksim.workload import make_frame_task, make_stream_task


def test_normalize_frame_time():
    base = Summary(0, {"m.mean_frame_ns": 2.9e6})
    obs = Summary(0, {"m.mean_frame_ns": 5.9e6})
    assert normalize(obs, base).get("m", "frame_perf") == pytest.approx(0.4915, abs=1e-4)


def test_normalize_identity_and_throughput():
    s = Summary(0, {"m.mean_frame_ns": 3.0, "bw.throughput_MBps": 550.0, "p.latency_ns": 80.0})
    assert all(v == 1.0 for v in normalize(s, s).values.values())
    half = Summary(0, {"bw.throughput_MBps": 275.0})
    assert normalize(half, s).get("bw", "throughput_perf") == 0.5


def test_normalize_missing_baseline():
    with pytest.raises(MetricsError):
        normalize(Summary(0, {"x.mean_frame_ns": 1.0}), Summary(0, {}))


def test_percentile_nearest_rank():
    assert percentile([5], 1) == 5 and percentile([5], 100) == 5
    assert percentile(list(range(1, 101)), 99) == 99
    assert percentile([1, 2, 3, 4], 50) == 2
    with pytest.raises(MetricsError):
        percentile([], 50)


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=50), st.floats(0.1, 100))
def test_percentile_properties(xs, p):
    v = percentile(xs, p)
    assert v in xs
    assert sum(x <= v for x in xs) >= math.ceil(p / 100 * len(xs)) - 1e-9


def test_empty_log_header_only():
    log = MetricsLog(4, 1_000_000, 10_000)
    assert export_csv(log, "trace") == "t_ns,core,misses,frac_task,frac_throttled,frac_idle,frac_interrupt\n"
    assert export_csv(log, "frames") == "task,frame,start_ns,end_ns,proc_ns\n"
    with pytest.raises(MetricsError):
        export_csv(log, "pdf")


def test_csv_format_is_exact():
    log = MetricsLog(1, 1_000_000, 10_000)
    log.samples.append(PeriodSample(0, 0, 12, 0.18, 0.81, 0.0, 0.01))
    log.frames.append(FrameRecord("m", 0, 100, 350))
    assert export_csv(log, "trace").splitlines()[1] == "0,0,12,0.18,0.81,0.0,0.01"
    assert export_csv(log, "frames").endswith("m,0,100,350,250\n")
    text = export_csv(log, "trace")
    assert "\r" not in text and " " not in text


def test_summary_roundtrip_and_trace_rows():
    e = simulate([make_frame_task(24, 2.9, 2.0, 7.5, name="m"),
                  make_stream_task(300, name="bw", affinity=1)], 1_000_000_000)
    assert len(e.log.samples) == 4000
    s = summarize(e.log)
    assert s.get("m", "frames") == 24
    back = read_summary(summary_csv(s))
    assert back.values == s.values and back.duration_ns == s.duration_ns
    header, rows = parse_csv(export_csv(e.log, "frames"))
    assert header == ("task", "frame", "start_ns", "end_ns", "proc_ns")
    assert all(int(r[4]) == int(r[3]) - int(r[2]) for r in rows)


def test_deterministic_csv():
    mk = lambda: simulate([make_frame_task(24, 2.9, 2.0, 7.5, "fine", name="m", jitter=0.1),
                           make_stream_task(900, name="bw", affinity=1)], 300_000_000, seed=3)
    a, b = mk(), mk()
    for kind in ("trace", "frames", "summary", "regulation"):
        assert export_csv(a.log, kind) == export_csv(b.log, kind)
