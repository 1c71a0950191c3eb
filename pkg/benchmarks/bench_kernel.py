"""Compare the Cython kernel against the pure-Python fallback.

    python3 benchmarks/bench_kernel.py [--ms 200] [--repeat 3]

Runs the same 4-core scenario on each available backend, reports simulated
quanta per second and checks that both produce identical trace CSVs.
"""

import argparse
import statistics
import time

from bwlocksim.kernel import available_backends
from bwlocksim.metrics import export_csv
from bwlocksim.scenario import loads

SCENARIO = """\
name: bench
duration_ms: {ms}
regulator: {{mode: bwlock}}
tasks:
  - {{name: mplayer, kind: frame, core: 0, lock: coarse, jitter: 0.1,
     params: {{fps: 24, critical_ms: 2.9, critical_MB: 2.0, compute_ms: 7.5}}}}
  - {{name: probe, kind: latency, core: 1, params: {{accesses_per_batch: 256}}}}
  - {{name: bw2, kind: stream, core: 2, params: {{rate_MBps: 550}}}}
  - {{name: bw3, kind: stream, core: 3, params: {{rate_MBps: 900}}}}
"""


def bench(backend, ms, repeat):
    scen = loads(SCENARIO.format(ms=ms))
    times, trace = [], None
    for _ in range(repeat):
        eng = scen.build_engine(backend)
        t = time.perf_counter()
        eng.run_until(scen.duration_ns)
        times.append(time.perf_counter() - t)
        trace = export_csv(eng.log, "trace")
    quanta = scen.duration_ns // eng.config.quantum
    return statistics.median(times), quanta, trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ms", type=int, default=200, help="simulated milliseconds")
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)

    results = {b: bench(b, a.ms, a.repeat) for b in available_backends()}
    print(f"{'backend':<8} {'wall_s':>8} {'quanta/s':>12}")
    for b, (t, q, _) in results.items():
        print(f"{b:<8} {t:8.3f} {q / t:12.0f}")
    if len(results) > 1:
        (t_c, _, tr_c), (t_p, _, tr_p) = results["cython"], results["python"]
        print(f"speedup  {t_p / t_c:.1f}x")
        print("traces identical" if tr_c == tr_p else "TRACES DIFFER")
        return 0 if tr_c == tr_p else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
