import json

import pytest

from bwlocksim.cli import main

from test_scenario import MINIMAL

FRAMES = MINIMAL + """\
  - name: m
    kind: frame
    core: 0
    lock: coarse
    params: {fps: 24, critical_ms: 2.9, critical_MB: 2.0, compute_ms: 7.5}
"""


@pytest.fixture
def scen(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(MINIMAL)
    return p


def test_run_writes_directory(scen, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", str(scen), "--out", str(out)]) == 0
    for f in ("trace.csv", "frames.csv", "summary.csv", "regulation.csv",
              "normalized.csv", "manifest.json"):
        assert (out / f).exists(), f
    trace = (out / "trace.csv").read_text().splitlines()
    assert len([l for l in trace[1:] if l.split(",")[1] == "1"]) == 100
    m = json.loads((out / "manifest.json").read_text())
    assert m["parameters"]["engine"]["quantum"] == 10_000
    assert m["parameters"]["regulator"]["mode"] == "unregulated"
    assert m["derived"]["minperf_lines_per_period"] == 1562
    assert set(m["baselines"]) == {"bw"}


def test_same_file_twice_identical(scen, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(scen), "--out", str(a)]) == 0
    assert main(["run", str(scen), "--out", str(b)]) == 0
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_baseline_cache_reused(scen, tmp_path):
    out = tmp_path / "r1"
    main(["run", str(scen), "--out", str(out)])
    cache = tmp_path / ".baseline-cache"
    files = list(cache.iterdir())
    assert len(files) == 1
    stamp = files[0].stat().st_mtime_ns
    main(["run", str(scen), "--out", str(tmp_path / "r2")])
    assert files[0].stat().st_mtime_ns == stamp
    main(["run", str(scen), "--out", str(tmp_path / "r3"), "--seed", "5"])
    assert len(list(cache.iterdir())) == 2


def test_flags_reach_manifest(scen, tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(scen), "--out", str(out), "--period", "500", "--minperf", "200",
                 "--quantum", "5", "--seed", "3"]) == 0
    p = json.loads((out / "manifest.json").read_text())["parameters"]
    assert p["regulator"]["period"] == 500_000 and p["regulator"]["minperf_MBps"] == 200
    assert p["engine"]["quantum"] == 5_000 and p["seed"] == 3


def test_validation_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL.replace("core: 1", "core: 7"))
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "bad.yaml:7:" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    s = tmp_path / "s.yaml"
    s.write_text(MINIMAL)
    assert main(["run", str(s), "--period", "15"]) == 2
    assert main(["run", str(s), "--period", "-1"]) == 2
    assert main(["exp", "fig99"]) == 2
    assert main([]) == 2
    assert main(["--version"]) == 0


def test_runtime_error_exit_3(tmp_path, capsys):
    s = tmp_path / "s.yaml"
    s.write_text(MINIMAL + "lock_events:\n  - {at_ms: 1, task: 9, val: 1}\n")
    assert main(["run", str(s), "--out", str(tmp_path / "o")]) == 3
    assert "unknown task" in capsys.readouterr().err


def test_plot_run(tmp_path, capsys):
    s = tmp_path / "s.yaml"
    s.write_text(FRAMES)
    out = tmp_path / "run"
    assert main(["run", str(s), "--out", str(out)]) == 0
    assert main(["plot", str(out)]) == 0
    svg = (out / "trace.svg").read_text()
    assert svg.count("Core") >= 4
    assert (out / "frames.svg").exists()
    first = (out / "trace.svg").read_bytes(), (out / "frames.svg").read_bytes()
    assert main(["plot", str(out)]) == 0
    assert first == ((out / "trace.svg").read_bytes(), (out / "frames.svg").read_bytes())


def test_plot_empty_frames_warns(scen, tmp_path, caplog):
    out = tmp_path / "run"
    main(["run", str(scen), "--out", str(out)])
    with caplog.at_level("WARNING"):
        assert main(["plot", str(out)]) == 0
    assert not (out / "frames.svg").exists()
    assert "no frames" in caplog.text


def test_plot_bad_dir(tmp_path):
    assert main(["plot", str(tmp_path / "nope")]) == 2
    assert main(["plot", str(tmp_path)]) == 2


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["required"] == ["name", "duration_ms", "tasks"]


def test_exp_table2_and_plot(tmp_path, capsys):
    assert main(["exp", "table2", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("period_us,t0_ns,th_ns,overhead_pct")
    assert (tmp_path / "table2" / "scenarios" / "table2-1000us-irq.yaml").exists()
    assert main(["plot", str(tmp_path / "table2")]) == 0
