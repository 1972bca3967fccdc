import subprocess
import sys

import pytest

from roiedca.cli import main
from roiedca.scenario import reference_trace_path
from roiedca.traffic import load_video_trace


def scenario(tmp_path, extra=""):
    p = tmp_path / "s.toml"
    p.write_text(f'trace = "{reference_trace_path()}"\nstrategies = ["edca"]\nseeds = [1]\n{extra}')
    return p


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario(tmp_path)), "--out", str(out)]) == 0
    for name in ("summary.csv", "comparison.txt", "manifest.csv", "trace.csv", "run_config.json",
                 "runs/edca_seed1/mac_log.csv", "runs/edca_seed1/video_packets.csv", "runs/edca_seed1/frames.csv"):
        assert (out / name).is_file(), name
    assert "EDCA" in capsys.readouterr().out


def test_report_rederives_same_table(tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", "--scenario", str(scenario(tmp_path)), "--out", str(out)])
    first = capsys.readouterr().out
    assert main(["report", "--out", str(out)]) == 0
    assert capsys.readouterr().out == first


def test_failed_run_exits_2(tmp_path, monkeypatch, capsys):
    from roiedca import experiment
    real = experiment.simulate

    def flaky(scenario, strategy, seed, *a, **kw):
        if seed == 2:
            raise RuntimeError("boom")
        return real(scenario, strategy, seed, *a, **kw)

    monkeypatch.setattr(experiment, "simulate", flaky)
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(scenario(tmp_path)), "--out", str(out), "--seeds", "1,2"])
    assert rc == 2
    summary = (out / "summary.csv").read_text()
    assert "failed" in summary and "boom" in summary
    assert (out / "runs" / "edca_seed1" / "frames.csv").is_file()


def test_bad_scenario_exits_1(tmp_path, capsys):
    p = tmp_path / "s.toml"
    p.write_text('trace = "missing.csv"\n')
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "missing.csv" in capsys.readouterr().err


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scenario", "x", "--seeds", "a,b"])
    assert exc.value.code == 1


def test_validate(tmp_path, capsys):
    assert main(["validate", "--scenario", str(scenario(tmp_path))]) == 0
    assert "ok" in capsys.readouterr().out


def test_gen_trace_reproduces_shipped_trace(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["gen-trace", "--seed", "2020", "--out", str(out)]) == 0
    assert load_video_trace(out) == load_video_trace(reference_trace_path())


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "roiedca", "validate", "--scenario", str(scenario(tmp_path))],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
