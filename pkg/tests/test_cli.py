import json
import subprocess
import sys
from pathlib import Path

import pytest

from ucpilot.cli import main
from ucpilot.instgen import gen_instance, oracle_scale_spec
from ucpilot.scenario import render_scenario


def _run(args, cwd):
    return main(["--out-root", str(cwd / "runs")] + args)


def _latest_run(cwd, cmd):
    runs = sorted((cwd / "runs").glob(f"*-{cmd}*"))
    assert runs, f"no run dir for {cmd}"
    return runs[-1]


@pytest.fixture
def tiny_scenario(tmp_path):
    schema = gen_instance(oracle_scale_spec(3, 6), 77)
    path = tmp_path / "tiny.ucs"
    path.write_text(render_scenario(schema))
    return path


def test_pipeline_exit_zero(tmp_path, tiny_scenario):
    rc = _run(["pipeline", str(tiny_scenario), "--time-limit", "60"], tmp_path)
    assert rc == 0
    run = _latest_run(tmp_path, "pipeline")
    report = json.loads((run / "report.json").read_text())
    assert report["solver"]["status"] in ("Optimal", "Feasible")
    assert (run / "resolved_config.json").exists()
    assert (run / "figures" / "dispatch.png").exists()


def test_pipeline_missing_file_config_error(tmp_path):
    assert _run(["pipeline", str(tmp_path / "absent.ucs")], tmp_path) == 6


def test_unknown_flag_exit_six(tmp_path):
    assert main(["--bogus-flag", "pipeline", "x"]) == 6


def test_pipeline_empty_scenario_extraction_failure(tmp_path):
    bad = tmp_path / "empty.ucs"
    bad.write_text("   \n")
    assert _run(["pipeline", str(bad)], tmp_path) == 2


def test_pipeline_irreparable_exit_three(tmp_path):
    schema = gen_instance(oracle_scale_spec(2, 4), 5)
    text = render_scenario(schema)
    # multiply demand far beyond fleet capacity: capacity shortfall, no rule fix
    lines = []
    for line in text.splitlines():
        if line and line[0].isdigit() and ":" in line:
            t, _, v = line.partition(":")
            lines.append(f"{t}: {float(v) * 50}")
        else:
            lines.append(line)
    bad = tmp_path / "hopeless.ucs"
    bad.write_text("\n".join(lines) + "\n")
    rc = _run(["pipeline", str(bad)], tmp_path)
    assert rc == 3
    run = _latest_run(tmp_path, "pipeline")
    diag = json.loads((run / "diagnostics.json").read_text())
    assert diag["repair_transcript"]["outcome"] in ("exhausted", "unrepairable")


def test_pipeline_determinism_byte_identical(tmp_path, tiny_scenario):
    assert _run(["pipeline", str(tiny_scenario), "--seed", "3", "--no-figures"], tmp_path) == 0
    first = _latest_run(tmp_path, "pipeline")
    assert _run(["pipeline", str(tiny_scenario), "--seed", "3", "--no-figures"], tmp_path) == 0
    second = _latest_run(tmp_path, "pipeline")
    assert first != second
    a = (first / "report.json").read_bytes()
    b = (second / "report.json").read_bytes()
    assert a == b


def test_validate_clean_and_dirty(tmp_path, tiny_scenario):
    assert _run(["validate", str(tiny_scenario)], tmp_path) == 0
    dirty = tmp_path / "dirty.ucs"
    dirty.write_text(tiny_scenario.read_text().replace("HORIZON: 6 hourly",
                                                       "HORIZON: 9 hourly"))
    assert _run(["validate", str(dirty)], tmp_path) == 3


def test_solve_schema_file(tmp_path):
    schema = gen_instance(oracle_scale_spec(2, 4), 8)
    path = tmp_path / "inst.ucjson"
    schema.save(path)
    rc = _run(["solve", str(path), "--no-figures"], tmp_path)
    assert rc == 0
    run = _latest_run(tmp_path, "solve")
    report = json.loads((run / "report.json").read_text())
    assert report["solver"]["status"] == "Optimal"


def test_gen_small_scale_layout(tmp_path):
    out = tmp_path / "corpus"
    rc = _run(["gen", "--preset", "small-scale", "--out", str(out), "--per-size", "1"],
              tmp_path)
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest["families"]) == ["10", "3", "30", "60"]
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert dirs == ["03-units", "10-units", "30-units", "60-units"]


def test_gen_cohorts_and_bench_runtime(tmp_path):
    out = tmp_path / "cohorts"
    rc = _run(["gen", "--preset", "oracle-scale", "--out", str(out), "--units", "2",
               "--runtime-seeds", "0:3", "--accuracy-seeds", "3:6"], tmp_path)
    assert rc == 0
    rc = _run(["bench", "--cohort", "runtime", "--instances", str(out / "runtime"),
               "--time-limit", "30", "--no-figures"], tmp_path)
    assert rc == 0
    run = _latest_run(tmp_path, "bench")
    summary = json.loads((run / "runtime_summary.json").read_text())
    assert summary["instances"] == 3
    assert (run / "runtime_records.csv").exists()


def test_gen_seed_overlap_config_error(tmp_path):
    rc = _run(["gen", "--preset", "oracle-scale", "--out", str(tmp_path / "x"),
               "--runtime-seeds", "0:3", "--accuracy-seeds", "2:5"], tmp_path)
    assert rc == 6


def test_train_policy_and_guided_solve(tmp_path):
    policy = tmp_path / "policy.npz"
    rc = _run(["train-policy", "--out", str(policy), "--instances", "4",
               "--probe-budget", "8", "--epochs", "30"], tmp_path)
    assert rc == 0
    assert policy.exists()
    schema = gen_instance(oracle_scale_spec(3, 5), 31)
    spath = tmp_path / "g.ucjson"
    schema.save(spath)
    rc = _run(["solve", str(spath), "--guidance", "on", "--policy", str(policy),
               "--no-figures"], tmp_path)
    assert rc == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ucpilot.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "pipeline" in proc.stdout
