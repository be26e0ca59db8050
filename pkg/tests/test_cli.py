import json
import subprocess
import sys

import pytest

from leofuzz.cli import main
from leofuzz.graphs import build_sequences, load_sequences, parse_graphs, parse_targets


@pytest.fixture
def fx(fixtures_path):
    def paths(name):
        return {
            "program": str(fixtures_path / f"{name}.json"),
            "targets": str(fixtures_path / f"{name}.targets"),
            "seeds": str(fixtures_path / "seeds" / name),
        }
    return paths


def test_genseq_fig3(fixtures_path, capsys):
    rc = main(["genseq", "--graphs", str(fixtures_path / "fig3.json"), "--targets", str(fixtures_path / "fig3.targets")])
    assert rc == 0
    line = json.loads(capsys.readouterr().out)
    assert line["blocks"] == ["main1", "A1", "entry", "a", "f", "g"]
    assert line["target"] == "fig3.c:64" and line["priority"] == 0


def test_genseq_empty_targets(fixtures_path, tmp_path, capsys):
    t = tmp_path / "none.targets"
    t.write_text("# nothing\n")
    assert main(["genseq", "--graphs", str(fixtures_path / "fig3.json"), "--targets", str(t)]) == 0
    assert capsys.readouterr().out == ""


def test_genseq_duplicate_targets(fixtures_path, tmp_path, capsys):
    t = tmp_path / "dup.targets"
    t.write_text("fig3.c:64\nfig3.c:64\n")
    main(["genseq", "--graphs", str(fixtures_path / "fig3.json"), "--targets", str(t)])
    a, b = capsys.readouterr().out.splitlines()
    assert a == b and json.loads(a)["priority"] == 1


def test_genseq_bad_target_names_line(fixtures_path, tmp_path, capsys):
    t = tmp_path / "bad.targets"
    t.write_text("fig3.c:64\n\nfig3.c:999\n")
    assert main(["genseq", "--graphs", str(fixtures_path / "fig3.json"), "--targets", str(t)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_genseq_round_trip(fixtures_path, tmp_path):
    out = tmp_path / "seq.jsonl"
    main(["genseq", "--graphs", str(fixtures_path / "multi10.json"),
          "--targets", str(fixtures_path / "multi10.targets"), "--out", str(out)])
    g = parse_graphs(fixtures_path / "multi10.json")
    direct = build_sequences(g, parse_targets((fixtures_path / "multi10.targets").read_text()))
    assert load_sequences(out.read_text()) == direct


def test_fuzz_p0(fx, tmp_path, capsys):
    p = fx("p0")
    rc = main(["fuzz", "--program", p["program"], "--targets", p["targets"], "--seeds", p["seeds"],
               "--out", str(tmp_path), "--deterministic", "--exec-budget", "100000", "--rng-seed", "1"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["crashes"] == ["n3", "n6"]
    assert len(list((tmp_path / "crashes").iterdir())) == 2


def test_fuzz_with_sequences_file(fx, fixtures_path, tmp_path, capsys):
    p = fx("p0")
    seq = tmp_path / "s.jsonl"
    main(["genseq", "--graphs", p["program"], "--targets", p["targets"], "--out", str(seq)])
    args = ["--program", p["program"], "--seeds", p["seeds"], "--deterministic", "--exec-budget", "50000",
            "--rng-seed", "3"]
    capsys.readouterr()
    main(["fuzz", "--sequences", str(seq)] + args)
    via_file = capsys.readouterr().out
    main(["fuzz", "--targets", p["targets"]] + args)
    assert capsys.readouterr().out == via_file


def test_fuzz_exec_budget_zero_exits_2(fx):
    p = fx("p0")
    assert main(["fuzz", "--program", p["program"], "--targets", p["targets"], "--seeds", p["seeds"],
                 "--deterministic", "--exec-budget", "0"]) == 2


def test_fuzz_config_errors_exit_1(fx, tmp_path, capsys):
    p = fx("p0")
    base = ["fuzz", "--program", p["program"], "--targets", p["targets"], "--seeds", p["seeds"]]
    assert main(base + ["--beta", "2"]) == 1
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("frobnicate = 1\n")
    assert main(base + ["--config", str(cfg)]) == 1
    assert main(base[:-2] + ["--seeds", str(tmp_path / "missing")]) == 1
    assert "error" in capsys.readouterr().err


def test_fuzz_aflgo_alias(fx, capsys):
    p = fx("fig1")
    main(["fuzz", "--program", p["program"], "--targets", p["targets"], "--seeds", p["seeds"],
          "--deterministic", "--exec-budget", "2000", "--strategy", "aflgo"])
    assert json.loads(capsys.readouterr().out)["strategy"] == "aflgo_distance"


def test_config_file_and_flag_override(fx, tmp_path, capsys):
    p = fx("p0")
    cfg = tmp_path / "c.cfg"
    cfg.write_text("strategy = seqcov\nexec_budget = 500\ndeterministic = true\n")
    main(["fuzz", "--program", p["program"], "--targets", p["targets"], "--seeds", p["seeds"],
          "--config", str(cfg), "--strategy", "mes", "--rng-seed", "0"])
    out = json.loads(capsys.readouterr().out)
    assert out["strategy"] == "mes" and out["executions"] <= 500


def test_report_stats(fx, tmp_path, capsys):
    p = fx("p0")
    main(["fuzz", "--program", p["program"], "--targets", p["targets"], "--seeds", p["seeds"],
          "--out", str(tmp_path), "--deterministic", "--exec-budget", "100000"])
    capsys.readouterr()
    # a truncated last line is tolerated
    with open(tmp_path / "stats.jsonl", "a") as fh:
        fh.write('{"event": "exe')
    assert main(["report", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "p0.c:16" in out and "end" in out


def test_bench_and_report(tmp_path, capsys):
    out = tmp_path / "bench.json"
    rc = main(["bench", "--fixtures", "p0", "--runs", "2", "--exec-budget", "20000", "--out", str(out)])
    assert rc == 0
    table = capsys.readouterr().out
    assert "Tgt." in table and "A12" in table
    report = json.loads(out.read_text())
    assert len(report["cells"]) == 3 and all(len(c["runs"]) == 2 for c in report["cells"])
    assert main(["report", str(out)]) == 0
    assert capsys.readouterr().out.strip() == table.strip()


def test_module_entry_point(fixtures_path):
    r = subprocess.run([sys.executable, "-m", "leofuzz", "genseq", "--graphs", str(fixtures_path / "fig3.json"),
                        "--targets", str(fixtures_path / "fig3.targets")], capture_output=True, text=True)
    assert r.returncode == 0 and '"main1"' in r.stdout
