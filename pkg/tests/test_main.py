from __future__ import annotations

from src.envs.tasks import TASKS_DIR
from src.main import EXIT_INPUT, main

OFFICE_1 = str(TASKS_DIR / "office_1.rm")


def test_validate_ok(capsys):
    assert main(["validate", OFFICE_1]) == 0
    assert capsys.readouterr().out.strip().endswith("ok props=3 interior=2 terminal=2 edges=6")


def test_validate_reports_gap(tmp_path, capsys):
    path = tmp_path / "gap.rm"
    path.write_text('props: a\nstate: u0 init\nstate: t terminal\nedge: u0 -> t if "a" reward 1\n')
    assert main(["validate", str(path)]) == 1
    err = capsys.readouterr().err
    assert "invalid" in err
    assert "no edge matches" in err


def test_validate_syntax_error(tmp_path, capsys):
    path = tmp_path / "broken.rm"
    path.write_text("props: a\nstate u0 init\n")
    assert main(["validate", str(path)]) == EXIT_INPUT
    assert "2:" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "missing.rm")]) == EXIT_INPUT


def test_shape_prints_values_and_edges(capsys):
    assert main(["shape", OFFICE_1]) == 0
    lines = capsys.readouterr().out.splitlines()
    u0 = next(line for line in lines if line.startswith("u0 ") and "interior" in line)
    assert u0.split()[2:] == ["0.900000", "-0.900000"]
    done = next(line for line in lines if line.startswith("u1 ") and "done" in line)
    assert done.split()[2:4] == ["1.000000", "2.000000"]


def test_oracle_office_task_1(capsys):
    assert main(["oracle", "--env", "office", "--task", "1"]) == 0
    out = capsys.readouterr().out
    last = out.strip().splitlines()[-1].split()
    assert last == ["round-robin", "8", "1", "0.125000"]


def test_tasks_listing(capsys):
    assert main(["tasks", "--env", "office"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert "deliver-coffee " in lines[0]


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "curve.csv"
    raw = tmp_path / "raw.csv"
    code = main([
        "run", "--tasks", "1", "--trials", "2", "--steps", "400", "--window", "100", "--eval-every", "100",
        "--max-episode-steps", "100", "--out", str(out), "--raw-out", str(raw), "--gnuplot-stub",
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert "# algo=crm" in lines
    assert "# tasks=1" in lines
    assert lines[-4:][0].startswith("100,")
    assert len(raw.read_text().splitlines()) == 5
    assert (tmp_path / "curve.gp").exists()


def test_run_rejects_inconsistent_settings(tmp_path, capsys):
    code = main(["run", "--steps", "10", "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_INPUT
    assert not (tmp_path / "x.csv").exists()
