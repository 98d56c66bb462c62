from __future__ import annotations

import numpy as np
import pytest

from src.harness import CurvePoint
from src.results import CURVE_HEADER, ResultsWriteError, ResultWriter, fmt

META = [("env", "office"), ("algo", "crm"), ("seed", "0")]


def test_curve_file_layout(tmp_path):
    out = tmp_path / "run.csv"
    points = [CurvePoint(100, 0.1, 0.25, 0.5), CurvePoint(200, 0.5, 0.75, 1.0), CurvePoint(300, 1.0, 1.0, 1.0)]
    ResultWriter(out).write_curve(points, META)
    raw = out.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[:3] == ["# env=office", "# algo=crm", "# seed=0"]
    assert lines[3] == ",".join(CURVE_HEADER)
    assert lines[4:] == ["100,0.1,0.25,0.5", "200,0.5,0.75,1", "300,1,1,1"]


def test_empty_curve_has_only_headers(tmp_path):
    out = tmp_path / "empty.csv"
    ResultWriter(out).write_curve([], META)
    assert out.read_text().splitlines()[-1] == "step,p25,p50,p75"


def test_creates_parent_directories(tmp_path):
    out = tmp_path / "nested" / "deeper" / "run.csv"
    ResultWriter(out).write_curve([CurvePoint(1, 0.0, 0.0, 0.0)], [])
    assert out.read_text() == "step,p25,p50,p75\n1,0,0,0\n"
    assert list(out.parent.glob("*.tmp")) == []


def test_trials_file(tmp_path):
    path = tmp_path / "raw.csv"
    series = np.array([[0.1, 0.2], [0.3, 0.4]])
    ResultWriter(tmp_path / "run.csv").write_trials(path, [10, 20], series)
    assert path.read_text().splitlines() == ["step,trial_0,trial_1", "10,0.1,0.3", "20,0.2,0.4"]


def test_gnuplot_stub_sits_next_to_curve(tmp_path):
    target = ResultWriter(tmp_path / "run.csv").write_gnuplot("office crm")
    assert target == tmp_path / "run.gp"
    script = target.read_text()
    assert "plot 'run.csv'" in script
    assert "set title 'office crm'" in script


def test_write_failure_is_reported(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ResultsWriteError):
        ResultWriter(blocker / "run.csv").write_curve([], META)


def test_fmt():
    assert fmt(1 / 3) == "0.333333"
    assert fmt(200000.0) == "200000"
    assert fmt(1e-7) == "1e-07"
