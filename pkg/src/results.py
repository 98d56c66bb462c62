from __future__ import annotations

import csv
import logging
import os
import tempfile
from collections.abc import Callable, Iterable, Sequence
from pathlib import Path
from typing import TYPE_CHECKING, TextIO

import numpy as np

if TYPE_CHECKING:
    from .harness import CurvePoint

logger = logging.getLogger(__name__)

CURVE_HEADER = ["step", "p25", "p50", "p75"]


class ResultsWriteError(Exception):
    """Raised when a results file cannot be written."""


def fmt(x: float) -> str:
    return f"{x:.6g}"


class ResultWriter:
    """Writes curve CSVs and their companions; every file lands via a temp file and os.replace."""

    def __init__(self, out: str | Path) -> None:
        self.out = Path(out)

    def _atomic_write(self, target: Path, write: Callable[[TextIO], None]) -> Path:
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_path = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
        except OSError as exc:
            raise ResultsWriteError(f"{target}: {exc}") from exc
        try:
            with os.fdopen(fd, "w", newline="") as f:
                write(f)
            os.replace(tmp_path, target)
        except BaseException as exc:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass
            if isinstance(exc, OSError):
                raise ResultsWriteError(f"{target}: {exc}") from exc
            raise
        logger.debug("Wrote %s", target)
        return target

    def _csv(
        self,
        target: Path,
        comments: Iterable[str],
        header: list[str],
        rows: Iterable[Sequence[str]],
    ) -> Path:
        def write(f: TextIO) -> None:
            for line in comments:
                f.write(f"# {line}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)

        return self._atomic_write(target, write)

    def write_curve(self, points: Sequence[CurvePoint], meta: Iterable[tuple[str, str]]) -> Path:
        """`# key=value` lines, then step,p25,p50,p75 rows."""
        rows = [[str(p.step), fmt(p.p25), fmt(p.p50), fmt(p.p75)] for p in points]
        return self._csv(self.out, [f"{k}={v}" for k, v in meta], CURVE_HEADER, rows)

    def write_trials(self, path: str | Path, steps: Sequence[int], series: np.ndarray) -> Path:
        """One row per checkpoint, one column per trial."""
        header = ["step", *(f"trial_{i}" for i in range(series.shape[0]))]
        rows = [[str(step), *(fmt(float(x)) for x in series[:, n])] for n, step in enumerate(steps)]
        return self._csv(Path(path), (), header, rows)

    def write_gnuplot(self, title: str = "") -> Path:
        target = self.out.with_suffix(".gp")
        name = self.out.name
        script = (
            "set datafile separator ','\n"
            "set key bottom right\n"
            "set xlabel 'training steps'\n"
            "set ylabel 'normalized reward per step'\n"
            f"set title '{title}'\n"
            f"plot '{name}' using 1:2:4 with filledcurves title '25-75%', \\\n"
            f"     '{name}' using 1:3 with lines lw 2 title 'median'\n"
        )
        return self._atomic_write(target, lambda f: f.write(script))
