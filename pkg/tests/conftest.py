from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from windcast.synthetic import bundled, write_series_csv


@pytest.fixture
def write_rows(tmp_path):
    """Write ``(timestamp, value)`` rows to a CSV and return its path."""

    def _write(rows, name="data.csv", header="timestamp,wind_speed"):
        path = tmp_path / name
        lines = [header] + [f"{t},{v}" for t, v in rows]
        path.write_text("\n".join(lines) + "\n")
        return path

    return _write


@pytest.fixture
def series_csv(tmp_path):
    def _write(values, name="series.csv") -> Path:
        return write_series_csv(np.asarray(values, dtype=float), tmp_path / name)

    return _write


@pytest.fixture(scope="session")
def synthetic_path() -> Path:
    return bundled("synthetic_wind.csv")


@pytest.fixture(scope="session")
def white_noise_path() -> Path:
    return bundled("white_noise.csv")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
