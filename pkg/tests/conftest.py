import json
from pathlib import Path

import numpy as np
import pytest

from smoothcurate.core import ArmTrack, Trajectory

FIXTURES = Path(__file__).parent / "fixtures"
IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def line_arm(T=200, start=(0.0, 0.0, 0.0), end=(1.0, 0.5, 0.2), gripper=None, quat=IDENTITY):
    s = np.linspace(0.0, 1.0, T)[:, None]
    pos = np.asarray(start) + s * (np.asarray(end) - np.asarray(start))
    grip = np.zeros(T, dtype=bool) if gripper is None else np.asarray(gripper, dtype=bool)
    return ArmTrack(pos, np.tile(quat, (T, 1)), grip)


def sine_arm(amplitude, T=200, cycles=8):
    """Unit line along x with a perpendicular sine in y."""
    s = np.linspace(0.0, 1.0, T)
    pos = np.stack([s, amplitude * np.sin(2 * np.pi * cycles * s), np.zeros(T)], axis=1)
    return ArmTrack(pos, np.tile(IDENTITY, (T, 1)), np.zeros(T, dtype=bool))


def traj_of(*arms, id="t", dt=0.05, **meta):
    return Trajectory(id, dt, arms, meta)


@pytest.fixture(scope="session")
def oracles():
    return json.loads((FIXTURES / "oracles.json").read_text())


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str = ""):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
