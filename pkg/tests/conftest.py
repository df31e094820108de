from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from cargo_esc.config import build_config
from cargo_esc.simulation import RunLog, run_scenario

# B and C share this base; only estimator.enabled differs.
TRANSPORT_BASE = (
    "duration=140",
    "reciprocation.enabled=true",
    "estimator.freeze_after_convergence=true",
)


@dataclass
class TimedRun:
    log: RunLog
    wall: float


_CACHE: dict[tuple, TimedRun] = {}


def cached_run(scenario: str, overrides: tuple[str, ...] = ()) -> TimedRun:
    key = (scenario, overrides)
    if key not in _CACHE:
        cfg = build_config(scenario, None, list(overrides))
        t0 = time.perf_counter()
        log = run_scenario(cfg)
        _CACHE[key] = TimedRun(log, time.perf_counter() - t0)
    return _CACHE[key]


def transport_run(esc: bool, *extra: str) -> TimedRun:
    flag = "true" if esc else "false"
    return cached_run("custom", (*TRANSPORT_BASE, f"estimator.enabled={flag}", *extra))


@pytest.fixture
def report(capsys):
    """Print a criterion line straight to the terminal, bypassing capture."""

    def _report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return _report
