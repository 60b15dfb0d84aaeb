import math
import os

import numpy as np
import pytest

from sccl.geometry import ScanGeometry

# distances of the reference scanner, mm
BENCH_SO = 45.790
BENCH_SD = 194.580


@pytest.fixture
def bench_geom():
    return ScanGeometry.from_degrees(
        45.0, dist_so=BENCH_SO, dist_sd=BENCH_SD, n_views=256, det_rows=768, det_cols=768, pitch_u=0.17, pitch_v=0.17
    )


def small_geom(n_views=64, det=160, pitch=0.5, tilt_deg=45.0):
    return ScanGeometry.from_degrees(
        tilt_deg, dist_so=BENCH_SO, dist_sd=BENCH_SD, n_views=n_views, det_rows=det, det_cols=det, pitch_u=pitch, pitch_v=pitch
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def full_scale_enabled():
    return os.environ.get("SCCL_FULL_SCALE") == "1"


# acceptance results: criterion -> list of (check, passed, detail)
ACCEPTANCE = {}


def record(criterion, check, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        if all(c[0] == "skipped" for c in checks):
            tr.write_line(f"criterion {crit}: SKIP  {checks[0][2]}")
            continue
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        tr.write_line(f"criterion {crit}: {verdict}")
        for name, ok, detail in checks:
            tr.write_line(f"    [{'ok' if ok else 'FAIL'}] {name}: {detail}")
