"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import subprocess
import sys
import time

import pytest

from panoepi.acceptance import CRITERIA, SuiteResult, check_triplane_file

SELFTEST_LIMIT = 300.0


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_report):
    res = CRITERIA[number](seed=number)
    acceptance_report(res.line())
    assert res.ok, res.line()


def test_criterion_12_selftest(acceptance_report):
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "panoepi.cli", "selftest"], capture_output=True, text=True, timeout=2 * SELFTEST_LIMIT
    )
    res = SuiteResult(12, "selftest exits 0 with every suite passing", time_limit=SELFTEST_LIMIT)
    res.seconds = time.perf_counter() - t0
    res.check(proc.returncode == 0, f"exit code {proc.returncode}")
    suite_lines = [ln for ln in proc.stdout.splitlines() if ln.startswith(("PASS", "FAIL"))]
    res.check(len(suite_lines) == len(CRITERIA) + 1, f"{len(suite_lines)} suite lines")
    res.check(all(ln.startswith("PASS") for ln in suite_lines), "a suite failed")
    acceptance_report(res.line())
    assert res.ok, proc.stdout + proc.stderr


def test_corrupted_file_is_reported():
    assert check_triplane_file(0).ok
    bad = check_triplane_file(0, corrupt_byte=40)
    assert not bad.ok and "checksum" in bad.details[0]
