"""Acceptance criteria 1-11 at full scale.

Each test prints one ``criterion k: PASS|FAIL`` line with its measured
values and runtime budget, then asserts the verdicts.  Criterion 11 reruns
``reproduce-all`` with the same seed and compares its CSV tables byte for
byte with the tables of the in-process runs.
"""

import filecmp
import os

import pytest

from regnoise.cli import main, write_envelope
from regnoise.suite import CRITERIA

_CACHE = {}


def _outcome(key):
    if key not in _CACHE:
        _CACHE[key] = dict(CRITERIA)[key](quick=False, seed=0)
    return _CACHE[key]


def _report(capsys, line):
    with capsys.disabled():
        print("\n" + line)


@pytest.mark.slow
@pytest.mark.parametrize("key", [k for k, _ in CRITERIA])
def test_criterion(key, capsys):
    out = _outcome(key)
    failed = [v for v in out.verdicts if not v.passed]
    status = "PASS" if out.passed and out.within_budget else "FAIL"
    lines = [f"criterion {key}: {status}  {out.title}  ({out.elapsed:.1f}s, budget {out.budget:g}s)"]
    for v in out.verdicts:
        note = f"  ({v.note})" if v.note else ""
        lines.append(f"    {'PASS' if v.passed else 'FAIL'}  {v.name}: {v.value:.6g}  [{v.tolerance}]{note}")
    _report(capsys, "\n".join(lines))
    assert out.within_budget, f"runtime {out.elapsed:.1f}s exceeds {out.budget:g}s"
    assert not failed, "; ".join(f"{v.name}: {v.value:.6g} [{v.tolerance}]" for v in failed)


@pytest.mark.slow
def test_criterion_11_determinism(tmp_path, capsys):
    first = tmp_path / "first" / "reproduce-all"
    for key, _ in CRITERIA:
        write_envelope(str(first / f"criterion_{int(key):02d}"), _outcome(key), {"seed": 0}, "", "")
    with capsys.disabled():
        print()
        main(["reproduce-all", "--seed", "0", "--workers", "1", "--out", str(tmp_path / "second")])
    second = tmp_path / "second" / "reproduce-all"
    compared, differing = 0, []
    for d in sorted(os.listdir(first)):
        tables = sorted(f for f in os.listdir(first / d) if f.endswith(".csv"))
        assert tables == sorted(f for f in os.listdir(second / d) if f.endswith(".csv"))
        _, mismatch, errors = filecmp.cmpfiles(first / d, second / d, tables, shallow=False)
        differing += [f"{d}/{f}" for f in mismatch + errors]
        compared += len(tables)
    status = "PASS" if compared and not differing else "FAIL"
    _report(capsys, f"criterion 11: {status}  determinism  ({compared} tables compared byte for byte,"
                    f" {len(differing)} differ)")
    assert compared > 0 and not differing, differing
