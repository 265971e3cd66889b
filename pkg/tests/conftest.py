import sys

import numpy as np
import pytest

from interjection.audio_io import AudioClip

RATE = 16000


def sine(freq, seconds=1.55, amp=0.5, rate=RATE, phase=0.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return AudioClip(amp * np.sin(2 * np.pi * freq * t + phase), rate)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sine440():
    return sine(440.0)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, when that module ran."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.CRITERIA):
        title = mod.CRITERIA[n]
        if n in mod.RESULTS:
            ok, detail = mod.RESULTS[n]
            terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d} FAIL  {title}: not reached (error before check)")
