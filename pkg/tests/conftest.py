import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))
os.environ.setdefault("URBANRAY_WORKERS", "1")

# criterion number -> (verdict, title, seconds); several tests may share a number
_verdicts: dict[int, tuple[str, str, float]] = {}
_WORD = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    rep = outcome.get_result()
    num, title = int(mark.args[0]), mark.args[1]
    word, _, dur = _verdicts.get(num, ("PASS", title, 0.0))
    if rep.when == "call" or rep.outcome != "passed":
        word = max(word, _WORD[rep.outcome], key=("PASS", "SKIP", "FAIL").index)
    _verdicts[num] = (word, title, dur + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_verdicts):
        word, title, dur = _verdicts[num]
        terminalreporter.write_line(f"{word} criterion {num:>2}: {title} ({dur:.2f} s)")
