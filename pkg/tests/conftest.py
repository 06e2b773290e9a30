import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("kanfis", deadline=None, max_examples=60)
settings.load_profile("kanfis")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    return path


# acceptance verdicts, printed once at the end of the run
_VERDICTS = {}
_LABEL = {True: "PASS", False: "FAIL", None: "SKIP"}


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)`` and assert it; ``passed=None`` skips."""

    def record(criterion, passed, detail):
        _VERDICTS[criterion] = (passed, detail)
        if passed is None:
            pytest.skip(f"criterion {criterion}: {detail}")
        assert passed, f"criterion {criterion}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS):
        passed, detail = _VERDICTS[key]
        terminalreporter.write_line(f"criterion {key:>2}: {_LABEL[passed]}  {detail}")
