import numpy as np
import pytest

from lqe.trace_io import SessionTrace


def make_trace(rsrp, sinr=None, session_id="s", start=0):
    rsrp = np.asarray(rsrp, dtype=float)
    sinr = np.zeros_like(rsrp) if sinr is None else np.asarray(sinr, dtype=float)
    values = np.column_stack([rsrp, sinr])
    return SessionTrace(session_id, np.arange(start, start + len(rsrp)), values,
                        np.zeros(values.shape, dtype=bool))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance results, printed in the terminal summary
_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion.

    Call ``acceptance(number, name, ok, detail)``; a test that errors out
    before recording is logged as FAIL.
    """
    lines = request.config.stash[_ACCEPTANCE]
    recorded = []

    def record(number, name, ok, detail=""):
        recorded.append(number)
        lines.append((number, name, bool(ok), detail))
        assert ok, f"criterion {number} ({name}): {detail}"

    yield record
    if not recorded:
        lines.append((request.node.name, "did not complete", False, ""))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(lines, key=lambda r: str(r[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{number}] {name}: {detail}")
