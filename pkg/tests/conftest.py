from collections import defaultdict

import pytest

_RESULTS = defaultdict(list)


class CriterionReport:
    """Collects per-part outcomes of the numbered acceptance criteria."""

    def __call__(self, number: int, part: str, ok: bool, detail: str = "") -> bool:
        _RESULTS[number].append((part, bool(ok), detail))
        return bool(ok)


@pytest.fixture(scope="session")
def criterion():
    return CriterionReport()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_RESULTS):
        parts = _RESULTS[k]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p} {'ok' if ok else 'FAILED'} ({d})" if d else f"{p} {'ok' if ok else 'FAILED'}"
                           for p, ok, d in parts)
        tr.write_line(f"criterion {k:2d}: {status}  {detail}")
