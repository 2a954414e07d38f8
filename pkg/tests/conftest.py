import re

import pytest

_RESULTS = {}


@pytest.fixture
def criterion(request):
    """Record the acceptance line for the ``test_cN_*`` test using it; an exception counts as FAIL."""
    cid = "C" + re.match(r"test_c(\d+)_", request.node.name).group(1)

    def record(ok, detail):
        _RESULTS[cid] = ("PASS" if ok else "FAIL", detail)
        return ok

    yield record
    _RESULTS.setdefault(cid, ("FAIL", "raised before reporting"))


def skip_criterion(request_or_cid, reason):
    _RESULTS[request_or_cid] = ("SKIP", reason)
    pytest.skip(reason)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: int(c[1:])):
        status, detail = _RESULTS[cid]
        terminalreporter.write_line(f"{cid:>4} {status}  {detail}")
