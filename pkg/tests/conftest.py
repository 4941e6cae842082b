import contextlib

import pytest

_RESULTS = pytest.StashKey[dict]()


class _Record:
    detail = ""


@pytest.fixture
def acceptance(request):
    """Context manager recording a PASS/FAIL line for an acceptance criterion."""
    results = request.config.stash.setdefault(_RESULTS, {})

    @contextlib.contextmanager
    def check(criterion, title):
        rec = _Record()
        try:
            yield rec
        except BaseException as exc:
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            results.setdefault(criterion, []).append((False, title, f"{rec.detail} [{msg}]".strip()))
            print(f"criterion {criterion}: FAIL  {title}  {rec.detail}")
            raise
        results.setdefault(criterion, []).append((True, title, rec.detail))
        print(f"criterion {criterion}: PASS  {title}  {rec.detail}")

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(results, key=lambda c: (int("".join(ch for ch in c if ch.isdigit())), c)):
        parts = results[criterion]
        ok = all(p for p, _, _ in parts)
        titles = "; ".join(f"{t} ({d})" if d else t for _, t, d in parts)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {titles}")
