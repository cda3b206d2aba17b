import pytest

from nodalflow.grid import RadialDomain, build_grid

# criterion number -> [(passed, detail), ...]; filled by test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        entries = ACCEPTANCE[k]
        ok = all(e[0] for e in entries)
        if len(entries) == 1:
            terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {entries[0][1]}")
            continue
        n_ok = sum(e[0] for e in entries)
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {n_ok}/{len(entries)} cases")
        for passed, detail in entries:
            terminalreporter.write_line(f"    {'pass' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ball():
    return RadialDomain.ball()


@pytest.fixture(scope="session")
def grid128(ball):
    return build_grid(ball, 128)


@pytest.fixture(scope="session")
def grid256(ball):
    return build_grid(ball, 256)
