import pytest

from intersection_exponents.io import load_published_table

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def published_tables():
    keys = ["1,1", "2,2", "1,1,1", "1,1,2", "1,1,1,1", "1,1,1,2", "1,1,1,1,1"]
    return {k: load_published_table(k) for k in keys}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def prefix_campaign():
    """10^6 samples of (1,1) over 30..103, shared by the slow distribution checks."""
    from intersection_exponents.multilevel import build_schedule, run_campaign
    from intersection_exponents.walkers import PacketSpec

    return run_campaign(PacketSpec((1, 1)), build_schedule(30, "1.1", 103), 1_000_000,
                        base_seed=0x1F2E3D4C, worker_count=1)
