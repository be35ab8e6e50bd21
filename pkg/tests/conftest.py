import pytest

from firmsim._backend import available_backends
from firmsim.config import SimConfig, TypeParams


def small_config(**kw) -> SimConfig:
    """A 10x10 Model-4-like config that runs in milliseconds."""
    base = dict(
        width=10, height=10, initial_divisions=100, steps=20, seed=7,
        params_old=TypeParams(0.5, 0.5, 0.5, 1.0, 0.5, -1.0, 8),
        params_new=TypeParams(0.4, 0.4, 0.4, 1.0, 0.5, -1.0, 3),
    )
    base.update(kw)
    return SimConfig(**base)


@pytest.fixture
def small_cfg():
    return small_config()


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
