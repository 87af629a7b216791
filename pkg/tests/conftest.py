import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dualsource.cli import load_instance
from dualsource.core import InstanceParams


def synthetic(i: int) -> InstanceParams:
    return load_instance(f"synthetic-{i:02d}")


@pytest.fixture(scope="session")
def micro() -> InstanceParams:
    return load_instance("micro")


@pytest.fixture(scope="session")
def small_nb() -> InstanceParams:
    """Negative-binomial demand, AM failing faster, CM batches of two."""
    return InstanceParams(
        n=3, s_max=3, mu_c=0.05, mu_a=0.1, var_c=0.08, var_a=0.2, l_c=2, l_a=1,
        c_c=100, c_a=160, k_c=30, k_a=0, q_c=2, m=40, h=3, b=200,
    )


@pytest.fixture(scope="session")
def am_reliable() -> InstanceParams:
    """AM items fail less often, so AM stock is installed first."""
    return InstanceParams.poisson(
        n=3, s_max=3, mu_c=0.12, mu_a=0.06, l_c=2, l_a=1,
        c_c=100, c_a=130, k_c=10, k_a=5, q_c=1, m=40, h=3, b=200,
    )


ACCEPTANCE_LINES: list = []


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
