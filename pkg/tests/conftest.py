import os

import pytest

from summarycorr.simulation import DEFAULT_SEED, paper_scenario_grid, run_grid

_REPORT: dict[str, str] = {}


def record_criterion(number: int, title: str, failures: list[str], checked: int) -> None:
    status = "PASS" if not failures else "FAIL"
    detail = f"{checked} checks" if not failures else f"{len(failures)}/{checked} checks failed: " + "; ".join(failures)
    _REPORT[f"{number:02d}"] = f"criterion {number} [{status}] {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_REPORT):
        terminalreporter.write_line(_REPORT[key])


def _workers() -> int:
    return int(os.environ.get("SUMMARYCORR_TEST_WORKERS", os.cpu_count() or 1))


@pytest.fixture(scope="session")
def main_grid():
    """All 30 main-grid cells at 1000 replicates, keyed by (rho, k, n_min)."""
    results = run_grid(paper_scenario_grid("main", seed=DEFAULT_SEED), workers=_workers())
    return {(r.scenario.rho_true, r.scenario.k, r.scenario.n_min): r for r in results}


@pytest.fixture(scope="session")
def large_n_grid():
    results = run_grid(paper_scenario_grid("large_n", seed=DEFAULT_SEED), workers=_workers())
    return {(r.scenario.rho_true, r.scenario.k): r for r in results}
