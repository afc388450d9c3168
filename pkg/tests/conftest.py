import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reliablocks.avs import AvsParams
from reliablocks.scoring import ScoringParams

DATA = Path(__file__).parent / "data"
GOLDEN_FEED = DATA / "golden_feed.jsonl"
GOLDEN_EXIT_COUNT = 48  # cross-checked with oracles.poisson_count_oracle(42, 100, 0.5)


@pytest.fixture
def desk_params():
    """Desk-scale finality: 100 blocks."""
    return ScoringParams(finality_depth=100)


@pytest.fixture
def avs_params():
    return AvsParams(
        min_stake=10**18,
        reward_per_task=10**16,
        initial_reward_pool=10**21,
        operator_stake=10**22,
    )


@pytest.fixture
def golden_feed_path():
    return GOLDEN_FEED


@pytest.fixture
def config_file(tmp_path):
    """Write a desk-scale config and return its path."""
    path = tmp_path / "reliablocks.toml"
    path.write_text(
        "[scoring]\nfinality_depth = 100\n\n"
        f"[paths]\nlog = \"{tmp_path / 'r.log'}\"\nrounds = \"{tmp_path / 'rounds.jsonl'}\"\n"
    )
    return path


_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion, reported in the summary")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion_label", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid] = (marker, "PASS" if report.outcome == "passed" else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion_label = m.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in sorted(_ACCEPTANCE.values()):
        terminalreporter.write_line(f"{status}  {label}")
