import pytest

from rsgslm.dataset import BENCHMARK_SPLIT, benchmark_spec, generate_synthetic, make_split
from rsgslm.trainer import METHODS, TrainConfig, prepare_graphs, run_repeated

BENCHMARK_RUNS = 10


@pytest.fixture(scope="session")
def benchmark_dataset():
    return generate_synthetic(benchmark_spec())


@pytest.fixture(scope="session")
def benchmark_graphs(benchmark_dataset):
    """Graph stage of the pinned benchmark on its first split."""
    return prepare_graphs(make_split(benchmark_dataset, BENCHMARK_SPLIT), TrainConfig())


@pytest.fixture(scope="session")
def benchmark_runs(benchmark_dataset):
    """All methods and ablation rows over the ten benchmark splits, computed once per session."""
    return run_repeated(benchmark_dataset, BENCHMARK_SPLIT, TrainConfig(), runs=BENCHMARK_RUNS, methods=METHODS)


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
