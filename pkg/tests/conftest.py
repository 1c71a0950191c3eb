import pytest

from bwlocksim.kernel import KernelState, available_backends, get_backend
from bwlocksim.memory import ContentionModel

BACKENDS = available_backends()

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def make_state(tasks, n_cores=4, quantum=10_000, timeslice=1_000_000, model=None, jitter=None):
    model = model or ContentionModel()
    return KernelState(tasks, n_cores=n_cores, quantum=quantum, freq=2.8,
                       timeslice=timeslice, syscall_ns=125,
                       capacity=model.capacity_lines(quantum), model=model, jitter=jitter)


def kernel(name):
    return get_backend(name)
