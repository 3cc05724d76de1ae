from dataclasses import dataclass

import pytest

from avgbound import rigid_body as rb
from avgbound.l_operation import run_l_operation, verify_bounds
from avgbound.n_operation import audit_integral_inequality, run_n_operation
from avgbound.seminorms import component_family


@dataclass
class FigureRun:
    params: object
    system: object
    bundle: object
    flow: object
    bound: object
    audit: object
    direct: object
    report: object


def _figure_run(which):
    p = rb.figure_config(which)
    system = rb.build_system(p)
    bundle = rb.build_bundle(p)
    flow = rb.closed_form_flow(p)
    bound = run_n_operation(bundle, p.epsilon, flow)
    audit = audit_integral_inequality(bundle, p.epsilon, bound, flow, n_quad_nodes=10_001)
    direct = run_l_operation(system, flow)
    report = verify_bounds(direct, bound, component_family(2), n_samples=100_000, n_windows=20)
    return FigureRun(p, system, bundle, flow, bound, audit, direct, report)


@pytest.fixture(scope="session")
def fig_a():
    return _figure_run("a")


@pytest.fixture(scope="session")
def fig_c():
    return _figure_run("c")


@pytest.fixture
def fig_a_params():
    return rb.figure_config("a")


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    """Append a ``(criterion, passed, detail)`` line for the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def log(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
