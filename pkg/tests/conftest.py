import pytest

from twisted_transfer import assemble_all, gauss_system, overlap_matrix, quadrature_nodes, validate_system


@pytest.fixture(scope="session")
def gauss23():
    s = gauss_system([2, 3])
    validate_system(s)
    return s


@pytest.fixture(scope="session")
def quad23(gauss23):
    return quadrature_nodes(gauss23.domain)


@pytest.fixture(scope="session")
def ops23(gauss23, quad23):
    return assemble_all(gauss23, 40, quad23)


@pytest.fixture(scope="session")
def H23(gauss23, quad23):
    return overlap_matrix(gauss23, quad23)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (one PASS/FAIL line each)")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(RESULTS, key=lambda t: (int(t.rstrip("ab")), t)):
            terminalreporter.write_line(RESULTS[tag])
