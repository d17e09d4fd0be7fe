import numpy as np
import pytest

from stochiso.grid import build_grid
from stochiso.model import Domain, builtin_model, make_model
from stochiso.oracle import OuCanonical


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def canonical_ou():
    """Canonical form of the spiral sink: mu, omega of its drift matrix, D = 1.25e-3."""
    A = np.array([[0.1598, -0.52], [0.7227, -0.319]])
    w = np.linalg.eigvals(A)
    lam = w[np.argmax(w.imag)]
    return OuCanonical.isotropic(float(lam.real), float(lam.imag), 1.25e-3)


@pytest.fixture(scope="session")
def canonical_ou_model(canonical_ou):
    return canonical_ou.to_model(Domain.square(0.6))


def diffusion_only(domain=Domain(0.0, 1.0, 0.0, 1.0), boundary="reflecting", D=1.0):
    s = float(np.sqrt(2 * D))
    return make_model("diffusion", ["0", "0"], [[str(s), "0"], ["0", str(s)]], {}, domain, boundary)


@pytest.fixture(scope="session")
def ou101(canonical_ou_model):
    from stochiso.pipeline import analyze

    g = build_grid(canonical_ou_model.domain, 101, 101)
    return analyze(canonical_ou_model, g, phase_ref=(0.3, 0.0))


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
