import gmpy2
import numpy as np
import pytest
from gmpy2 import mpc

from cedeconv.numerics import PrecisionContext


@pytest.fixture(scope="session")
def ctx():
    return PrecisionContext()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit_disc(rng, n):
    r = np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return r * np.exp(1j * t)


def laplace_det(rows):
    """Cofactor expansion along the first row; independent of the LU path."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    total = mpc(0)
    for j in range(n):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = rows[0][j] * laplace_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def expand_roots(roots, digits=400):
    """Monic coefficients of prod(z - r) computed at far higher precision."""
    with gmpy2.context(gmpy2.get_context(), precision=int(digits * 3.33)):
        coeffs = [mpc(1)]
        for r in roots:
            r = mpc(r)
            nxt = [mpc(0)] * (len(coeffs) + 1)
            for k, c in enumerate(coeffs):
                nxt[k + 1] += c
                nxt[k] -= r * c
            coeffs = nxt
        return coeffs


_ACCEPTANCE = []


@pytest.fixture
def record():
    """Log one PASS/FAIL line for an acceptance criterion, then assert it."""
    def _record(number, name, ok, detail):
        _ACCEPTANCE.append(f"criterion {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
