import numpy as np
import pytest

from hx.spectral import GridFunction, GridSpec

# criterion -> [title, passed, details]; several tests may feed one criterion
ACCEPTANCE: dict[int, list] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    entry = ACCEPTANCE.setdefault(number, [title, True, []])
    entry[1] = entry[1] and bool(passed)
    if detail:
        entry[2].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        title, passed, details = ACCEPTANCE[k]
        line = f"[{'PASS' if passed else 'FAIL'}] {k:>2}. {title}"
        if details:
            line += "  (" + "; ".join(details) + ")"
        terminalreporter.write_line(line)


def random_trig(spec: GridSpec, band: int, seed: int, zero_mean: bool = False) -> GridFunction:
    """Real trigonometric polynomial with random coefficients on ``|k_i| <= band``."""
    rng = np.random.default_rng(seed)
    c = np.zeros(spec.shape, dtype=complex)
    k = spec.integer_wavenumbers()
    mask = np.ones(spec.shape, dtype=bool)
    for kk in k:
        mask &= np.abs(kk * np.ones(spec.shape)) <= band
    c[mask] = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
    v = np.fft.ifftn(c).real
    v /= np.abs(v).max()
    if zero_mean:
        v -= v.mean()
    return GridFunction(spec, v)


@pytest.fixture
def spec1():
    return GridSpec(1, 256)


@pytest.fixture
def spec2():
    return GridSpec(2, 32)
