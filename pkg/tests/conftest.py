import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", max_examples=30, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=300, deadline=None)
hypothesis.settings.load_profile("default")

# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_field(rng, torus, modes=4, amp=1.0):
    """Random band-limited field with |m| <= modes on every axis."""
    c = np.zeros(torus.shape, dtype=complex)
    idx = tuple(np.r_[0 : modes + 1, n - modes : n] for n in torus.sizes)
    sub = np.ix_(*idx)
    c[sub] = rng.standard_normal(c[sub].shape) + 1j * rng.standard_normal(c[sub].shape)
    f = np.fft.ifftn(c).real
    return amp * f / np.abs(f).max()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
