import numpy as np
import pytest

from tensorgrid.formats import CanonicalTensor3


def random_canonical(rng, shape, rank):
    return CanonicalTensor3(
        rng.standard_normal(rank),
        tuple(rng.standard_normal((n, rank)) for n in shape),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """Collect the one-line verdicts recorded by the acceptance tests."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            lines += [v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
