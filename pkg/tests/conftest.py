import numpy as np
import pytest

from metavrft.bench import REFERENCE_MODEL, TS
from metavrft.lti import TransferFunction


def random_stable(rng, order=3, radius=0.9, ts=1.0, delay=1):
    """Random real stable transfer function with poles of modulus < ``radius``."""
    poles = []
    while len(poles) < order:
        if order - len(poles) >= 2 and rng.random() < 0.5:
            r, th = radius * np.sqrt(rng.random()), rng.uniform(0, np.pi)
            poles += [r * np.exp(1j * th), r * np.exp(-1j * th)]
        else:
            poles.append(rng.uniform(-radius, radius))
    den = np.real(np.poly(poles))
    num = np.concatenate([np.zeros(delay), rng.normal(size=order)])
    return TransferFunction(num, den, ts)


@pytest.fixture
def m():
    return REFERENCE_MODEL


@pytest.fixture
def ts():
    return TS



def make_meta(plants, controllers, u, noise_std=0.0, seed=0, horizon=150, step=1000.0):
    """Meta-dataset from known plants and controllers (test step of ``horizon`` samples)."""
    from metavrft.metadesign import MetaDataset, MetaEntry
    from metavrft.signals import generate_open_loop, simulate_closed_loop

    entries = []
    for k, (g, p) in enumerate(zip(plants, controllers)):
        ol = generate_open_loop(g, u, noise_std, seed + 2 * k)
        cl = simulate_closed_loop(g, p.to_tf(), np.full(horizon, step), noise_std, seed + 2 * k + 1)
        entries.append(MetaEntry(p, ol, cl))
    return MetaDataset(entries)


ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
