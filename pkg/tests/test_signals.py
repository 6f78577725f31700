import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal as sps

from metavrft.bench import MotorFamily, Protocol, sample_motor, snr_db
from metavrft.lti import LTIError, TransferFunction, UnstableSystemError, feedback, simulate, tf
from metavrft.signals import (
    Dataset,
    design_prefilter,
    generate_open_loop,
    load_dataset,
    save_dataset,
    simulate_closed_loop,
    virtual_reference,
    white_input,
)


# Dataset

def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset([1, 2], [1], 1.0)
    with pytest.raises(ValueError):
        Dataset([1], [1], 1.0, noise_std=-1)
    with pytest.raises(ValueError):
        Dataset([1], [1], 1.0, kind="closed_loop")
    with pytest.raises(ValueError):
        Dataset([], [], 1.0)


def test_csv_round_trip(tmp_path):
    r = np.ones(5)
    ds = Dataset(np.arange(5.0), np.linspace(0, 1, 5) / 3, 0.02, 1.5, 42, "closed_loop", r)
    csv_path, json_path = save_dataset(ds, tmp_path / "d")
    assert csv_path.read_text().splitlines()[0] == "t,u,y,r"
    back = load_dataset(tmp_path / "d")
    assert np.array_equal(back.y, ds.y) and np.array_equal(back.reference, r)
    assert back.meta == ds.meta


# open loop

def test_noise_free_equals_simulation():
    g = MotorFamily().plant(2.0, 0.4)
    u = white_input(550, 2.0, 1)
    ds = generate_open_loop(g, u, 0.0, 5)
    assert np.array_equal(ds.y, simulate(g, u))


def test_protocol_length():
    p = Protocol()
    assert p.T == 550 and round(11.0 / 0.02) == p.T


def test_open_loop_reproducible():
    g = MotorFamily().plant(2.0, 0.4)
    u = white_input(100, 2.0, 1)
    a, b = generate_open_loop(g, u, 10, 7), generate_open_loop(g, u, 10, 7)
    assert a.y.tobytes() == b.y.tobytes()
    assert not np.array_equal(a.y, generate_open_loop(g, u, 10, 8).y)


def test_open_loop_requires_stable_plant():
    with pytest.raises(UnstableSystemError):
        generate_open_loop(tf([0, 1], [1, -1.1]), np.ones(10), 0.0, 0)


def test_noise_statistics():
    ds = generate_open_loop(tf([0.0]), np.zeros(100_000), 3.0, 11)
    assert abs(ds.y.mean()) < 0.02 * 3.0
    assert ds.y.std() == pytest.approx(3.0, rel=0.02)


def test_mean_snr():
    u = white_input(550, 2.0, 0)
    vals = [snr_db(sample_motor(s), u, 10.0) for s in range(200)]
    assert np.mean(vals) == pytest.approx(21.01, abs=1.0)


# closed loop

def test_zero_controller_gives_pure_noise():
    g = MotorFamily().plant(2.0, 0.4)
    ds = simulate_closed_loop(g, tf([0.0], ts=g.ts), np.ones(50), 2.0, 3)
    assert np.array_equal(ds.u, np.zeros(50))
    assert np.array_equal(ds.y, np.random.default_rng(3).normal(0, 2.0, 50))


def test_closed_loop_matches_feedback():
    g = MotorFamily().plant(3.0, 0.5)
    c = TransferFunction([0.01, -0.0098], [1, -1], g.ts)
    r = np.full(150, 1000.0)
    ds = simulate_closed_loop(g, c, r, 0.0, None)
    assert np.max(np.abs(ds.y - simulate(feedback(c, g), r))) < 1e-8


def test_closed_loop_steady_state():
    g = MotorFamily().plant(3.0, 0.5)
    c = tf([0.02], ts=g.ts)
    t = feedback(c, g)
    ds = simulate_closed_loop(g, c, np.ones(20_000), 0.0, None)
    assert ds.y[-1] == pytest.approx(t.dc_gain, abs=1e-6)


def test_closed_loop_horizon():
    p = Protocol()
    assert p.horizon == round(3.0 / 0.02) == 150


def test_divergent_loop_flagged():
    g = MotorFamily().plant(5.0, 0.9)
    ds = simulate_closed_loop(g, tf([50.0], ts=g.ts), np.ones(3000), 0.0, None)
    assert ds.unstable and len(ds) < 3000


def test_algebraic_loop_rejected():
    with pytest.raises(LTIError):
        simulate_closed_loop(tf([1.0]), tf([-1.0]), np.ones(5), 0.0, None)


# virtual reference

def test_virtual_reference_inverts_model(m):
    r = np.random.default_rng(0).normal(size=550)
    y = simulate(m, r)
    rv, valid = virtual_reference(m, y)
    assert valid == slice(0, 549)
    assert np.max(np.abs(rv[valid] - r[:549])) < 1e-8


@given(st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_virtual_reference_reconstructs_output(seed):
    from metavrft.bench import REFERENCE_MODEL as m

    y = np.random.default_rng(seed).normal(size=300)
    rv, valid = virtual_reference(m, y)
    y_hat = simulate(m, rv)
    d = m.relative_degree
    assert np.max(np.abs(y_hat[d:] - y[d:])) < 1e-8


def test_virtual_reference_errors():
    with pytest.raises(ValueError):
        virtual_reference(tf([1.0]), np.ones(10))
    with pytest.raises(ValueError):
        virtual_reference(tf([0, 1, -2], [1, -0.5]), np.ones(10))


# prefilter

def test_white_prefilter(m):
    u = white_input(550, 2.0, 0)
    L = design_prefilter(m, None, u, white_input=True)
    assert L == m * (1 - m) * (1 / np.std(u))
    assert np.std(u) == pytest.approx(2.0, rel=0.1)


def test_prefilter_rejects_unit_model_and_flat_input(m):
    with pytest.raises(ValueError):
        design_prefilter(tf([1.0]), None, np.ones(10))
    with pytest.raises(ValueError):
        design_prefilter(m, None, np.zeros(10))


def test_spectral_prefilter_whitens(m):
    e = white_input(8000, 1.0, 4)
    u = simulate(tf([1.0], [1, -0.8]), e)
    scalar = design_prefilter(m, None, u, white_input=True)
    spectral = design_prefilter(m, None, u, white_input=False)
    assert scalar != spectral
    whitening = spectral / (m * (1 - m))
    _, pxx = sps.welch(simulate(whitening, u), nperseg=256)
    f = np.linspace(0, 1, pxx.size)
    band = pxx[(f >= 0.05) & (f <= 0.95)]
    db = 10 * np.log10(band / np.mean(band))
    assert np.max(np.abs(db)) < 3.0
