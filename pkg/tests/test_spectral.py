import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metavrft.bench import REFERENCE_MODEL as M
from metavrft.lti import norm_hinf, pi_controller, simulate, tf
from metavrft.signals import Dataset, generate_open_loop, white_input
from metavrft.spectral import (
    SpectralError,
    SpectralGrid,
    build_stability_constraint,
    crosscorr,
    delta_hat,
    input_spectrum,
    sampled_crosscorr,
    screen_meta_controller,
    spectrum,
    stability_residual,
    with_window_fallback,
)

from conftest import random_stable

TS = M.ts
IDEAL = pi_controller(0.02, 0.5, TS)


def ideal_plant():
    return (M / (IDEAL * (1 - M))).minreal()


def test_grid():
    g = SpectralGrid(4)
    w = g.frequencies
    assert len(g) == w.size == 5
    assert np.all(np.diff(w) > 0) and w[0] == 0 and w[-1] <= np.pi
    assert w[1] == pytest.approx(2 * np.pi / 9)
    with pytest.raises(ValueError):
        SpectralGrid(0)


# correlations

def test_autocorr_at_zero_is_mean_square():
    u = np.random.default_rng(0).normal(size=100)
    assert sampled_crosscorr(u, u, 0) == pytest.approx(np.mean(u**2))


def test_independent_white_signals_uncorrelated():
    rng = np.random.default_rng(1)
    n = 100_000
    u, e = rng.normal(size=(2, n))
    vals = crosscorr(u, e, 20)
    assert np.all(np.abs(np.delete(vals, 20)) < 3 / np.sqrt(n))


def test_pure_delay_peak():
    u = np.random.default_rng(2).normal(size=500)
    e = np.concatenate([np.zeros(3), u[:-3]])
    vals = crosscorr(u, e, 10)
    assert np.argmax(vals) - 10 == 3
    assert vals[13] == pytest.approx(sampled_crosscorr(u, e, 3))


def test_crosscorr_matches_loop_definition():
    rng = np.random.default_rng(3)
    u, e = rng.normal(size=(2, 60))
    vals = crosscorr(u, e, 5)
    assert np.allclose(vals, [sampled_crosscorr(u, e, k) for k in range(-5, 6)], atol=1e-14)


def test_short_record_rejected():
    with pytest.raises(SpectralError):
        crosscorr(np.ones(10), np.ones(10), 5)


# spectra

def test_spectrum_of_impulse_is_flat():
    g = SpectralGrid(6)
    corr = np.zeros(13)
    corr[6] = 2.5
    assert np.allclose(spectrum(corr, g), 2.5)


def test_symmetric_corr_gives_real_spectrum():
    rng = np.random.default_rng(4)
    half = rng.normal(size=9)
    corr = np.concatenate([half[:0:-1], half])
    assert np.max(np.abs(spectrum(corr, SpectralGrid(8)).imag)) < 1e-12


def test_spectrum_matches_direct_sum():
    g = SpectralGrid(8)
    corr = np.random.default_rng(5).normal(size=17)
    direct = [sum(corr[k + 8] * np.exp(-1j * k * w) for k in range(-8, 9)) for w in g.frequencies]
    assert np.allclose(spectrum(corr, g), direct, atol=1e-12)


def test_white_input_spectrum_flat():
    u = white_input(10_000, 1.0, 6)
    phi = input_spectrum(u, SpectralGrid(10_000 // 4))
    assert np.max(np.abs(phi.imag if np.iscomplexobj(phi) else 0)) < 1e-12
    # a lag window this long is noisy bin by bin; the claim is about its level
    blocks = np.array_split(phi, 20)
    assert all(abs(b.mean() - 1) < 0.2 for b in blocks)


# residual

def test_residual_matches_transfer_function():
    u = white_input(400, 1.0, 0)
    g = ideal_plant()
    d = generate_open_loop(g, u, 0.0, 0)
    e_s = stability_residual(d, M, [IDEAL, tf([0.0], ts=TS)], [1.0, 0.0])
    assert np.max(np.abs(e_s - simulate(M - IDEAL * g * (1 - M), u))) < 1e-8
    assert np.max(np.abs(e_s)) < 1e-8


def test_residual_with_zero_output():
    u = white_input(100, 1.0, 0)
    d = Dataset(u, np.zeros(100), TS)
    e_s = stability_residual(d, M, [IDEAL], [1.0])
    assert np.array_equal(e_s, simulate(M, u))


def test_residual_affine():
    u = white_input(200, 1.0, 1)
    d = generate_open_loop(random_stable(np.random.default_rng(1), 2, ts=TS), u, 1.0, 2)
    cs = [pi_controller(0.1, 0.2, TS), pi_controller(-0.3, 0.05, TS)]
    a1, a2 = np.array([0.3, 0.7]), np.array([0.9, 0.1])
    mid = stability_residual(d, M, cs, (a1 + a2) / 2)
    avg = (stability_residual(d, M, cs, a1) + stability_residual(d, M, cs, a2)) / 2
    assert np.allclose(mid, avg, atol=1e-12)


# delta_hat

def test_delta_hat_scale_invariant():
    rng = np.random.default_rng(2)
    g = random_stable(rng, 2, ts=TS)
    u = white_input(1000, 1.0, 3)
    cs = [pi_controller(0.1, 0.2, TS)]
    a = delta_hat(generate_open_loop(g, u, 0.0, 0), M, cs, [1.0], SpectralGrid(50))
    b = delta_hat(generate_open_loop(g, 7.0 * u, 0.0, 0), M, cs, [1.0], SpectralGrid(50))
    assert a == pytest.approx(b, rel=1e-10)


def test_delta_hat_tracks_true_norm():
    rng = np.random.default_rng(7)
    u = white_input(5000, 1.0, 1)
    for _ in range(10):
        g = random_stable(rng, 2, radius=0.9, ts=TS, delay=int(rng.integers(1, 3)))
        c = pi_controller(*rng.normal(scale=0.3, size=2), TS)
        d = generate_open_loop(g, u, 0.0, 0)
        true = norm_hinf((M - c * g * (1 - M)).minreal())
        assert delta_hat(d, M, [c], [1.0], SpectralGrid(200)) == pytest.approx(true, rel=0.1)


def test_delta_hat_ideal_controller_small():
    u = white_input(2000, 1.0, 2)
    d = generate_open_loop(ideal_plant(), u, 0.0, 0)
    assert delta_hat(d, M, [IDEAL], [1.0], SpectralGrid(200)) < 0.05


def test_delta_hat_needs_excitation():
    d = Dataset(np.zeros(100), np.zeros(100), TS)
    with pytest.raises(SpectralError):
        delta_hat(d, M, [IDEAL], [1.0], SpectralGrid(20))


@given(st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_delta_hat_convex(seed):
    rng = np.random.default_rng(seed)
    u = white_input(600, 1.0, seed)
    d = generate_open_loop(random_stable(rng, 2, ts=TS), u, 0.5, seed)
    cs = [pi_controller(*rng.normal(scale=0.3, size=2), TS) for _ in range(3)]
    con = build_stability_constraint(d, M, cs, SpectralGrid(100))
    a1, a2 = rng.dirichlet(np.ones(3), size=2)
    assert con.delta_hat((a1 + a2) / 2) <= (con.delta_hat(a1) + con.delta_hat(a2)) / 2 + 1e-10


def test_constraint_csv(tmp_path):
    u = white_input(300, 1.0, 0)
    d = generate_open_loop(ideal_plant(), u, 0.0, 0)
    con = build_stability_constraint(d, M, [IDEAL], SpectralGrid(20))
    p = con.to_csv(tmp_path / "spec.csv", [1.0])
    lines = p.read_text().splitlines()
    assert lines[0] == "omega,abs_phi_ue,phi_u" and len(lines) == 22


# screening

def test_zero_controller_screened_out():
    u = white_input(2000, 1.0, 0)
    d = generate_open_loop(ideal_plant(), u, 0.0, 0)
    grid = SpectralGrid(100)
    assert norm_hinf(M) == pytest.approx(1.0)
    assert not screen_meta_controller(d, M, tf([0.0], ts=TS), 0.95, grid)
    assert screen_meta_controller(d, M, IDEAL, 0.5, grid)
    with pytest.raises(ValueError):
        screen_meta_controller(d, M, IDEAL, 1.0, grid)


# window policy

def test_window_fallback_keeps_largest_success():
    tried = []

    def solve(ell):
        tried.append(ell)
        if ell > 50:
            raise RuntimeError("too long")
        return ell

    assert with_window_fallback(solve, 200, 1000, errors=(RuntimeError,)) == (40, 40)
    assert tried == [200, 10, 20, 40, 80]


def test_window_fallback_reraises_first_error():
    def solve(ell):
        raise RuntimeError(f"fail {ell}")

    with pytest.raises(RuntimeError, match="fail 200"):
        with_window_fallback(solve, 200, 1000, errors=(RuntimeError,))
