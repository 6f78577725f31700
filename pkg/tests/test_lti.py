import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metavrft.bench import MotorFamily, similarity_level
from metavrft.lti import (
    ControllerParams,
    LTIError,
    TransferFunction,
    UnstableSystemError,
    combine_controllers,
    feedback,
    impulse,
    is_stable,
    norm_h2,
    norm_hinf,
    pi_controller,
    simulate,
    tf,
)

from conftest import random_stable

seeds = st.integers(0, 2**32 - 1)


# simulate

def test_unit_delay_shifts():
    assert simulate(tf([0, 1]), [1, 2, 3]).tolist() == [0, 1, 2]


def test_reference_model_unit_dc_gain(m):
    y = simulate(m, np.ones(400))
    assert m.dc_gain == pytest.approx(1.0, abs=1e-12)
    assert y[-1] == pytest.approx(1.0, abs=1e-9)


def test_simulate_matches_convolution():
    rng = np.random.default_rng(0)
    g = random_stable(rng, 3)
    u = rng.normal(size=64)
    h = impulse(g, 64)
    ref = np.array([h[: t + 1][::-1] @ u[: t + 1] for t in range(64)])
    assert np.max(np.abs(simulate(g, u) - ref)) < 1e-10


@pytest.mark.parametrize("bad", [[], [1.0, np.nan], [np.inf]])
def test_simulate_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        simulate(tf([1.0]), bad)


@given(seeds, st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=40, deadline=None)
def test_simulate_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, 2)
    u1, u2 = rng.normal(size=(2, 50))
    lhs = simulate(g, a * u1 + b * u2)
    rhs = a * simulate(g, u1) + b * simulate(g, u2)
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


# canonical form and algebra

def test_canonical_form_trims_and_normalises():
    a = TransferFunction([0, 2, 0, 0], [2, -1, 0], 0.1)
    assert a.num.tolist() == [0, 1] and a.den.tolist() == [1, -0.5]
    assert a == TransferFunction([0, 1], [1, -0.5], 0.1)


def test_shared_delays_cancel():
    assert TransferFunction([0, 0, 1], [0, 1, -0.5]) == TransferFunction([0, 1], [1, -0.5])


def test_zero_denominator_rejected():
    with pytest.raises(LTIError):
        TransferFunction([1], [0, 0])


def test_sample_time_mismatch():
    with pytest.raises(LTIError):
        tf([1], ts=0.1) + tf([1], ts=0.2)


def test_json_round_trip():
    g = MotorFamily().plant(3.0, 0.5)
    assert TransferFunction.from_json(g.to_json()) == g


# feedback

def test_feedback_zero_controller():
    g = MotorFamily().plant(2.0, 0.3)
    assert feedback(tf([0.0], ts=g.ts), g).is_zero


def test_feedback_static_unity_loop():
    t = feedback(tf([1.0]), tf([1.0]))
    assert t.dc_gain == pytest.approx(0.5)
    assert t.den.size == 1


def test_feedback_algebraic_loop_rejected():
    with pytest.raises(LTIError):
        feedback(tf([-1.0]), tf([1.0]))


def test_feedback_matches_loop_equations():
    g = MotorFamily().plant(3.2, 0.6)
    c = pi_controller(0.004, 0.02, g.ts)
    t, s = feedback(c, g, sensitivity=True)
    n = 300
    r = np.ones(n)
    # loop equations evaluated sample by sample
    y = np.zeros(n)
    u = np.zeros(n)
    e = np.zeros(n)
    for k in range(n):
        y[k] = sum(g.num[i] * u[k - i] for i in range(1, g.num.size) if k - i >= 0) - sum(
            g.den[i] * y[k - i] for i in range(1, g.den.size) if k - i >= 0)
        e[k] = r[k] - y[k]
        u[k] = sum(c.num[i] * e[k - i] for i in range(c.num.size) if k - i >= 0) - sum(
            c.den[i] * u[k - i] for i in range(1, c.den.size) if k - i >= 0)
    assert np.max(np.abs(simulate(t, r) - y)) < 1e-8
    assert np.max(np.abs(simulate(s, r) - e)) < 1e-8


# stability

def test_stability_examples(m):
    assert is_stable(m)
    assert not is_stable(tf([1], [1, -1]))
    assert is_stable(MotorFamily().plant(1.0, 0.9))


# norms

def test_h2_static_gain():
    assert norm_h2(tf([3.0])) == pytest.approx(3.0)


def test_h2_of_self_difference_is_zero():
    g = MotorFamily().plant(4.0, 0.2)
    assert norm_h2(g - g) == 0.0


def test_h2_lag_closed_form():
    # impulse response 0.5^k, energy 1/(1-0.25)
    assert norm_h2(tf([1], [1, -0.5])) == pytest.approx(np.sqrt(1 / 0.75), rel=1e-12)


def test_family_similarity_level():
    eps = similarity_level()
    assert eps == pytest.approx(784.55, rel=0.05)
    fam = MotorFamily()
    assert norm_h2(fam.plant(5.75, 0.9) - fam.plant(1.0, 0.0)) == pytest.approx(eps)


def test_norms_reject_unstable():
    with pytest.raises(UnstableSystemError):
        norm_h2(tf([1], [1, -1.01]))
    with pytest.raises(UnstableSystemError):
        norm_hinf(tf([1], [1, -1.01]))


def test_hinf_examples():
    assert norm_hinf(tf([-2.0])) == pytest.approx(2.0)
    assert norm_hinf(tf([0, 1], [1, -0.5])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        norm_hinf(tf([1.0]), grid_size=10)


def test_hinf_matches_dense_sweep(m):
    rng = np.random.default_rng(3)
    for _ in range(5):
        g = random_stable(rng, 2, radius=0.8, ts=m.ts)
        c = pi_controller(*rng.uniform(0.05, 0.3, 2), m.ts)
        # Xi's zero at 1 cancels the integrator pole
        delta = (m - c * g * (1 - m)).minreal()
        assert is_stable(delta)
        w = np.linspace(0, np.pi, 10**6)
        dense = np.abs(delta.freqresp(w)).max()
        assert norm_hinf(delta) == pytest.approx(dense, rel=1e-3)


# controller combinations

def test_controller_params_length_checked():
    with pytest.raises(ValueError):
        ControllerParams([1.0, 2.0, 3.0], "pi", 0.02)


def test_pi_structure(ts):
    c = pi_controller(2.0, 10.0, ts)
    assert c.den.tolist() == [1, -1]
    assert c.num.tolist() == pytest.approx([2 + 10 * ts / 2, -2 + 10 * ts / 2])


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_delta_of_combination_is_combination_of_deltas(seed):
    rng = np.random.default_rng(seed)
    from metavrft.bench import REFERENCE_MODEL as m

    g = random_stable(rng, 2, radius=0.9, ts=m.ts, delay=2)
    cs = [pi_controller(*rng.normal(size=2), m.ts) for _ in range(4)]
    alpha = rng.dirichlet(np.ones(4))
    xi = 1 - m
    lhs = m - combine_controllers(cs, alpha) * g * xi
    rhs = combine_controllers([m - c * g * xi for c in cs], alpha)
    assert lhs.den.size == rhs.den.size
    assert np.allclose(lhs.num, rhs.num, atol=1e-9) and np.allclose(lhs.den, rhs.den, atol=1e-9)


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_hinf_convex_bound(seed):
    rng = np.random.default_rng(seed)
    from metavrft.bench import REFERENCE_MODEL as m

    g = random_stable(rng, 2, radius=0.9, ts=m.ts, delay=2)
    cs = [pi_controller(*rng.normal(scale=0.3, size=2), m.ts) for _ in range(3)]
    alpha = rng.dirichlet(np.ones(3))
    xi = 1 - m
    deltas = [m - c * g * xi for c in cs]
    lhs = norm_hinf(combine_controllers(deltas, alpha))
    assert lhs <= float(alpha @ [norm_hinf(d) for d in deltas]) + 1e-6
