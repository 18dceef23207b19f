import numpy as np
import pytest

from airvote.phy import (
    SYMBOL_ENERGY,
    build_subcarrier_map,
    encode_signs,
    initial_power_state,
    mean_power,
    signed_agreement,
    update_power,
)


# ---------------------------------------------------------------------------
# Subcarrier map
# ---------------------------------------------------------------------------

def test_map_layout_q2_a4_s1():
    m = build_subcarrier_map(2, 4, 1)
    np.testing.assert_array_equal(m.sym_plus, [0, 0])
    np.testing.assert_array_equal(m.sub_plus, [0, 2])
    np.testing.assert_array_equal(m.sym_minus, [0, 0])
    np.testing.assert_array_equal(m.sub_minus, [1, 3])


def test_map_capacity_error():
    with pytest.raises(ValueError, match="6 bins"):
        build_subcarrier_map(3, 4, 1)


def test_map_requires_even_subcarriers():
    with pytest.raises(ValueError):
        build_subcarrier_map(2, 5, 1)


@pytest.mark.parametrize(
    "q,a,s",
    [(1, 2, 1), (2, 4, 1), (4, 4, 2), (7, 4, 4), (32, 8, 8), (210, 64, 7), (1024, 64, 32)],
)
def test_map_bins_distinct_and_fsk_adjacent(q, a, s):
    m = build_subcarrier_map(q, a, s)
    flat = np.concatenate(
        [m.sym_plus * a + m.sub_plus, m.sym_minus * a + m.sub_minus]
    )
    assert len(np.unique(flat)) == 2 * q  # bijective: no bin reused
    np.testing.assert_array_equal(m.sym_minus, m.sym_plus)
    np.testing.assert_array_equal(m.sub_minus, m.sub_plus + 1)
    assert m.sym_plus.max() < s and m.sub_minus.max() < a


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def test_encode_positive_sign():
    m = build_subcarrier_map(1, 2, 1)
    frame = encode_signs(np.array([1]), m, seed=0)
    assert abs(frame[0, 0]) == pytest.approx(np.sqrt(2.0))
    assert frame[0, 1] == 0


def test_encode_negative_sign():
    m = build_subcarrier_map(1, 2, 1)
    frame = encode_signs(np.array([-1]), m, seed=0)
    assert frame[0, 0] == 0
    assert abs(frame[0, 1]) == pytest.approx(np.sqrt(2.0))


def test_encode_pinned_randomization():
    m = build_subcarrier_map(3, 6, 1)
    frame = encode_signs(np.array([1, -1, 1]), m, seed=5, randomize=False)
    np.testing.assert_allclose(frame[0, [0, 3, 4]], np.sqrt(2.0))


def test_encode_per_coordinate_energy_and_exactly_one_active():
    rng = np.random.default_rng(1)
    m = build_subcarrier_map(16, 8, 4)
    for trial in range(20):
        signs = rng.choice([-1, 1], size=16)
        frame = encode_signs(signs, m, seed=trial)
        e_plus = np.abs(frame[m.sym_plus, m.sub_plus]) ** 2
        e_minus = np.abs(frame[m.sym_minus, m.sub_minus]) ** 2
        np.testing.assert_allclose(e_plus + e_minus, SYMBOL_ENERGY, atol=1e-12)
        assert np.all((e_plus == 0) ^ (e_minus == 0))
        # randomization symbols stay on the unit circle
        active = np.where(signs > 0, frame[m.sym_plus, m.sub_plus], frame[m.sym_minus, m.sub_minus])
        np.testing.assert_allclose(np.abs(active), np.sqrt(2.0), atol=1e-12)


def test_encode_deterministic_and_validates():
    m = build_subcarrier_map(4, 8, 1)
    signs = np.array([1, -1, -1, 1])
    a = encode_signs(signs, m, seed=9)
    b = encode_signs(signs, m, seed=9)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        encode_signs(np.array([1, 0, -1, 1]), m, seed=0)
    with pytest.raises(ValueError):
        encode_signs(np.array([1, -1]), m, seed=0)


# ---------------------------------------------------------------------------
# Power control
# ---------------------------------------------------------------------------

def test_update_power_examples():
    state = initial_power_state(1)
    reports = np.array([[1, 1, 1, -1]])
    vote = np.array([1, 1, -1, 1])  # agrees on 2 of 4 -> increment 0
    assert update_power(state, reports, vote).powers[0] == pytest.approx(1.0)

    vote = np.array([1, 1, 1, 1])  # agrees on 3 of 4 -> |(3-1)/4| = 0.5
    new = update_power(state, reports, vote)
    assert new.powers[0] == pytest.approx(1.5)
    assert new.round == 1

    vote = np.array([-1, -1, -1, 1])  # full disagreement -> +1
    assert update_power(state, reports, vote).powers[0] == pytest.approx(2.0)


def test_update_power_negation_symmetry():
    rng = np.random.default_rng(7)
    state = initial_power_state(5)
    reports = rng.choice([-1, 1], size=(5, 12))
    vote = rng.choice([-1, 1], size=12)
    a = update_power(state, reports, vote)
    b = update_power(state, -reports, -vote)
    np.testing.assert_allclose(a.powers, b.powers)


def test_update_power_monotone_with_bounded_increments():
    rng = np.random.default_rng(11)
    state = initial_power_state(8)
    for r in range(25):
        reports = rng.choice([-1, 1], size=(8, 9))
        vote = rng.choice([-1, 1], size=9)
        new = update_power(state, reports, vote)
        increments = new.powers - state.powers
        assert np.all(increments >= -1e-12)
        assert np.all(increments <= 1.0 + 1e-12)
        assert new.round == r + 1
        state = new
    assert np.all(state.powers >= 1.0)


def test_update_power_cap():
    state = initial_power_state(2)
    reports = np.array([[1, 1], [1, 1]])
    vote = np.array([1, 1])
    for _ in range(5):
        state = update_power(state, reports, vote, power_cap=3.0)
    np.testing.assert_allclose(state.powers, [3.0, 3.0])


def test_signed_agreement_is_signed():
    reports = np.array([[1, 1, 1, 1], [-1, -1, -1, -1]])
    vote = np.array([1, 1, 1, 1])
    np.testing.assert_allclose(signed_agreement(reports, vote), [1.0, -1.0])


def test_mean_power():
    assert mean_power(initial_power_state(3)) == pytest.approx(1.0)
    state = initial_power_state(2)
    state.powers = np.array([1.0, 2.0])
    assert mean_power(state) == pytest.approx(1.5)


def test_mean_power_bounded_by_round_count():
    rng = np.random.default_rng(13)
    state = initial_power_state(4)
    rounds = 15
    for _ in range(rounds):
        reports = rng.choice([-1, 1], size=(4, 6))
        vote = rng.choice([-1, 1], size=6)
        state = update_power(state, reports, vote)
    assert 1.0 <= mean_power(state) <= 1.0 + rounds
