import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randmux.angles import (
    FixedPointAngle,
    GridAngle,
    bits_for_epsilon,
    expected_phase,
    phase,
    phase_error_bound,
    randomize,
    sample,
    sample_many,
    truncate_deterministic,
)
from randmux.errors import ParameterError

numerators = st.integers(min_value=0, max_value=2**64 - 1)
bits = st.integers(min_value=1, max_value=63)


def circ_dist(a: Fraction, b: Fraction) -> Fraction:
    d = (a - b) % 1
    return min(d, 1 - d)


def test_fixed_point_wraps():
    a = FixedPointAngle(2**64 - 1) + FixedPointAngle(2)
    assert a.numerator == 1
    assert (-FixedPointAngle(0)).numerator == 0
    assert FixedPointAngle.from_turns(1.25) == FixedPointAngle.from_turns(0.25)


def test_fixed_point_rejects_out_of_range():
    with pytest.raises(ParameterError):
        FixedPointAngle(2**64)


def test_grid_angle_successor_wraps():
    g = GridAngle(3, 7)
    assert g.successor() == GridAngle(3, 0)
    assert g.bitstring() == "111"


def test_truncate_on_grid():
    g = truncate_deterministic(FixedPointAngle.from_turns(0.25), 2)
    assert g.index == 1


def test_truncate_matches_brute_force_nearest():
    theta = FixedPointAngle.from_turns(0.3125)
    g = truncate_deterministic(theta, 2)
    assert circ_dist(theta.turns, g.turns) <= Fraction(1, 8)
    best = min(circ_dist(theta.turns, Fraction(i, 4)) for i in range(4))
    assert circ_dist(theta.turns, g.turns) == best


def test_truncate_wraps_to_zero():
    assert truncate_deterministic(FixedPointAngle(2**64 - 1), 3).index == 0


@pytest.mark.parametrize("b", [0, 64, -1])
def test_bits_out_of_range(b):
    with pytest.raises(ParameterError):
        truncate_deterministic(FixedPointAngle(0), b)
    with pytest.raises(ParameterError):
        randomize(FixedPointAngle(0), b)


def test_randomize_point_three():
    ra = randomize(FixedPointAngle.from_turns(0.3), 3)
    assert ra.base.turns == Fraction(1, 4)
    assert abs(float(ra.bernoulli_r) - 0.4) < 1e-15
    (lo, p_lo), (hi, p_hi) = ra.support()
    assert hi.turns == Fraction(3, 8)
    assert p_lo + p_hi == 1
    assert ra.expectation() == FixedPointAngle.from_turns(0.3).turns


def test_randomize_on_grid_is_deterministic():
    ra = randomize(FixedPointAngle.from_turns(0.25), 2)
    assert ra.is_deterministic
    assert ra.bernoulli_r == 0
    assert expected_phase(ra) == phase(Fraction(1, 4))


def test_midpoint_saturates():
    b = 5
    theta = FixedPointAngle((3 << (64 - b)) + (1 << (63 - b)))
    ra = randomize(theta, b)
    assert ra.bernoulli_r == Fraction(1, 2)
    assert abs(abs(expected_phase(ra)) - math.cos(math.pi / 2**b)) < 1e-14
    err = abs(phase(theta.turns) - expected_phase(ra))
    assert abs(err - (1 - math.cos(math.pi / 2**b))) < 1e-14


def test_expected_phase_half_at_zero():
    theta = FixedPointAngle(1 << (63 - 3))
    ra = randomize(theta, 3)
    want = math.cos(math.pi / 8) * np.exp(1j * math.pi / 8)
    assert abs(expected_phase(ra) - want) < 1e-15


@settings(max_examples=300, deadline=None)
@given(numerators, bits)
def test_expectation_is_exact(num, b):
    theta = FixedPointAngle(num)
    ra = randomize(theta, b)
    assert 0 <= ra.bernoulli_r < 1
    assert ra.expectation() == theta.turns


@settings(max_examples=300, deadline=None)
@given(numerators, st.integers(min_value=1, max_value=20))
def test_randomized_error_bound(num, b):
    theta = FixedPointAngle(num)
    err = abs(phase(theta.turns) - expected_phase(randomize(theta, b)))
    assert err <= math.pi**2 / 2 ** (2 * b + 1) + 1e-15


@settings(max_examples=200, deadline=None)
@given(numerators, st.integers(min_value=1, max_value=20), st.integers(min_value=0, max_value=2**20))
def test_shift_equivariance(num, b, shift):
    theta = FixedPointAngle(num)
    moved = theta + FixedPointAngle((shift % 2**b) << (64 - b))
    a, m = randomize(theta, b), randomize(moved, b)
    assert m.base.index == (a.base.index + shift) % 2**b
    assert m.bernoulli_r == a.bernoulli_r
    assert truncate_deterministic(moved, b).index == (truncate_deterministic(theta, b).index + shift) % 2**b


@settings(max_examples=200, deadline=None)
@given(numerators, st.integers(min_value=1, max_value=40))
def test_deterministic_within_half_step(num, b):
    theta = FixedPointAngle(num)
    g = truncate_deterministic(theta, b)
    assert circ_dist(theta.turns, g.turns) <= Fraction(1, 2 ** (b + 1))


def test_sample_extremes():
    rng = np.random.default_rng(1)
    ra = randomize(FixedPointAngle.from_turns(0.5), 4)
    assert all(sample(ra, rng) == ra.base for _ in range(50))
    # remainder just below one full step: upper point almost surely
    theta = FixedPointAngle((1 << 60) - 1)
    ra = randomize(theta, 4)
    assert all(sample(ra, rng).index == 1 for _ in range(50))


def test_sample_frequency_million():
    ra = randomize(FixedPointAngle.from_turns(0.3), 3)
    draws = sample_many(ra, np.random.default_rng(2024), 10**6)
    freq = float(np.mean(draws == ra.base.successor().index))
    assert abs(freq - 0.4) < 0.002


def test_sample_is_seeded():
    ra = randomize(FixedPointAngle.from_turns(0.71), 5)
    a = sample_many(ra, np.random.default_rng(9), 100)
    b = sample_many(ra, np.random.default_rng(9), 100)
    assert np.array_equal(a, b)


def test_bits_for_epsilon_examples():
    assert bits_for_epsilon(0.05, "randomized") == 4
    assert bits_for_epsilon(0.05, "deterministic") == 6
    assert bits_for_epsilon(0.5, "randomized") == 2
    assert phase_error_bound(2, "randomized").bound == pytest.approx(0.3084, abs=1e-4)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 2.0])
def test_bits_for_epsilon_rejects(eps):
    with pytest.raises(ParameterError):
        bits_for_epsilon(eps)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=1e-12, max_value=0.999, exclude_max=True))
def test_halving_property(eps):
    r = bits_for_epsilon(eps, "randomized")
    d = bits_for_epsilon(eps, "deterministic")
    assert r <= math.ceil(d / 2) + 1
    assert phase_error_bound(r, "randomized").bound <= eps


def test_cosine_below_quadratic_bound():
    for b in range(1, 64):
        # 1 - cos(x) written as 2 sin^2(x/2) to avoid cancellation
        assert 2 * math.sin(math.pi / 2 ** (b + 1)) ** 2 <= math.pi**2 / 2 ** (2 * b + 1)
