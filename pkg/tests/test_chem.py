import json
import math

import pytest

from randmux.chem import (
    SystemSpec,
    bits_deterministic,
    bits_randomized,
    confidence_factor,
    control_count_df,
    control_count_thc,
    estimate_system,
    givens_lookup_width,
    load_systems,
    randomized_error,
)
from randmux.errors import ParameterError


def test_bits_randomized_rows():
    assert bits_randomized(4.7e5, 54, 0.05) == 18
    assert bits_randomized(4.8e5, 54, 0.05) == 18


def test_quadrupled_epsilon_drops_one_bit():
    for M, N in [(4.7e5, 54), (1e3, 10), (123456, 7)]:
        eps = 1e-4
        assert bits_randomized(M, N, 4 * eps) == bits_randomized(M, N, eps) - 1


def test_bits_randomized_tight():
    for s in load_systems():
        b = bits_randomized(s.M, s.N, s.epsilon)
        assert randomized_error(s.M, s.N, b) <= s.epsilon
        assert randomized_error(s.M, s.N, b - 1) > s.epsilon


def test_bits_deterministic_spin_convention():
    assert bits_deterministic(4.7e5, 108) == 33
    assert bits_deterministic(4.7e5, 54) == 32
    assert bits_deterministic(2 * 4.7e5, 108) == 34


def test_lookup_width():
    assert givens_lookup_width(2, 2) == 5
    assert givens_lookup_width(54, 18) == 1113
    assert 4 * 53 * 18 / 1113 == pytest.approx(3.43, abs=0.01)
    with pytest.raises(ParameterError):
        givens_lookup_width(54, 1)


@pytest.mark.parametrize("N", [2, 10, 54, 200])
@pytest.mark.parametrize("b", [2, 5, 18, 40])
def test_width_reduction(N, b):
    assert givens_lookup_width(N, b) < 4 * (N - 1) * b


def test_control_counts():
    assert control_count_df(9, 4) == 40
    assert control_count_thc(296, 54) == 350
    spec = SystemSpec("x", "THC", N=54, M=1e5, R=296)
    assert spec.c == 350
    with pytest.raises(ParameterError):
        SystemSpec("x", "DF", N=54, M=1e5, R=9, Xi=4, c=41)


def test_unknown_fields_rejected():
    with pytest.raises(ParameterError):
        SystemSpec.from_dict({"name": "a", "representation": "DF", "N": 5, "c": 3, "M": 10, "colour": 1})


def test_builtin_rows():
    systems = load_systems()
    assert len(systems) == 4
    for s in systems:
        est = estimate_system(s)
        assert est.b_randomized == 18 == s.published_b_randomized
        assert est.b_randomized < est.b_deterministic
        assert est.b_deterministic == 33
        assert est.b_randomized <= math.ceil((est.b_deterministic + 3) / 2)
        assert est.lookup_width == givens_lookup_width(s.N, 18)


def test_rigorous_rows_match_published_deterministic():
    for s in load_systems()[:2]:
        assert bits_deterministic(s.M, s.n_spin) == s.published_b_deterministic


def test_epsilon_override(tmp_path):
    path = tmp_path / "sys.json"
    path.write_text(json.dumps([{"name": "t", "representation": "DF", "N": 54, "c": 100, "M": 4.7e5}]))
    (s,) = load_systems(path, epsilon=0.05 / 4**3)
    assert estimate_system(s).b_randomized == 21
    assert s.epsilon == pytest.approx(0.05 / 64)


def test_epsilon_to_zero_growth():
    bs = [bits_randomized(4.7e5, 54, 0.05 / 4**k) for k in range(6)]
    assert bs == list(range(18, 24))


def test_confidence_factor():
    assert confidence_factor(0.1, 0.05, 0.5) == pytest.approx(0.1 / 0.15 * 0.5 / 0.45)
    with pytest.raises(ParameterError):
        confidence_factor(0.1, 0.5, 0.5)
