import json
import math

import numpy as np
import pytest
from conftest import random_sequence_spec, random_spec, random_state
from hypothesis import given, settings, strategies as st

from randmux.angles import FixedPointAngle, GridAngle
from randmux.channels import MultiplexorSpec, SequenceSpec, build_multiplexed_unitary, sequence_unitary
from randmux.errors import ParameterError, ResourceError
from randmux.lowering import (
    SCHEMA,
    PhaseGradientState,
    SharedLSB,
    add_permutation,
    apply_lookup,
    build_lookup,
    controlled_add_phase,
    half_step,
    lower_multiplexed,
    offset_round,
    reduce_to_system,
    simulate_lowered,
    subtract_via_complement,
)


def run(circuit, psi):
    return reduce_to_system(circuit, simulate_lowered(circuit, psi))


def test_lookup_single_zero_row():
    t = build_lookup([GridAngle(3, 0)])
    assert t.rows() == ["000"]


def test_lookup_rows_msb_first():
    t = build_lookup([GridAngle(3, 1), GridAngle(3, 5)])
    assert t.rows() == ["001", "101"]


def test_shared_lsb_width():
    rows = [[GridAngle(5, 6), GridAngle(5, 7), GridAngle(5, 6), GridAngle(5, 7)]]
    t = build_lookup(rows, SharedLSB(4))
    assert t.width == 4 + 5 - 1
    for s, g in enumerate(rows[0]):
        assert t.slot_value(t.data[0], s) == g.index


def test_shared_lsb_rejects_different_prefix():
    with pytest.raises(ParameterError):
        build_lookup([[GridAngle(4, 3), GridAngle(4, 4)]], SharedLSB(2))


def test_lookup_rejects_mixed_widths():
    with pytest.raises(ParameterError):
        build_lookup([GridAngle(3, 1), GridAngle(4, 1)])


def test_apply_lookup_involution_exhaustive():
    t = build_lookup([GridAngle(3, i) for i in (1, 5, 2)])
    for j in range(3):
        assert apply_lookup(t, j, 0) == (j, t.data[j])
        for z in range(8):
            jj, z1 = apply_lookup(t, j, z)
            assert jj == j and z1 == z ^ t.data[j]
            assert apply_lookup(t, j, z1) == (j, z)
    with pytest.raises(IndexError):
        apply_lookup(t, 3, 0)


def test_gradient_amplitudes():
    v = PhaseGradientState(3).vector
    k = np.arange(8)
    assert np.allclose(v, np.exp(-2j * np.pi * k / 8) / math.sqrt(8), atol=1e-15)


def test_controlled_add_examples():
    g = PhaseGradientState(3)
    assert controlled_add_phase(0, g, 0) == pytest.approx(1)
    assert controlled_add_phase(1, g, 0) == pytest.approx(np.exp(2j * np.pi / 8), abs=1e-12)
    for l in range(8):
        assert controlled_add_phase(l, g, 1) == pytest.approx(np.conj(controlled_add_phase(l, g, 0)), abs=1e-12)
    with pytest.raises(ParameterError):
        controlled_add_phase(8, g, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.data())
def test_phase_linearity(bits, data):
    g = PhaseGradientState(bits)
    l1 = data.draw(st.integers(0, g.size - 1))
    l2 = data.draw(st.integers(0, g.size - 1))
    both = controlled_add_phase(l1, g, 0) * controlled_add_phase(l2, g, 0)
    assert both == pytest.approx(controlled_add_phase((l1 + l2) % g.size, g, 0), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10), st.data())
def test_subtractor_duality(bits, data):
    l = data.draw(st.integers(0, 2**bits - 1))
    add = add_permutation(l, bits)
    sub = subtract_via_complement(l, bits)
    assert np.array_equal(add[sub], np.arange(2**bits))
    assert np.array_equal(sub, (np.arange(2**bits) - l) % 2**bits)


def test_offset_grid_realized_angle():
    theta = FixedPointAngle.from_turns(0.3)
    g = offset_round(theta, 3)
    realized = g.to_fixed() + half_step(3)
    d = (float(realized) - 0.3) % 1
    assert min(d, 1 - d) <= 2**-4


def test_c1_degenerates_to_single_rotation():
    spec = MultiplexorSpec.from_turns([0.2])
    circ = lower_multiplexed(spec, 4)
    assert circ.control_qubits == 0
    assert [op.name for op in circ.ops] == ["Lookup", "FixLSB", "ControlledAdd", "Unlookup"]
    psi = np.array([0.6, 0.8])
    out, p0 = run(circ, psi)
    assert np.allclose(out, build_multiplexed_unitary(circ.realized_sequence().layers[0]) @ psi, atol=1e-12)
    assert p0 == pytest.approx(1, abs=1e-12)


def test_special_case_cost():
    spec = MultiplexorSpec.from_turns([0.1, 0.2, 0.3, 0.4])
    circ = lower_multiplexed(spec, 3)
    assert circ.estimate.toffoli == 3 + 2 * 4 + 1


def test_two_layers_k2_single_round():
    seq = SequenceSpec((MultiplexorSpec.from_turns([0.1, 0.2]), MultiplexorSpec.from_turns([0.7, 0.9])))
    circ = lower_multiplexed(seq, 3, k=2)
    assert [op.name for op in circ.ops].count("Lookup") == 1
    assert circ.tables[0].width == 6


def test_lookups_matched():
    seq = SequenceSpec.repeated(MultiplexorSpec.from_turns([0.1, 0.2, 0.3]), 5)
    circ = lower_multiplexed(seq, 3, k=2)
    depth = 0
    for op in circ.ops:
        depth += {"Lookup": 1, "Unlookup": -1}.get(op.name, 0)
        assert depth in (0, 1)
    assert depth == 0


def test_all_zero_identity():
    # realized angle 0 needs index 2^b - 1 on the offset grid; exact zero input rounds there
    spec = MultiplexorSpec.from_turns([0.0, 0.0])
    circ = lower_multiplexed(spec, 3)
    assert all(v == 7 or v == 0 for v in circ.layer_indices[0])
    psi = random_state(np.random.default_rng(0), 4)
    out, _ = run(circ, psi)
    direct = build_multiplexed_unitary(circ.realized_sequence().layers[0]) @ psi
    assert np.allclose(out, direct, atol=1e-12)


def test_circuit_identity_random(rng):
    for _ in range(30):
        c = int(rng.integers(1, 9))
        b = int(rng.integers(1, 6))
        spec = random_spec(rng, c)
        circ = lower_multiplexed(spec, b)
        psi = random_state(rng, 2 * c)
        out, p0 = run(circ, psi)
        direct = build_multiplexed_unitary(circ.realized_sequence().layers[0]) @ psi
        assert np.linalg.norm(out - direct) < 1e-12
        assert abs(p0 - 1) < 1e-12


def test_superposed_controls_branchwise(rng):
    spec = random_spec(rng, 4)
    circ = lower_multiplexed(spec, 4)
    alphas = random_state(rng, 4)
    psi = np.kron(alphas, np.array([1.0, 0.0]))
    out, _ = run(circ, psi)
    diag = np.diag(build_multiplexed_unitary(circ.realized_sequence().layers[0]))
    assert np.allclose(out[0::2], alphas * diag[0::2], atol=1e-12)
    assert np.allclose(out[1::2], 0, atol=1e-12)


def test_sequence_lowering_with_interleaved(rng):
    seq = random_sequence_spec(rng, 3, 3)
    circ = lower_multiplexed(seq, 3, k=2)
    psi = random_state(rng, 6)
    out, p0 = run(circ, psi)
    assert np.linalg.norm(out - sequence_unitary(circ.realized_sequence()) @ psi) < 1e-12
    assert abs(p0 - 1) < 1e-12


def test_randomized_lowering_shared_table(rng):
    # floor indices on the offset grid are even (2 and 4), so both samples keep the prefix
    spec = MultiplexorSpec.from_turns([0.35, 0.6])
    seq = SequenceSpec.repeated(spec, 2)
    for _ in range(10):
        circ = lower_multiplexed(seq, 3, k=2, mode="randomized", rng=rng)
        t = circ.tables[0]
        assert t.layout == "shared_lsb"
        assert t.width == 2 + 3 - 1
        psi = random_state(rng, 4)
        out, p0 = run(circ, psi)
        assert np.linalg.norm(out - sequence_unitary(circ.realized_sequence()) @ psi) < 1e-12
        assert abs(p0 - 1) < 1e-12


def test_shared_falls_back_on_carry():
    # floor index 1 is odd; a draw of (1, 2) cannot share the prefix
    seq = SequenceSpec.repeated(MultiplexorSpec.from_turns([0.3]), 2)
    rng = np.random.default_rng(3)
    layouts = {lower_multiplexed(seq, 3, k=2, mode="randomized", rng=rng).tables[0].layout for _ in range(40)}
    assert layouts == {"shared_lsb", "plain"}


def test_randomized_lowering_is_unbiased():
    # realized angles average to the input angle over the sampling
    spec = MultiplexorSpec.from_turns([0.3])
    rng = np.random.default_rng(5)
    vals = []
    for _ in range(4000):
        circ = lower_multiplexed(spec, 3, mode="randomized", rng=rng)
        vals.append(float(circ.realized_angles()[0][0]))
    assert abs(np.mean(vals) - 0.3) < 4 * 0.0625 / math.sqrt(4000)


def test_randomized_needs_rng():
    with pytest.raises(ParameterError):
        lower_multiplexed(MultiplexorSpec.from_turns([0.1]), 3, mode="randomized")


def test_lowering_cap():
    spec = MultiplexorSpec.from_turns([0.1] * 8)
    circ = lower_multiplexed(spec, 5)
    with pytest.raises(ResourceError):
        simulate_lowered(circ, random_state(np.random.default_rng(1), 16), cap=1024)


def test_json_schema():
    circ = lower_multiplexed(MultiplexorSpec.from_turns([0.125, 0.625]), 3)
    doc = json.loads(circ.to_json())
    assert doc["schema"] == SCHEMA
    assert doc["registers"] == {"control": 1, "target": 1, "angle": 3, "gradient": 4}
    assert doc["ops"][0] == {"op": "Lookup", "registers": ["control", "angle"], "params": {"table": 0}}
    assert doc["resources"]["toffoli"] == 3 + 4 + 1
