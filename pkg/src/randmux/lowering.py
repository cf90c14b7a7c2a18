"""Lowering of multiplexed rotations to lookup + phase-gradient adder circuits.

Registers, in tensor order: control (``ceil(log2 c)`` qubits), target (1),
angle (``width`` bits) and phase gradient (``b+1`` bits). Integer registers are
little-endian: qubit ``i`` carries bit ``i`` of the register value.

Each rotation adds the ``(b+1)``-bit integer ``l = 2*v + 1`` into the phase
gradient register, where ``v`` is the ``b``-bit value held in the angle
register and the constant least-significant bit comes from ``FixLSB``. The
rotation realized is therefore ``v / 2**b + 2**-(b+1)`` turns: lowered
circuits round angles onto the grid offset by half a step, which keeps the
rounding error symmetric.

Lookup and unlookup are simulated as the XOR permutation they implement;
their Toffoli cost comes from :mod:`randmux.costs`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import config
from .angles import ANGLE_BITS, FixedPointAngle, GridAngle, randomize, sample, truncate_deterministic
from .channels import MultiplexorSpec, SequenceSpec
from .costs import CostParams, ResourceEstimate, ceil_log2_ratio, total_cost
from .errors import InvariantError, ParameterError, ResourceError

__all__ = [
    "LookupTable",
    "SharedLSB",
    "PhaseGradientState",
    "Op",
    "LoweredCircuit",
    "build_lookup",
    "apply_lookup",
    "add_permutation",
    "subtract_via_complement",
    "controlled_add_phase",
    "half_step",
    "offset_round",
    "lower_multiplexed",
    "simulate_lowered",
    "reduce_to_system",
    "SCHEMA",
]

SCHEMA = "randmux.lowered/1"


@dataclass(frozen=True)
class SharedLSB:
    """Replicate one angle ``n`` times, sharing its top ``b-1`` bits."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("replication count must be positive")


@dataclass(frozen=True)
class LookupTable:
    """``data[j]`` is XOR-ed into the angle register when the control holds ``j``.

    ``layout`` is ``"plain"`` (slot ``s`` occupies bits ``[s*b, (s+1)*b)``) or
    ``"shared_lsb"`` (bit ``s`` is the fresh low bit of slot ``s``; the shared
    ``b-1`` high bits sit above all of them).
    """

    controls: int
    width: int
    data: tuple[int, ...]
    slot_bits: int
    slots: int
    layout: str = "plain"

    def __post_init__(self):
        if len(self.data) != self.controls:
            raise ParameterError("one table row per control value")
        if any(not 0 <= d < (1 << self.width) for d in self.data):
            raise ParameterError("table entry wider than the table")

    def slot_value(self, z, s: int):
        """Value of slot ``s`` inside angle-register contents ``z`` (int or array)."""
        b = self.slot_bits
        if self.layout == "plain":
            return (z >> (s * b)) & ((1 << b) - 1)
        prefix = z >> self.slots
        return (prefix << 1) | ((z >> s) & 1)

    def rows(self) -> list[str]:
        """Table rows as bitstrings, most significant bit first."""
        return [format(d, f"0{self.width}b") for d in self.data]

    def to_dict(self) -> dict:
        return {
            "controls": self.controls,
            "width": self.width,
            "slot_bits": self.slot_bits,
            "slots": self.slots,
            "layout": self.layout,
            "rows": self.rows(),
        }


def build_lookup(
    angles: Sequence[Union[GridAngle, Sequence[GridAngle]]],
    replication: Union[str, SharedLSB] = "plain",
) -> LookupTable:
    """Pack per-control angle indices into a lookup table.

    Each element of ``angles`` is one ``GridAngle`` or a sequence of them (one
    per slot). With :class:`SharedLSB` every control must supply ``n`` angles
    that agree on their top ``b-1`` bits.
    """
    if len(angles) < 1:
        raise ParameterError("need at least one control value")
    rows = [[a] if isinstance(a, GridAngle) else list(a) for a in angles]
    widths = {g.bits for row in rows for g in row}
    if len(widths) != 1:
        raise ParameterError("all angles must have the same bit width")
    b = widths.pop()
    slots = {len(row) for row in rows}
    if len(slots) != 1:
        raise ParameterError("every control needs the same number of slots")
    k = slots.pop()
    if replication == "plain":
        data = tuple(sum(g.index << (s * b) for s, g in enumerate(row)) for row in rows)
        return LookupTable(len(rows), k * b, data, b, k)
    if not isinstance(replication, SharedLSB):
        raise ParameterError(f"unknown replication {replication!r}")
    if replication.n != k:
        raise ParameterError(f"shared_lsb({replication.n}) needs {replication.n} angles per control, got {k}")
    if b < 2:
        raise ParameterError("shared_lsb needs at least one shared bit (b >= 2)")
    data = []
    for row in rows:
        prefixes = {g.index >> 1 for g in row}
        if len(prefixes) != 1:
            raise ParameterError("replicated angles differ above the least significant bit")
        lsbs = sum((g.index & 1) << s for s, g in enumerate(row))
        data.append((prefixes.pop() << k) | lsbs)
    return LookupTable(len(rows), k + b - 1, tuple(data), b, k, "shared_lsb")


def apply_lookup(table: LookupTable, j: int, z: int) -> tuple[int, int]:
    """``|j>|z> -> |j>|z XOR data[j]>``."""
    if not 0 <= j < table.controls:
        raise IndexError(f"control value {j} outside table of {table.controls} rows")
    return j, z ^ table.data[j]


@dataclass(frozen=True)
class PhaseGradientState:
    """``sum_k exp(-2 pi i k / 2**bits) |k> / sqrt(2**bits)``."""

    bits: int

    @property
    def size(self) -> int:
        return 1 << self.bits

    @property
    def vector(self) -> np.ndarray:
        k = np.arange(self.size)
        return np.exp(-2j * np.pi * k / self.size) / math.sqrt(self.size)


def add_permutation(l: int, bits: int) -> np.ndarray:
    """Image of every register value under ``g -> g + l mod 2**bits``."""
    return (np.arange(1 << bits) + l) % (1 << bits)


def subtract_via_complement(l: int, bits: int) -> np.ndarray:
    """Image of every register value under subtraction built from an adder.

    Uses ``a - l == ~(~a + l)`` so only bit flips surround the adder.
    """
    mask = (1 << bits) - 1
    g = np.arange(1 << bits)
    return (((g ^ mask) + l) & mask) ^ mask


def _permute(vec: np.ndarray, image: np.ndarray, axis: int = -1) -> np.ndarray:
    out = np.empty_like(vec)
    idx = [slice(None)] * vec.ndim
    idx[axis] = image
    out[tuple(idx)] = vec
    return out


def controlled_add_phase(l: int, gradient: PhaseGradientState, x: int) -> complex:
    """Phase kicked back by adding (``x=0``) or subtracting (``x=1``) ``l``.

    The add is simulated on the gradient state vector; the result must be the
    same state up to a global phase, which is returned.
    """
    if not 0 <= l < gradient.size:
        raise ParameterError(f"addend {l} out of range for {gradient.bits} bits")
    if x not in (0, 1):
        raise ParameterError("control bit must be 0 or 1")
    phi = gradient.vector
    image = add_permutation(l, gradient.bits) if x == 0 else subtract_via_complement(l, gradient.bits)
    out = _permute(phi, image)
    overlap = complex(np.vdot(phi, out))
    if abs(abs(overlap) - 1) > config.MATRIX_ATOL:
        raise InvariantError("phase gradient state was not returned up to phase")
    return overlap


def half_step(b: int) -> FixedPointAngle:
    """``2**-(b+1)`` turns, the offset contributed by the fixed adder LSB."""
    return FixedPointAngle(1 << (ANGLE_BITS - b - 1))


def offset_round(theta: FixedPointAngle, b: int) -> GridAngle:
    """Register value whose lowered rotation is closest to ``theta``."""
    return truncate_deterministic(theta - half_step(b), b)


@dataclass(frozen=True)
class Op:
    name: str
    registers: tuple[str, ...]
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"op": self.name, "registers": list(self.registers), "params": dict(self.params)}


@dataclass
class LoweredCircuit:
    controls: int
    bits: int
    k: int
    lam: int
    lam_prime: int
    ops: list[Op]
    tables: list[LookupTable]
    layer_indices: list[tuple[int, ...]]
    interleaved: Optional[tuple[np.ndarray, ...]]
    estimate: ResourceEstimate
    notes: list[str] = field(default_factory=list)

    @property
    def control_qubits(self) -> int:
        return ceil_log2_ratio(self.controls, 1)

    @property
    def angle_width(self) -> int:
        return max(t.width for t in self.tables)

    @property
    def dimension(self) -> int:
        return (1 << self.control_qubits) * 2 * (1 << self.angle_width) * (1 << (self.bits + 1))

    @property
    def n(self) -> int:
        return len(self.layer_indices)

    def realized_angles(self) -> list[tuple[FixedPointAngle, ...]]:
        """Per layer, the rotation angles the circuit actually applies."""
        shift = ANGLE_BITS - self.bits
        off = half_step(self.bits)
        return [tuple(FixedPointAngle(v << shift) + off for v in layer) for layer in self.layer_indices]

    def realized_sequence(self) -> SequenceSpec:
        layers = tuple(MultiplexorSpec(a) for a in self.realized_angles())
        return SequenceSpec(layers, self.interleaved)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "bits": self.bits,
            "controls": self.controls,
            "layers": self.n,
            "params": {"k": self.k, "lambda": self.lam, "lambda_prime": self.lam_prime},
            "registers": {
                "control": self.control_qubits,
                "target": 1,
                "angle": self.angle_width,
                "gradient": self.bits + 1,
            },
            "bit_order": "little-endian",
            "tables": [t.to_dict() for t in self.tables],
            "ops": [op.to_dict() for op in self.ops],
            "resources": self.estimate.to_dict(),
            "notes": list(self.notes),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _layer_indices(seq: SequenceSpec, b: int, mode: str, rng) -> list[tuple[int, ...]]:
    out = []
    for layer in seq.layers:
        if mode == "deterministic":
            out.append(tuple(offset_round(a, b).index for a in layer.angles))
        elif mode == "randomized":
            if rng is None:
                raise ParameterError("randomized lowering needs an rng")
            out.append(tuple(sample(randomize(a - half_step(b), b), rng).index for a in layer.angles))
        else:
            raise ParameterError(f"unknown mode {mode!r}")
    return out


def lower_multiplexed(
    spec: Union[MultiplexorSpec, SequenceSpec],
    b: int,
    k: int = 1,
    lam: int = 1,
    lam_prime: int = 1,
    mode: str = "deterministic",
    rng: Optional[np.random.Generator] = None,
    share_lsb: bool = True,
    cost_mode: str = "strict_pow2",
) -> LoweredCircuit:
    """Lower a multiplexor (or a sequence of them) to lookup, adds and unlookup.

    Rotations are grouped ``k`` at a time behind one lookup of width ``k*b``.
    ``mode="randomized"`` samples every angle independently from its two-point
    distribution using ``rng``. For ``shared_angles`` sequences the lookup
    shares the top ``b-1`` bits across a group whenever the sampled indices
    allow it.
    """
    seq = spec if isinstance(spec, SequenceSpec) else SequenceSpec((spec,))
    if not 1 <= b <= ANGLE_BITS - 2:
        raise ParameterError("bits out of range")
    if not 1 <= k <= seq.n:
        raise ParameterError(f"k must lie in [1, n={seq.n}]")
    c = seq.controls
    params = CostParams(seq.n, c, b, k, lam, lam_prime, cost_mode)
    indices = _layer_indices(seq, b, mode, rng)
    ops: list[Op] = []
    tables: list[LookupTable] = []
    notes = ["phase-gradient state preparation is a one-time cost and is not counted"]
    widths = []
    for start in range(0, seq.n, k):
        group = list(range(start, min(seq.n, start + k)))
        rows = [[GridAngle(b, indices[layer][j]) for layer in group] for j in range(c)]
        table = None
        if seq.shared_angles and share_lsb and len(group) > 1 and b >= 2:
            try:
                table = build_lookup(rows, SharedLSB(len(group)))
            except ParameterError:
                notes.append(f"round {len(tables)}: sampled indices differ above the LSB; plain table used")
        if table is None:
            table = build_lookup(rows)
        t = len(tables)
        tables.append(table)
        widths.append(table.width)
        ops.append(Op("Lookup", ("control", "angle"), {"table": t}))
        for slot, layer in enumerate(group):
            if seq.interleaved is not None:
                ops.append(Op("ApplyTarget", ("target",), {"layer": layer}))
            ops.append(Op("FixLSB", ("angle",), {"slot": slot}))
            ops.append(Op("ControlledAdd", ("angle", "gradient", "target"), {"table": t, "slot": slot, "layer": layer}))
        ops.append(Op("Unlookup", ("control", "angle"), {"table": t}))
    estimate = total_cost(params, lookup_width=max(widths) if seq.shared_angles else None)
    return LoweredCircuit(c, b, k, lam, lam_prime, ops, tables, indices, seq.interleaved, estimate, notes)


def _embed_input(circuit: LoweredCircuit, state: np.ndarray) -> np.ndarray:
    c = circuit.controls
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (2 * c,):
        raise ParameterError(f"input state must have shape ({2 * c},)")
    if abs(np.linalg.norm(psi) - 1) > config.MATRIX_ATOL:
        raise ParameterError("input state is not normalized")
    C = 1 << circuit.control_qubits
    W = 1 << circuit.angle_width
    full = np.zeros((C, 2, W, 1 << (circuit.bits + 1)), dtype=complex)
    full[:c, :, 0, :] = psi.reshape(c, 2)[:, :, None] * PhaseGradientState(circuit.bits + 1).vector
    return full


def simulate_lowered(circuit: LoweredCircuit, state: np.ndarray, cap: Optional[int] = None) -> np.ndarray:
    """Run the lowered circuit on ``state`` (control (x) target, dimension ``2c``).

    Returns the full register vector in control, target, angle, gradient
    order with the angle register initialized to zero and the gradient
    register holding the phase gradient state.
    """
    cap = config.LOWERING_CAP if cap is None else cap
    if circuit.dimension > cap:
        raise ResourceError(f"lowered circuit dimension {circuit.dimension} exceeds cap {cap}")
    psi = _embed_input(circuit, state)
    W = psi.shape[2]
    gbits = circuit.bits + 1
    z = np.arange(W)
    fix_lsb = False
    for op in circuit.ops:
        if op.name in ("Lookup", "Unlookup"):
            table = circuit.tables[op.params["table"]]
            for j in range(table.controls):
                psi[j] = _permute(psi[j], z ^ table.data[j], axis=1)
        elif op.name == "FixLSB":
            fix_lsb = True
        elif op.name == "ApplyTarget":
            v = circuit.interleaved[op.params["layer"]]
            psi = np.einsum("ab,jbzg->jazg", v, psi)
        elif op.name == "ControlledAdd":
            table = circuit.tables[op.params["table"]]
            values = table.slot_value(z, op.params["slot"])
            addends = 2 * values + (1 if fix_lsb else 0)
            fix_lsb = False
            for zi in range(W):
                l = int(addends[zi])
                psi[:, 0, zi] = _permute(psi[:, 0, zi], add_permutation(l, gbits), axis=-1)
                psi[:, 1, zi] = _permute(psi[:, 1, zi], subtract_via_complement(l, gbits), axis=-1)
        else:
            raise ParameterError(f"unknown op {op.name!r}")
    return psi.reshape(-1)


def reduce_to_system(circuit: LoweredCircuit, full: np.ndarray) -> tuple[np.ndarray, float]:
    """Project ancillas onto angle ``|0>`` and the gradient state.

    Returns the control (x) target state (dimension ``2c``) and the
    probability that the angle register reads all zeros.
    """
    C = 1 << circuit.control_qubits
    psi = np.asarray(full).reshape(C, 2, 1 << circuit.angle_width, 1 << (circuit.bits + 1))
    zero_prob = float(np.sum(np.abs(psi[:, :, 0, :]) ** 2))
    phi = PhaseGradientState(circuit.bits + 1).vector
    system = np.einsum("g,jtg->jt", phi.conj(), psi[:, :, 0, :])
    return system[: circuit.controls].reshape(-1), zero_prob
