"""Dense simulation of multiplexed rotations and their randomized mixtures.

Register order is control (major) then target, so basis index ``2*j + t``
holds control value ``j`` and target bit ``t``. A multiplexed rotation is the
block-diagonal matrix with blocks ``diag(e^{2 pi i theta_j}, e^{-2 pi i theta_j})``.

Sequences apply their layers in order ``k = 0 .. n-1``; layer ``k`` applies the
interleaved target unitary ``V_k`` first and then the multiplexor ``U_k``, so
the overall operator is ``U_{n-1} V_{n-1} ... U_0 V_0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from . import config
from .angles import (
    FixedPointAngle,
    GridAngle,
    RandomizedAngle,
    expected_phase,
    phase,
    randomize,
    truncate_deterministic,
)
from .errors import InvariantError, ParameterError, ResourceError

__all__ = [
    "MultiplexorSpec",
    "SequenceSpec",
    "MixedUnitaryChannel",
    "DiamondReport",
    "check_unitary",
    "build_multiplexed_unitary",
    "multiplexor_diagonal",
    "expectation_unitary",
    "sequence_unitary",
    "sequence_expectation",
    "randomized_angles",
    "brute_force_mixture",
    "brute_force_average",
    "spectral_norm_diff",
    "diagonal_norm_diff",
    "trace_distance",
    "sampled_trace_distance",
    "TraceDistanceCheck",
    "trace_distance_check",
    "diamond_bound",
    "apply_sequence",
]

_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class MultiplexorSpec:
    """``c`` control values, each selecting its own Z-rotation angle."""

    angles: tuple[FixedPointAngle, ...]

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(self.angles))
        if len(self.angles) < 1:
            raise ParameterError("a multiplexor needs at least one control value")
        if not all(isinstance(a, FixedPointAngle) for a in self.angles):
            raise ParameterError("angles must be FixedPointAngle instances")

    @classmethod
    def from_turns(cls, turns: Sequence[float]) -> "MultiplexorSpec":
        return cls(tuple(FixedPointAngle.from_turns(t) for t in turns))

    @property
    def controls(self) -> int:
        return len(self.angles)

    @property
    def dimension(self) -> int:
        return 2 * self.controls


@dataclass(frozen=True)
class SequenceSpec:
    """``n`` multiplexors sharing one control register, interleaved with target unitaries."""

    layers: tuple[MultiplexorSpec, ...]
    interleaved: Optional[tuple[np.ndarray, ...]] = None
    shared_angles: bool = False

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ParameterError("a sequence needs at least one layer")
        c = self.layers[0].controls
        if any(layer.controls != c for layer in self.layers):
            raise ParameterError("all layers must share the same control count")
        if self.shared_angles and any(layer.angles != self.layers[0].angles for layer in self.layers):
            raise ParameterError("shared_angles requires every layer to use the same angle list")
        if self.interleaved is not None:
            vs = tuple(np.asarray(v, dtype=complex) for v in self.interleaved)
            if len(vs) != len(self.layers):
                raise ParameterError("need one interleaved unitary per layer")
            for v in vs:
                if v.shape != (2, 2):
                    raise ParameterError("interleaved unitaries act on the 2-dim target")
                check_unitary(v)
            object.__setattr__(self, "interleaved", vs)

    @classmethod
    def repeated(cls, spec: MultiplexorSpec, n: int, interleaved=None) -> "SequenceSpec":
        return cls(tuple([spec] * n), interleaved, shared_angles=True)

    @property
    def n(self) -> int:
        return len(self.layers)

    @property
    def controls(self) -> int:
        return self.layers[0].controls

    @property
    def dimension(self) -> int:
        return 2 * self.controls

    def target_unitary(self, k: int) -> np.ndarray:
        return _I2 if self.interleaved is None else self.interleaved[k]


Spec = Union[MultiplexorSpec, SequenceSpec]


@dataclass
class MixedUnitaryChannel:
    """A probabilistic mixture ``rho -> sum_i p_i U_i rho U_i^dagger``."""

    probabilities: np.ndarray
    unitaries: np.ndarray
    outcomes: list = field(default_factory=list)

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.unitaries = np.asarray(self.unitaries, dtype=complex)
        if self.unitaries.ndim != 3 or self.unitaries.shape[1] != self.unitaries.shape[2]:
            raise ParameterError("unitaries must have shape (K, d, d)")
        if len(self.probabilities) != len(self.unitaries):
            raise ParameterError("one probability per unitary")
        if np.any(self.probabilities < 0) or abs(self.probabilities.sum() - 1) > config.MATRIX_ATOL:
            raise ParameterError("probabilities must be non-negative and sum to 1")

    @property
    def dimension(self) -> int:
        return self.unitaries.shape[1]

    def average(self) -> np.ndarray:
        """Probability-weighted matrix sum ``E[U]``."""
        return np.einsum("k,kij->ij", self.probabilities, self.unitaries)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Apply the channel to a density matrix on the channel's own space."""
        return np.einsum("k,kij,jl,kml->im", self.probabilities, self.unitaries, rho, self.unitaries.conj())


def check_unitary(m: np.ndarray, atol: float = config.MATRIX_ATOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError("expected a square matrix")
    if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > atol:
        raise ParameterError("matrix is not unitary within tolerance")
    return m


def _check_cap(dimension: int, cap: Optional[int]) -> None:
    cap = config.SIMULATOR_CAP if cap is None else cap
    if dimension > cap:
        raise ResourceError(f"dimension {dimension} exceeds simulator cap {cap}")


def _diag_from_phases(phases: np.ndarray) -> np.ndarray:
    """Interleave ``e^{+i..}`` and its conjugate along the last axis."""
    out = np.empty(phases.shape[:-1] + (2 * phases.shape[-1],), dtype=complex)
    out[..., 0::2] = phases
    out[..., 1::2] = np.conj(phases)
    return out


def multiplexor_diagonal(spec: MultiplexorSpec, bits: Optional[int] = None) -> np.ndarray:
    """Diagonal of the multiplexed rotation, exact or on deterministically rounded angles."""
    if bits is None:
        turns = [a.turns for a in spec.angles]
    else:
        turns = [truncate_deterministic(a, bits).turns for a in spec.angles]
    return _diag_from_phases(np.array([phase(t) for t in turns]))


def build_multiplexed_unitary(spec: MultiplexorSpec, bits: Optional[int] = None, cap: Optional[int] = None) -> np.ndarray:
    """Dense ``sum_j |j><j| (x) exp(2 pi i theta_j Z)``.

    With ``bits`` given, every angle is first rounded to the nearest ``bits``-bit
    grid point.
    """
    _check_cap(spec.dimension, cap)
    return np.diag(multiplexor_diagonal(spec, bits))


def _expected_diagonal(spec: MultiplexorSpec, b: int) -> np.ndarray:
    return _diag_from_phases(np.array([expected_phase(randomize(a, b)) for a in spec.angles]))


def expectation_unitary(spec: MultiplexorSpec, b: int, cap: Optional[int] = None) -> np.ndarray:
    """``E[U_Theta]`` under independent randomized rounding of every angle (not unitary)."""
    _check_cap(spec.dimension, cap)
    return np.diag(_expected_diagonal(spec, b))


def _embed_target(v: np.ndarray, c: int) -> np.ndarray:
    return np.kron(np.eye(c), v)


def sequence_unitary(seq: SequenceSpec, bits: Optional[int] = None, cap: Optional[int] = None) -> np.ndarray:
    """``U_{n-1} V_{n-1} ... U_0 V_0`` with exact or rounded angles."""
    _check_cap(seq.dimension, cap)
    out = np.eye(seq.dimension, dtype=complex)
    for k, layer in enumerate(seq.layers):
        out = multiplexor_diagonal(layer, bits)[:, None] * (_embed_target(seq.target_unitary(k), seq.controls) @ out)
    return out


def sequence_expectation(seq: SequenceSpec, b: int, cap: Optional[int] = None) -> np.ndarray:
    """Expected sequence operator; layers are randomized independently, so it factorizes."""
    _check_cap(seq.dimension, cap)
    out = np.eye(seq.dimension, dtype=complex)
    for k, layer in enumerate(seq.layers):
        out = _expected_diagonal(layer, b)[:, None] * (_embed_target(seq.target_unitary(k), seq.controls) @ out)
    return out


def _as_sequence(spec: Spec) -> SequenceSpec:
    return spec if isinstance(spec, SequenceSpec) else SequenceSpec((spec,))


def randomized_angles(spec: Spec, b: int) -> list[tuple[int, int, RandomizedAngle]]:
    """``(layer, control, RandomizedAngle)`` for every angle with ``r > 0``."""
    seq = _as_sequence(spec)
    out = []
    for k, layer in enumerate(seq.layers):
        for j, a in enumerate(layer.angles):
            ra = randomize(a, b)
            if not ra.is_deterministic:
                out.append((k, j, ra))
    return out


def _outcome_unitaries(seq: SequenceSpec, b: int, random_sites, bits_block: np.ndarray) -> np.ndarray:
    """Full unitaries for a block of Bernoulli outcome rows (shape ``(K, m)``)."""
    c = seq.controls
    base_turns = np.array(
        [[float(randomize(a, b).base.turns) for a in layer.angles] for layer in seq.layers]
    )
    K = bits_block.shape[0]
    turns = np.broadcast_to(base_turns, (K,) + base_turns.shape).copy()
    step = 2.0**-b
    for col, (k, j, _) in enumerate(random_sites):
        turns[:, k, j] += step * bits_block[:, col]
    diags = _diag_from_phases(np.exp(2j * np.pi * turns))
    out = np.broadcast_to(np.eye(2 * c, dtype=complex), (K, 2 * c, 2 * c)).copy()
    for k in range(seq.n):
        out = diags[:, k, :, None] * (_embed_target(seq.target_unitary(k), c) @ out)
    return out


def _outcome_rows(m: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int64)


def _outcome_probabilities(random_sites, rows: np.ndarray) -> np.ndarray:
    probs = np.ones(rows.shape[0])
    for col, (_, _, ra) in enumerate(random_sites):
        r = float(ra.bernoulli_r)
        probs *= np.where(rows[:, col] == 1, r, 1.0 - r)
    return probs


def _check_enumerable(seq: SequenceSpec, m: int, cap: Optional[int]) -> None:
    _check_cap(seq.dimension, cap)
    if m > config.MAX_ENUMERATED_ANGLES:
        raise ResourceError(f"{m} randomized angles exceed enumeration limit {config.MAX_ENUMERATED_ANGLES}")


def brute_force_mixture(spec: Spec, b: int, cap: Optional[int] = None) -> MixedUnitaryChannel:
    """Enumerate every Bernoulli outcome combination as an explicit mixture.

    Probabilities are exact products of ``r`` and ``1 - r`` per angle. Each
    outcome is recorded as the tuple of upper/lower choices in the order of
    :func:`randomized_angles`.
    """
    seq = _as_sequence(spec)
    sites = randomized_angles(seq, b)
    m = len(sites)
    _check_enumerable(seq, m, cap)
    if (1 << m) * seq.dimension**2 > config.MIXTURE_MAX_ENTRIES:
        raise ResourceError("materialized mixture too large; use brute_force_average")
    exact = [Fraction(1)]
    for _, _, ra in sites:
        r = ra.bernoulli_r
        exact = [p * q for p in exact for q in (1 - r, r)]
    rows = _outcome_rows(m, 0, 1 << m)
    unitaries = _outcome_unitaries(seq, b, sites, rows)
    outcomes = [tuple(int(x) for x in row) for row in rows]
    return MixedUnitaryChannel(np.array([float(p) for p in exact]), unitaries, outcomes)


def brute_force_average(spec: Spec, b: int, cap: Optional[int] = None, chunk: int = 4096) -> np.ndarray:
    """Probability-weighted sum over all ``2**m`` outcomes, streamed in chunks."""
    seq = _as_sequence(spec)
    sites = randomized_angles(seq, b)
    m = len(sites)
    _check_enumerable(seq, m, cap)
    total = np.zeros((seq.dimension, seq.dimension), dtype=complex)
    for start in range(0, 1 << m, chunk):
        rows = _outcome_rows(m, start, min(1 << m, start + chunk))
        probs = _outcome_probabilities(sites, rows)
        total += np.einsum("k,kij->ij", probs, _outcome_unitaries(seq, b, sites, rows))
    return total


def spectral_norm_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Largest singular value of ``a - b``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ParameterError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b, 2))


def diagonal_norm_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral norm of ``a - b`` for diagonal matrices: ``max_j |a_jj - b_jj|``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ParameterError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.abs(np.diag(a) - np.diag(b))))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the Schatten 1-norm of ``rho - sigma`` (Hermitian inputs)."""
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))


def _reference_states(d: int, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    """Pure states on ``d (x) d``: a maximally entangled state plus random ones."""
    states = [np.eye(d, dtype=complex).reshape(d * d) / math.sqrt(d)]
    for i in range(count - 1):
        dim = d * d if i % 2 == 0 else d
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        if dim == d:
            v = np.kron(v, np.eye(d)[0])
        states.append(v / np.linalg.norm(v))
    return states


def sampled_trace_distance(
    u: np.ndarray, channel: MixedUnitaryChannel, rng: np.random.Generator, n_states: int = 20
) -> float:
    """Largest trace distance between ``U (x) I`` and ``channel (x) I`` outputs over sampled inputs.

    This is a lower bound on the diamond distance. Inputs live on the system
    doubled with a reference of equal dimension.
    """
    d = channel.dimension
    best = 0.0
    for psi in _reference_states(d, rng, n_states):
        # (A (x) I) vec(Psi) == vec(A Psi) with row-major vectorization
        mat = psi.reshape(d, d)
        out = (u @ mat).reshape(-1)
        rho = np.outer(out, out.conj())
        outs = (channel.unitaries @ mat).reshape(len(channel.unitaries), d * d)
        sigma = np.einsum("k,ki,kj->ij", channel.probabilities, outs, outs.conj())
        best = max(best, trace_distance(rho, sigma))
    return best


@dataclass(frozen=True)
class TraceDistanceCheck:
    """Sampled lower bound on the diamond distance next to ``||U - E[U']||``.

    With the half-trace-norm convention the provable relation is
    ``D <= 2 ||U - E[U']||``; a single qubit mixing ``+-phi`` at equal weight
    reaches ``(1 + cos phi)`` times the norm. ``tight_holds`` reports the
    factor-one comparison without asserting it.
    """

    lower: float
    norm: float

    @property
    def upper(self) -> float:
        return 2.0 * self.norm

    @property
    def holds(self) -> bool:
        return self.lower <= self.upper + 1e-10

    @property
    def tight_holds(self) -> bool:
        return self.lower <= self.norm + 1e-10

    def to_dict(self) -> dict:
        return {
            "trace_distance_lower": self.lower,
            "norm": self.norm,
            "upper": self.upper,
            "holds": self.holds,
            "factor_one_holds": self.tight_holds,
        }


def trace_distance_check(
    u: np.ndarray, channel: MixedUnitaryChannel, rng: np.random.Generator, n_states: int = 20
) -> TraceDistanceCheck:
    lower = sampled_trace_distance(u, channel, rng, n_states)
    return TraceDistanceCheck(lower, spectral_norm_diff(u, channel.average()))


@dataclass(frozen=True)
class DiamondReport:
    bits: int
    layers: int
    analytic: float
    computed: float
    computed_diagonal: Optional[float]

    @property
    def holds(self) -> bool:
        return self.computed <= self.analytic + config.MATRIX_ATOL

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "layers": self.layers,
            "analytic_bound": self.analytic,
            "computed_norm": self.computed,
            "computed_diagonal": self.computed_diagonal,
            "holds": self.holds,
        }


def diamond_bound(spec: Spec, b: int, cap: Optional[int] = None) -> DiamondReport:
    """Analytic ``n pi^2 / 2^(2b+1)`` bound next to the computed ``||U - E[U']||``.

    Raises :class:`InvariantError` if the computed norm exceeds the analytic
    bound by more than the matrix tolerance.
    """
    seq = _as_sequence(spec)
    exact = sequence_unitary(seq, cap=cap)
    expected = sequence_expectation(seq, b, cap=cap)
    computed = spectral_norm_diff(exact, expected)
    diag = None
    if seq.interleaved is None:
        diag = diagonal_norm_diff(exact, expected)
        if abs(diag - computed) > config.MATRIX_ATOL:
            raise InvariantError(f"SVD norm {computed} and diagonal norm {diag} disagree")
    report = DiamondReport(b, seq.n, seq.n * math.pi**2 / 2 ** (2 * b + 1), computed, diag)
    if not report.holds:
        raise InvariantError(f"computed {computed} exceeds analytic bound {report.analytic}")
    return report


def _assignment_turns(layer: MultiplexorSpec, angles) -> list:
    if angles is None:
        return [a.turns for a in layer.angles]
    if len(angles) != layer.controls:
        raise ParameterError("assignment must give one angle per control value")
    return [a.turns for a in angles]


def apply_sequence(
    seq: SequenceSpec,
    state: np.ndarray,
    assignment: Optional[Sequence[Sequence[Union[GridAngle, FixedPointAngle]]]] = None,
    cap: Optional[int] = None,
) -> np.ndarray:
    """Apply the sequence to a state using a sampled angle assignment.

    ``assignment[k][j]`` replaces angle ``j`` of layer ``k``; ``None`` uses the
    exact angles.
    """
    _check_cap(seq.dimension, cap)
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (seq.dimension,):
        raise ParameterError(f"state must have shape ({seq.dimension},)")
    if abs(np.linalg.norm(psi) - 1) > config.MATRIX_ATOL:
        raise ParameterError("input state is not normalized")
    if assignment is not None and len(assignment) != seq.n:
        raise ParameterError("assignment must cover every layer")
    for k, layer in enumerate(seq.layers):
        turns = _assignment_turns(layer, None if assignment is None else assignment[k])
        psi = (psi.reshape(seq.controls, 2) @ seq.target_unitary(k).T).reshape(-1)
        psi = _diag_from_phases(np.array([phase(t) for t in turns])) * psi
    return psi
