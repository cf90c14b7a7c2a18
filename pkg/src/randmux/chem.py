"""Precision and multiplexed-rotation costs for qubitized chemistry walks.

Each half ``G (1 (x) ...) G^dagger`` of a Givens-rotation block is a
multiplexor with ``c`` controls and ``4(N-1)`` rotations, every angle used
four times. Only the counts ``N``, ``c`` and ``M`` enter; the Hamiltonian
factorizations themselves are not modeled.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .costs import CostParams, ResourceEstimate, _lambda_grid, total_cost, unlookup_cost
from .errors import ParameterError

__all__ = [
    "DEFAULT_EPSILON",
    "SystemSpec",
    "ChemEstimate",
    "bits_randomized",
    "bits_deterministic",
    "givens_lookup_width",
    "control_count_df",
    "control_count_thc",
    "estimate_system",
    "load_systems",
    "confidence_factor",
]

DEFAULT_EPSILON = 0.05


def control_count_df(R: int, Xi: int) -> int:
    """Givens rotations diagonalizing ``R+1`` quadratic terms of rank ``Xi``."""
    return (R + 1) * Xi


def control_count_thc(R: int, N: int) -> int:
    return R + N


def bits_randomized(M: float, N: int, epsilon: float = DEFAULT_EPSILON) -> int:
    """Bits so that ``2M`` randomized Givens halves stay within diamond distance ``epsilon``."""
    if M < 2 or N < 2:
        raise ParameterError("M and N must be at least 2")
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    return math.ceil(0.5 * math.log2(4 * M * (N - 1) * math.pi**2 / epsilon))


def randomized_error(M: float, N: int, b: int) -> float:
    """Total diamond-distance bound ``8 M (N-1) pi^2 / 2^(2b+1)``."""
    return 8 * M * (N - 1) * math.pi**2 / 2 ** (2 * b + 1)


def bits_deterministic(M: float, n_spin: int) -> int:
    """Rigorous deterministic-truncation precision ``ceil(log2(160 M N_spin))``."""
    if M <= 0 or n_spin <= 0:
        raise ParameterError("M and n_spin must be positive")
    return math.ceil(math.log2(160 * M * n_spin))


def givens_lookup_width(N: int, b: int) -> int:
    """Lookup output width with four-fold angle reuse and fresh low bits."""
    if N < 2:
        raise ParameterError("N must be at least 2")
    if b < 2:
        raise ParameterError("b must be at least 2 so replicated angles share a bit")
    return (N - 1) * (b - 1) + 4 * (N - 1)


@dataclass(frozen=True)
class SystemSpec:
    name: str
    representation: str
    N: int
    M: float
    lambda_tradeoff: int = 1
    epsilon: float = DEFAULT_EPSILON
    c: Optional[int] = None
    R: Optional[int] = None
    Xi: Optional[int] = None
    n_spin: Optional[int] = None
    baseline_toffoli: Optional[float] = None
    baseline_qubits: Optional[float] = None
    published_b_deterministic: Optional[int] = None
    published_b_randomized: Optional[int] = None
    published_toffoli_percent: Optional[float] = None
    published_qubit_percent: Optional[float] = None
    notes: str = ""

    def __post_init__(self):
        if self.representation not in ("DF", "THC"):
            raise ParameterError(f"representation must be DF or THC, got {self.representation!r}")
        derived = None
        if self.representation == "DF" and self.R is not None and self.Xi is not None:
            derived = control_count_df(self.R, self.Xi)
        elif self.representation == "THC" and self.R is not None:
            derived = control_count_thc(self.R, self.N)
        if self.c is None:
            if derived is None:
                raise ParameterError("give c, or R (and Xi for DF) to derive it")
            object.__setattr__(self, "c", derived)
        elif derived is not None and derived != self.c:
            raise ParameterError(f"c={self.c} inconsistent with factorization count {derived}")
        if self.N < 2 or self.c < 1 or self.M <= 0 or self.lambda_tradeoff < 1:
            raise ParameterError("N, c, M and lambda must be positive (N >= 2)")
        if self.n_spin is None:
            object.__setattr__(self, "n_spin", 2 * self.N)

    @classmethod
    def from_dict(cls, d: dict, epsilon: Optional[float] = None) -> "SystemSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown system fields: {sorted(unknown)}")
        d = dict(d)
        if epsilon is not None:
            d["epsilon"] = epsilon
        return cls(**d)

    @property
    def rotations(self) -> int:
        return 4 * (self.N - 1)


@dataclass(frozen=True)
class ChemEstimate:
    name: str
    b_randomized: int
    b_deterministic: int
    lookup_width: int
    lookup_width_deterministic: int
    mux_toffoli_per_query: int
    mux_ancilla: int
    mux_toffoli_per_query_deterministic: int
    mux_ancilla_deterministic: int
    lambda_prime: int
    error_bound: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _best_lambda_prime(c: int) -> int:
    return min((int(x) for x in _lambda_grid(c, "strict_pow2")), key=lambda lp: (unlookup_cost(c, lp).toffoli, lp))


def _mux_cost(spec: SystemSpec, b: int, width: int, lam_prime: int) -> ResourceEstimate:
    n = spec.rotations
    params = CostParams(n, spec.c, b, k=n, lam=spec.lambda_tradeoff, lam_prime=lam_prime, mode="relaxed")
    return total_cost(params, lookup_width=width)


def estimate_system(spec: SystemSpec) -> ChemEstimate:
    """Randomized and deterministic precision plus per-half multiplexor cost.

    Both variants write every angle of one Givens half in a single lookup
    round. With deterministic truncation the four uses of an angle are
    identical, so the table stores each angle once; the randomized table
    stores ``b-1`` shared bits plus four fresh low bits per angle.
    """
    b_r = bits_randomized(spec.M, spec.N, spec.epsilon)
    b_d = bits_deterministic(spec.M, spec.n_spin)
    w_r = givens_lookup_width(spec.N, b_r)
    w_d = (spec.N - 1) * b_d
    lam_prime = _best_lambda_prime(spec.c)
    rand = _mux_cost(spec, b_r, w_r, lam_prime)
    det = _mux_cost(spec, b_d, w_d, lam_prime)
    extras = {}
    # the baseline totals were computed at the published deterministic b, which may differ from b_d
    b_base = spec.published_b_deterministic or b_d
    base = det if b_base == b_d else _mux_cost(spec, b_base, (spec.N - 1) * b_base, lam_prime)
    if spec.baseline_toffoli is not None:
        # per walk query there are two Givens halves
        queries = 2 * spec.M
        new_total = spec.baseline_toffoli - queries * base.toffoli + queries * rand.toffoli
        extras["baseline_toffoli"] = spec.baseline_toffoli
        extras["randomized_toffoli"] = new_total
        extras["toffoli_percent"] = 100.0 * new_total / spec.baseline_toffoli
    if spec.baseline_qubits is not None:
        new_qubits = spec.baseline_qubits - base.ancilla + rand.ancilla
        extras["baseline_qubits"] = spec.baseline_qubits
        extras["randomized_qubits"] = new_qubits
        extras["qubit_percent"] = 100.0 * new_qubits / spec.baseline_qubits
    return ChemEstimate(
        spec.name, b_r, b_d, w_r, w_d, rand.toffoli, rand.ancilla, det.toffoli, det.ancilla,
        lam_prime, randomized_error(spec.M, spec.N, b_r), extras,
    )


def confidence_factor(delta: float, epsilon: float, p: float) -> float:
    """Informational phase-estimation factor ``delta/(eps+delta) * p/(p-eps)``."""
    if p <= epsilon:
        raise ParameterError("need p > epsilon")
    return delta / (epsilon + delta) * p / (p - epsilon)


def load_systems(source: Union[str, Path] = "builtin", epsilon: Optional[float] = None) -> list[SystemSpec]:
    """Read a system file (``{"systems": [...]}`` or a bare list); ``"builtin"`` uses the bundled rows."""
    if str(source) == "builtin":
        text = resources.files("randmux").joinpath("data/table2_systems.json").read_text()
    else:
        text = Path(source).read_text()
    payload = json.loads(text)
    rows = payload["systems"] if isinstance(payload, dict) else payload
    default_eps = payload.get("epsilon") if isinstance(payload, dict) else None
    eps = epsilon if epsilon is not None else default_eps
    return [SystemSpec.from_dict(row, eps) for row in rows]
