"""Closed-form Toffoli and ancilla costs for multiplexed rotations.

The circuit is ``ceil(n/k)`` rounds of table lookup (width ``k*b``), ``k``
phase-gradient rotations of ``b`` Toffolis each, and a measurement-based
unlookup. ``lam`` and ``lam_prime`` trade Toffolis against ancillae in the
lookup and unlookup.

Ancilla accounting: the peak over lookup, unlookup and rotation steps, plus
the registers that stay live for the whole circuit (control, target, the
``k*b``-bit angle register and the ``b+1``-bit phase gradient).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator, Literal, Optional

import numpy as np

from .errors import ParameterError

__all__ = [
    "CostParams",
    "ResourceEstimate",
    "OptimizationResult",
    "MainResultTerms",
    "is_power_of_two",
    "ceil_log2_ratio",
    "lookup_cost",
    "unlookup_cost",
    "rotation_cost",
    "total_cost",
    "persistent_qubits",
    "candidate_grid",
    "optimize_params",
    "tradeoff_frontier",
    "closed_form_target",
    "main_result_bound",
    "deterministic_leading_term",
]

Mode = Literal["strict_pow2", "relaxed"]


def is_power_of_two(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


def ceil_log2_ratio(num: int, den: int) -> int:
    """``ceil(log2(num/den))`` computed exactly, clamped at 0."""
    k = 0
    while den << k < num:
        k += 1
    return k


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class ResourceEstimate:
    toffoli: int
    ancilla: int

    @property
    def t_gates(self) -> int:
        return 4 * self.toffoli

    def __add__(self, other: "ResourceEstimate") -> "ResourceEstimate":
        """Sequential composition: Toffolis add, ancillae are reused (peak)."""
        return ResourceEstimate(self.toffoli + other.toffoli, max(self.ancilla, other.ancilla))

    def to_dict(self) -> dict:
        return {"toffoli": self.toffoli, "t_gates": self.t_gates, "ancilla": self.ancilla}


@dataclass(frozen=True)
class CostParams:
    n: int
    c: int
    b: int
    k: int = 1
    lam: int = 1
    lam_prime: int = 1
    mode: Mode = "strict_pow2"

    def __post_init__(self):
        for name in ("n", "c", "b", "k", "lam", "lam_prime"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
        if self.k > self.n:
            raise ParameterError("k must not exceed n")
        if self.lam > self.c or self.lam_prime > self.c:
            raise ParameterError("lam and lam_prime must not exceed c")
        if self.mode not in ("strict_pow2", "relaxed"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.mode == "strict_pow2" and not (is_power_of_two(self.lam) and is_power_of_two(self.lam_prime)):
            raise ParameterError("strict_pow2 mode needs power-of-two lam and lam_prime")

    @property
    def rounds(self) -> int:
        return _ceil_div(self.n, self.k)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_lambda(c: int, lam: int, strict: bool) -> None:
    if c < 1:
        raise ParameterError("c must be positive")
    if not 1 <= lam <= c:
        raise ParameterError(f"trade-off parameter must lie in [1, c={c}], got {lam}")
    if strict and not is_power_of_two(lam):
        raise ParameterError("trade-off parameter must be a power of two in strict mode")


def _division_surcharge(c: int, lam: int) -> int:
    # modular-division trick for non-power-of-two lam; 1 x ceil(log2 c) is a modeling choice
    return 0 if is_power_of_two(lam) else ceil_log2_ratio(c, 1)


def lookup_cost(c: int, w: int, lam: int = 1, strict: bool = True) -> ResourceEstimate:
    """Table lookup of ``c`` entries, ``w`` bits each."""
    _check_lambda(c, lam, strict)
    if w < 1:
        raise ParameterError("lookup width must be positive")
    toffoli = _ceil_div(c, lam) + (lam - 1) * w + _division_surcharge(c, lam)
    return ResourceEstimate(toffoli, ceil_log2_ratio(c, lam) + (lam - 1) * w)


def unlookup_cost(c: int, lam_prime: int = 1, strict: bool = True) -> ResourceEstimate:
    """Measurement-based uncomputation of a ``c``-entry lookup."""
    _check_lambda(c, lam_prime, strict)
    toffoli = _ceil_div(c, lam_prime) + lam_prime + _division_surcharge(c, lam_prime)
    return ResourceEstimate(toffoli, ceil_log2_ratio(c, lam_prime) + lam_prime)


def rotation_cost(b: int) -> ResourceEstimate:
    """Phase-gradient controlled rotation on ``b`` bits."""
    if b < 1:
        raise ParameterError("b must be positive")
    return ResourceEstimate(b, b)


def persistent_qubits(c: int, b: int, width: int) -> int:
    return ceil_log2_ratio(c, 1) + 1 + width + (b + 1)


def total_cost(params: CostParams, lookup_width: Optional[int] = None) -> ResourceEstimate:
    """Toffoli and ancilla count for ``n`` rotations in ``ceil(n/k)`` lookup rounds.

    ``lookup_width`` overrides the default ``k*b`` output width, e.g. for
    tables that share angle bits between repeated rotations.
    """
    p = params
    strict = p.mode == "strict_pow2"
    width = p.k * p.b if lookup_width is None else lookup_width
    look = lookup_cost(p.c, width, p.lam, strict)
    unlook = unlookup_cost(p.c, p.lam_prime, strict)
    rot = rotation_cost(p.b)
    toffoli = p.n * rot.toffoli + p.rounds * (look.toffoli + unlook.toffoli)
    peak = max(look.ancilla, unlook.ancilla, rot.ancilla)
    return ResourceEstimate(toffoli, peak + persistent_qubits(p.c, p.b, width))


def _lambda_grid(c: int, mode: Mode) -> np.ndarray:
    if mode == "strict_pow2":
        return 1 << np.arange(0, c.bit_length())
    return np.arange(1, c + 1)


def candidate_grid(n: int, c: int, b: int, mode: Mode = "strict_pow2") -> Iterator[CostParams]:
    """Every parameter point :func:`optimize_params` searches (small inputs only)."""
    lams = [int(x) for x in _lambda_grid(c, mode)]
    for k in range(1, n + 1):
        for lam in lams:
            for lam_prime in lams:
                yield CostParams(n, c, b, k, lam, lam_prime, mode)


@dataclass(frozen=True)
class OptimizationResult:
    feasible: bool
    params: Optional[CostParams]
    estimate: Optional[ResourceEstimate]
    searched: int

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "params": None if self.params is None else self.params.to_dict(),
            "estimate": None if self.estimate is None else self.estimate.to_dict(),
            "searched": self.searched,
        }


def _ceil_log2_array(c: int, lams: np.ndarray) -> np.ndarray:
    return np.array([ceil_log2_ratio(c, int(x)) for x in lams], dtype=np.int64)


def _surcharges(c: int, lams: np.ndarray) -> np.ndarray:
    return np.array([_division_surcharge(c, int(x)) for x in lams], dtype=np.int64)


def optimize_params(
    n: int,
    c: int,
    b: int,
    mode: Mode = "strict_pow2",
    ancilla_budget: Optional[int] = None,
) -> OptimizationResult:
    """Exhaustive search over ``k in 1..n`` and the ``lam``/``lam_prime`` grid.

    The Toffoli count separates into a lookup term and an unlookup term per
    round, and the ancilla peak is a max of per-step counts, so for each ``k``
    the two trade-off parameters are minimized independently; the result is
    the exact grid optimum. Ties prefer fewer ancillae, then smaller
    parameters.
    """
    CostParams(n, c, b, mode=mode)  # validates n, c, b and mode
    lams = _lambda_grid(c, mode).astype(np.int64)
    logs = _ceil_log2_array(c, lams)
    extra = _surcharges(c, lams)
    ceil_c = -(-c // lams)
    unlook_t = ceil_c + lams + extra
    unlook_a = logs + lams
    best = None
    for k in range(1, n + 1):
        width = k * b
        look_t = ceil_c + (lams - 1) * width + extra
        look_a = logs + (lams - 1) * width
        persist = persistent_qubits(c, b, width)
        if ancilla_budget is None:
            ok_l = np.ones(len(lams), bool)
            ok_u = ok_l
        else:
            room = ancilla_budget - persist
            if b > room:
                continue
            ok_l = look_a <= room
            ok_u = unlook_a <= room
            if not ok_l.any() or not ok_u.any():
                continue
        il = _argbest(look_t, look_a, ok_l)
        iu = _argbest(unlook_t, unlook_a, ok_u)
        params = CostParams(n, c, b, k, int(lams[il]), int(lams[iu]), mode)
        est = total_cost(params)
        key = (est.toffoli, est.ancilla, k, params.lam, params.lam_prime)
        if best is None or key < best[0]:
            best = (key, params, est)
    searched = n * len(lams) ** 2
    if best is None:
        return OptimizationResult(False, None, None, searched)
    return OptimizationResult(True, best[1], best[2], searched)


def _argbest(toffoli: np.ndarray, ancilla: np.ndarray, ok: np.ndarray) -> int:
    idx = np.flatnonzero(ok)
    order = np.lexsort((idx, ancilla[idx], toffoli[idx]))
    return int(idx[order[0]])


def tradeoff_frontier(n: int, c: int, b: int, k: Optional[int] = None, mode: Mode = "strict_pow2") -> list[dict]:
    """Best total cost for each lookup ``lam`` (``lam_prime`` optimized), at layering ``k``."""
    k = n if k is None else k
    rows = []
    for lam in _lambda_grid(c, mode):
        best = None
        for lam_prime in _lambda_grid(c, mode):
            params = CostParams(n, c, b, k, int(lam), int(lam_prime), mode)
            est = total_cost(params)
            if best is None or (est.toffoli, est.ancilla) < (best[1].toffoli, best[1].ancilla):
                best = (params, est)
        rows.append({"k": k, "lambda": int(lam), "lambda_prime": best[0].lam_prime, **best[1].to_dict()})
    return rows


def closed_form_target(n: int, c: int, b: int) -> float:
    """Asymptotic optimum ``n b + 2 sqrt(c) + 2 sqrt(c n b)``."""
    return n * b + 2 * math.sqrt(c) + 2 * math.sqrt(c * n * b)


@dataclass(frozen=True)
class MainResultTerms:
    bits: int
    leading: int
    subleading: int

    @property
    def total(self) -> int:
        return self.leading + self.subleading


def main_result_bound(n: int, c: int, epsilon: float, mode: Mode = "strict_pow2") -> MainResultTerms:
    """Leading ``n * ceil(log2(n pi^2 / 2 eps) / 2)`` plus the optimized lookup overhead."""
    if n < 1 or c < 1:
        raise ParameterError("n and c must be positive")
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    b = max(1, math.ceil(0.5 * math.log2(n * math.pi**2 / (2 * epsilon))))
    opt = optimize_params(n, c, b, mode)
    return MainResultTerms(b, n * b, opt.estimate.toffoli - n * b)


def deterministic_leading_term(n: int, epsilon: float) -> int:
    """``n * ceil(log2(n pi / eps))``, the leading term with deterministic rounding."""
    return n * math.ceil(math.log2(n * math.pi / epsilon))
