"""Single-shot error of randomized multiplexor sequences.

Analytic endpoints (mean bound, tail bound and the bit counts they imply) sit
next to a seeded Monte Carlo that samples fresh angles per trial and measures
``||(U~ - U)|psi>||`` on a basket of input states.

Randomness is keyed: the Bernoulli draw for ``(seed, trial, layer, control)``
is a pure function of that tuple, so results do not depend on trial order or
on how trials are chunked.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

from . import config
from .angles import FixedPointAngle, randomize
from .channels import MultiplexorSpec, SequenceSpec, sequence_expectation, sequence_unitary, spectral_norm_diff
from .errors import ParameterError, ResourceError

__all__ = [
    "TAIL_BITS_CONSTANT",
    "MEAN_BITS_CONSTANT",
    "TailParams",
    "MonteCarloReport",
    "expected_error_bound",
    "tail_bound",
    "bits_for_tail",
    "mean_bits",
    "keyed_uint64",
    "state_basket",
    "random_sequence",
    "run_monte_carlo",
]

TAIL_BITS_CONSTANT = 0.5 * math.log2(32 * math.e * math.pi**2)
MEAN_BITS_CONSTANT = math.log2(4 * math.pi)


@dataclass(frozen=True)
class TailParams:
    n: int
    b: int
    epsilon: float
    p: float

    def __post_init__(self):
        if self.n < 1 or self.b < 1:
            raise ParameterError("n and b must be positive")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        if not 0 < self.p < 1:
            raise ParameterError("p must lie in (0, 1)")


def expected_error_bound(n: int, b: int) -> float:
    """``4 pi sqrt(n) / 2^b``."""
    if n < 1 or b < 1:
        raise ParameterError("n and b must be positive")
    return 4 * math.pi * math.sqrt(n) / 2**b


def tail_bound(epsilon: float, b: int, n: int) -> float:
    """``exp(-eps^2 2^(2b) / (32 e pi^2 n))``, at most 1."""
    if n < 1 or b < 1 or epsilon < 0:
        raise ParameterError("need n, b >= 1 and epsilon >= 0")
    return min(1.0, math.exp(-(epsilon**2) * 4.0**b / (32 * math.e * math.pi**2 * n)))


def bits_for_tail(p: float, epsilon: float, n: int) -> float:
    """Bits making the tail bound at ``epsilon`` equal to ``p``."""
    TailParams(n, 1, epsilon, p)
    return 0.5 * math.log2(32 * math.e * math.pi**2 * math.log(1 / p)) + math.log2(math.sqrt(n) / epsilon)


def mean_bits(epsilon_bar: float, n: int) -> float:
    """Bits making the mean bound equal to ``epsilon_bar``."""
    if epsilon_bar <= 0 or n < 1:
        raise ParameterError("need epsilon_bar > 0 and n >= 1")
    return math.log2(4 * math.pi * math.sqrt(n) / epsilon_bar)


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def keyed_uint64(seed: int, trial, layer, index) -> np.ndarray:
    """Uniform 64-bit words keyed by ``(seed, trial, layer, index)`` (arrays broadcast)."""
    with np.errstate(over="ignore"):
        h = _mix64(np.full((), seed % 2**64, dtype=np.uint64) + _GOLDEN)
        for part in (trial, layer, index):
            h = _mix64(h ^ (np.asarray(part, dtype=np.uint64) + _GOLDEN))
    return h


def state_basket(d: int, strategy: str, seed: int) -> list[tuple[str, np.ndarray]]:
    """Canonical inputs, plus Haar-random ones for ``random``/``adversarial``."""
    c = d // 2
    states = [("basis0", np.eye(d, dtype=complex)[0]), ("uniform", np.full(d, 1 / math.sqrt(d), dtype=complex))]
    ghz = np.zeros(d, dtype=complex)
    ghz[0] = ghz[2 * (c - 1) + 1] = 1 / math.sqrt(2)
    states.append(("ghz", ghz))
    alternating = np.zeros(d, dtype=complex)
    alternating[2 * np.arange(c) + np.arange(c) % 2] = 1 / math.sqrt(c)
    states.append(("alternating", alternating))
    if strategy in ("random", "adversarial"):
        rng = np.random.default_rng([seed, 0x5EED])
        for i in range(4):
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            states.append((f"haar{i}", v / np.linalg.norm(v)))
    elif strategy != "fixed":
        raise ParameterError(f"unknown state strategy {strategy!r}")
    return states


def random_sequence(n: int, c: int, seed: int, interleave: bool = True) -> SequenceSpec:
    """Random angles and Haar-random target unitaries, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    layers = tuple(
        MultiplexorSpec(tuple(FixedPointAngle(int(x)) for x in rng.integers(0, 2**64, size=c, dtype=np.uint64)))
        for _ in range(n)
    )
    vs = tuple(unitary_group.rvs(2, random_state=rng) for _ in range(n)) if interleave else None
    return SequenceSpec(layers, vs)


@dataclass
class MonteCarloReport:
    trials: int
    seed: int
    bits: int
    n: int
    controls: int
    state_labels: list[str]
    errors: np.ndarray
    random_parts: np.ndarray
    systematic: float
    epsilons: list[float]
    analytic_mean_bound: float
    analytic_systematic_bound: float
    extra: dict = field(default_factory=dict)

    @property
    def empirical_mean(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def empirical_std(self) -> np.ndarray:
        return self.errors.std(axis=0, ddof=1) if self.trials > 1 else np.zeros(self.errors.shape[1])

    @property
    def worst_mean(self) -> float:
        """Largest per-state mean error: a lower bound on the max over states."""
        return float(self.empirical_mean.max())

    def tail_rows(self) -> list[dict]:
        rows = []
        for eps in self.epsilons:
            freq = (self.errors >= eps).mean(axis=0)
            bound = tail_bound(eps, self.bits, self.n)
            slack = 3 * math.sqrt(bound * (1 - bound) / self.trials)
            worst = float(freq.max())
            rows.append({
                "epsilon": eps,
                "empirical_tail": worst,
                "worst_state": self.state_labels[int(freq.argmax())],
                "analytic_bound": bound,
                "slack_3sigma": slack,
                "within_bound": worst <= bound + slack,
            })
        return rows

    def decomposition_holds(self, atol: float = config.MATRIX_ATOL) -> bool:
        return bool(np.all(self.errors <= self.systematic + self.random_parts + atol))

    def to_dict(self, include_samples: bool = False) -> dict:
        out = {
            "trials": self.trials,
            "seed": self.seed,
            "bits": self.bits,
            "n": self.n,
            "controls": self.controls,
            "states": self.state_labels,
            "empirical_mean": [float(x) for x in self.empirical_mean],
            "empirical_std": [float(x) for x in self.empirical_std],
            "worst_mean": self.worst_mean,
            "analytic_mean_bound": self.analytic_mean_bound,
            "systematic": self.systematic,
            "analytic_systematic_bound": self.analytic_systematic_bound,
            "decomposition_holds": self.decomposition_holds(),
            "tail": self.tail_rows(),
            **self.extra,
        }
        if include_samples:
            out["errors"] = self.errors.tolist()
        return out

    def tail_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["epsilon", "empirical_tail", "analytic_bound", "slack_3sigma", "within_bound", "worst_state"], lineterminator="\r\n")
        writer.writeheader()
        for row in self.tail_rows():
            writer.writerow(row)
        return buf.getvalue()


def _layer_tables(seq: SequenceSpec, b: int):
    base = np.empty((seq.n, seq.controls), dtype=np.int64)
    rem = np.empty((seq.n, seq.controls), dtype=np.uint64)
    for k, layer in enumerate(seq.layers):
        for j, a in enumerate(layer.angles):
            ra = randomize(a, b)
            base[k, j] = ra.base.index
            rem[k, j] = ra.remainder
    return base, rem


def _sampled_operators(seq: SequenceSpec, b: int, seed: int, trials: np.ndarray) -> np.ndarray:
    """Dense sampled sequence operators, shape ``(len(trials), d, d)``."""
    base, rem = _layer_tables(seq, b)
    c, d = seq.controls, seq.dimension
    t = trials[:, None, None]
    k = np.arange(seq.n)[None, :, None]
    j = np.arange(c)[None, None, :]
    words = keyed_uint64(seed, t, k, j)
    upper = (words >> np.uint64(b)) < rem[None]
    turns = (base[None] + upper) / 2.0**b
    phases = np.exp(2j * np.pi * turns)
    diag = np.empty(phases.shape[:-1] + (d,), dtype=complex)
    diag[..., 0::2] = phases
    diag[..., 1::2] = phases.conj()
    ops = np.broadcast_to(np.eye(d, dtype=complex), (len(trials), d, d)).copy()
    for layer in range(seq.n):
        v = np.kron(np.eye(c), seq.target_unitary(layer))
        ops = diag[:, layer, :, None] * (v @ ops)
    return ops


def run_monte_carlo(
    seq: SequenceSpec,
    b: int,
    trials: int = 10_000,
    seed: int = 0,
    state_strategy: str = "random",
    epsilons: Optional[Sequence[float]] = None,
    chunk: int = 2048,
    cap: Optional[int] = None,
) -> MonteCarloReport:
    """Sample ``trials`` randomized instances of ``seq`` and record their errors.

    Each trial draws every angle afresh. For every basket state the report
    keeps ``||(U~ - U)|psi>||`` and the random part ``||(U~ - E[U~])|psi>||``;
    the systematic part ``||E[U~] - U||`` is computed exactly. The
    ``adversarial`` strategy adds the top right singular vector of the worst
    sampled deviation to the basket.
    """
    if trials < 1:
        raise ParameterError("need at least one trial")
    cap = config.SIMULATOR_CAP if cap is None else cap
    if seq.dimension > cap:
        raise ResourceError(f"dimension {seq.dimension} exceeds simulator cap {cap}")
    exact = sequence_unitary(seq, cap=cap)
    mean_op = sequence_expectation(seq, b, cap=cap)
    systematic = spectral_norm_diff(exact, mean_op)
    basket = state_basket(seq.dimension, state_strategy, seed)
    labels = [name for name, _ in basket]
    psis = np.stack([v for _, v in basket], axis=1)

    def measure(states: np.ndarray):
        errs = np.empty((trials, states.shape[1]))
        rand = np.empty_like(errs)
        target = exact @ states
        centre = mean_op @ states
        worst = (-1.0, None)
        for start in range(0, trials, chunk):
            idx = np.arange(start, min(trials, start + chunk), dtype=np.uint64)
            ops = _sampled_operators(seq, b, seed, idx)
            out = ops @ states
            e = np.linalg.norm(out - target, axis=1)
            errs[start:start + len(idx)] = e
            rand[start:start + len(idx)] = np.linalg.norm(out - centre, axis=1)
            i = int(np.unravel_index(np.argmax(e), e.shape)[0])
            if e[i].max() > worst[0]:
                worst = (float(e[i].max()), ops[i])
        return errs, rand, worst

    errors, random_parts, worst = measure(psis)
    extra = {"state_strategy": state_strategy}
    if state_strategy == "adversarial":
        _, _, vh = np.linalg.svd(worst[1] - exact)
        adv = vh[0].conj()
        e2, r2, _ = measure(adv[:, None])
        errors = np.concatenate([errors, e2], axis=1)
        random_parts = np.concatenate([random_parts, r2], axis=1)
        labels.append("adversarial")
    if epsilons is None:
        epsilons = default_epsilons(seq.n, b)
    return MonteCarloReport(
        trials=trials,
        seed=seed,
        bits=b,
        n=seq.n,
        controls=seq.controls,
        state_labels=labels,
        errors=errors,
        random_parts=random_parts,
        systematic=systematic,
        epsilons=[float(x) for x in epsilons],
        analytic_mean_bound=expected_error_bound(seq.n, b),
        analytic_systematic_bound=seq.n * math.pi**2 / 2 ** (2 * b + 1),
        extra=extra,
    )


def default_epsilons(n: int, b: int, count: int = 12) -> list[float]:
    """Thresholds spanning the mean bound up to where the tail bound is tiny."""
    scale = 4 * math.pi * math.sqrt(n) / 2**b
    return [float(x) for x in np.linspace(0.25 * scale, 4.0 * scale, count)]
