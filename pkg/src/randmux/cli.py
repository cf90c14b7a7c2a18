"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 resource error, 4 failed invariant
check. Every JSON document carries the package version, a hash of the
effective configuration and the seed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, config
from .angles import (
    FixedPointAngle,
    expected_phase,
    phase,
    phase_error_bound,
    randomize,
    truncate_deterministic,
)
from .channels import (
    MultiplexorSpec,
    SequenceSpec,
    brute_force_average,
    brute_force_mixture,
    diamond_bound,
    randomized_angles,
    sequence_expectation,
    sequence_unitary,
    trace_distance_check,
)
from .chem import estimate_system, load_systems
from .concentration import bits_for_tail, random_sequence, run_monte_carlo
from .costs import CostParams, main_result_bound, optimize_params, total_cost, tradeoff_frontier
from .errors import InvariantError, ParameterError, ResourceError
from .lowering import lower_multiplexed, reduce_to_system, simulate_lowered

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_INVARIANT = 0, 2, 3, 4
OUTPUT_DIR_ENV = "RANDMUX_OUTPUT_DIR"


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return json.dumps(x)
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, type(None), str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt_float(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _config_of(args: argparse.Namespace) -> dict:
    skip = {"func", "out_dir", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _envelope(args: argparse.Namespace, result: dict) -> dict:
    cfg = _config_of(args)
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()
    return {
        "tool": "randmux",
        "version": __version__,
        "command": args.command,
        "config": cfg,
        "config_hash": digest,
        "seed": getattr(args, "seed", 0),
        "result": result,
    }


def _emit(args, result: dict, rows: Optional[list[dict]] = None, pretty: Optional[str] = None) -> None:
    doc = _envelope(args, result)
    text_json = dumps(doc) + "\n"
    text_csv = to_csv(rows) if rows else ""
    if args.format == "json":
        sys.stdout.write(text_json)
    elif args.format == "csv":
        sys.stdout.write(text_csv or to_csv([_flatten(result)]))
    else:
        sys.stdout.write((pretty or text_json).rstrip("\n") + "\n")
    out_dir = args.out_dir or os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"{args.command}.json").write_text(text_json)
        if text_csv:
            (path / f"{args.command}.csv").write_text(text_csv)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


# --- round -----------------------------------------------------------------


def cmd_round(args) -> int:
    theta = FixedPointAngle.from_turns(args.theta)
    b = args.bits
    exact = phase(theta.turns)
    if args.mode == "deterministic":
        grid = truncate_deterministic(theta, b)
        approx = phase(grid.turns)
        result = {
            "mode": "deterministic",
            "theta": float(theta),
            "bits": b,
            "grid_index": grid.index,
            "grid_value": float(grid),
            "bitstring": grid.bitstring(),
        }
    else:
        ra = randomize(theta, b)
        approx = expected_phase(ra)
        result = {
            "mode": "randomized",
            "theta": float(theta),
            "bits": b,
            "base_index": ra.base.index,
            "base_value": float(ra.base),
            "upper_value": float(ra.base.successor()),
            "r": float(ra.bernoulli_r),
            "expected_phase": [approx.real, approx.imag],
            "expectation_exact": ra.expectation() == theta.turns,
        }
    err = abs(exact - approx)
    bound = phase_error_bound(b, args.mode).bound
    result.update({"error": err, "bound": bound, "within_bound": err <= bound})
    pretty = "\n".join(f"{k}: {v}" for k, v in result.items())
    _emit(args, result, pretty=pretty)
    return EXIT_OK


# --- simulate / lower -------------------------------------------------------


def _load_spec(path: Optional[str], args) -> SequenceSpec:
    if path is None:
        return random_sequence(args.layers, args.controls, args.seed, interleave=args.layers > 1)
    data = json.loads(Path(path).read_text())
    allowed = {"angles", "layers", "interleaved", "shared_angles", "repeat"}
    unknown = set(data) - allowed
    if unknown:
        raise ParameterError(f"unknown spec fields: {sorted(unknown)}")
    if "angles" in data:
        base = MultiplexorSpec.from_turns(data["angles"])
        repeat = int(data.get("repeat", 1))
        layers = tuple([base] * repeat)
        shared = repeat > 1
    else:
        layers = tuple(MultiplexorSpec.from_turns(a) for a in data["layers"])
        shared = bool(data.get("shared_angles", False))
    vs = None
    if data.get("interleaved") is not None:
        vs = tuple(np.array(v[0], dtype=float) + 1j * np.array(v[1], dtype=float) for v in data["interleaved"])
    return SequenceSpec(layers, vs, shared_angles=shared)


def cmd_simulate(args) -> int:
    seq = _load_spec(args.spec, args)
    b = args.bits
    checks = args.checks.split(",") if args.checks else ["theorem", "oracle", "lemma1", "circuit"]
    cap = args.cap
    result = {"controls": seq.controls, "layers": seq.n, "bits": b, "checks": {}}
    failed = []
    if "theorem" in checks:
        try:
            report = diamond_bound(seq, b, cap=cap)
            result["checks"]["theorem"] = {"status": "PASS", **report.to_dict()}
        except InvariantError as exc:
            result["checks"]["theorem"] = {"status": "FAIL", "detail": str(exc)}
            failed.append("theorem")
    m = len(randomized_angles(seq, b))
    if "oracle" in checks and m <= 16:
        avg = brute_force_average(seq, b, cap=cap)
        diff = float(np.max(np.abs(avg - sequence_expectation(seq, b, cap=cap))))
        ok = diff <= args.atol
        result["checks"]["oracle"] = {"status": "PASS" if ok else "FAIL", "randomized_angles": m, "max_entry_diff": diff}
        if not ok:
            failed.append("oracle")
    if "lemma1" in checks and m <= 10:
        channel = brute_force_mixture(seq, b, cap=cap)
        check = trace_distance_check(sequence_unitary(seq, cap=cap), channel, np.random.default_rng(args.seed))
        result["checks"]["lemma1"] = {"status": "PASS" if check.holds else "FAIL", **check.to_dict()}
        if not check.holds:
            failed.append("lemma1")
    if "circuit" in checks and seq.controls <= 8 and b <= 5:
        circuit = lower_multiplexed(seq, b)
        rng = np.random.default_rng(args.seed)
        psi = rng.normal(size=seq.dimension) + 1j * rng.normal(size=seq.dimension)
        psi /= np.linalg.norm(psi)
        full = simulate_lowered(circuit, psi)
        out, zero_prob = reduce_to_system(circuit, full)
        direct = sequence_unitary(circuit.realized_sequence(), cap=cap) @ psi
        diff = float(np.linalg.norm(out - direct))
        ok = diff <= args.atol and abs(zero_prob - 1) <= args.atol
        result["checks"]["circuit"] = {"status": "PASS" if ok else "FAIL", "state_diff": diff, "ancilla_zero_probability": zero_prob}
        if not ok:
            failed.append("circuit")
    result["passed"] = not failed
    pretty = "\n".join(f"{name}: {c['status']}" for name, c in result["checks"].items())
    _emit(args, result, pretty=pretty)
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_lower(args) -> int:
    seq = _load_spec(args.spec, args)
    rng = np.random.default_rng(args.seed)
    circuit = lower_multiplexed(
        seq, args.bits, k=args.k, lam=args.lam, lam_prime=args.lam_prime,
        mode=args.mode, rng=rng, cost_mode=args.cost_mode,
    )
    _emit(args, circuit.to_dict())
    return EXIT_OK


# --- cost -------------------------------------------------------------------


def _cost_inputs(args) -> dict:
    values = {"n": args.n, "c": args.c, "b": args.b, "epsilon": args.epsilon}
    if args.input:
        data = json.loads(Path(args.input).read_text())
        allowed = {"n", "c", "b", "epsilon", "k", "lambda", "lambda_prime", "mode", "budget"}
        unknown = set(data) - allowed
        if unknown:
            raise ParameterError(f"unknown cost fields: {sorted(unknown)}")
        for key, attr in (("k", "k"), ("lambda", "lam"), ("lambda_prime", "lam_prime"), ("mode", "mode"), ("budget", "budget")):
            if key in data and getattr(args, attr) in (None, "strict_pow2"):
                setattr(args, attr, data[key])
        values.update({k: data[k] for k in ("n", "c", "b", "epsilon") if k in data and values.get(k) is None})
    if values["n"] is None or values["c"] is None:
        raise ParameterError("cost needs --n and --c")
    if values["b"] is None:
        if values["epsilon"] is None:
            raise ParameterError("cost needs --b or --epsilon")
        n, eps = values["n"], values["epsilon"]
        if not 0 < eps < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        values["b"] = max(1, math.ceil(0.5 * math.log2(n * math.pi**2 / (2 * eps))))
    return values


def cmd_cost(args) -> int:
    v = _cost_inputs(args)
    n, c, b = v["n"], v["c"], v["b"]
    fixed = [args.k, args.lam, args.lam_prime]
    result = {"n": n, "c": c, "b": b, "mode": args.mode}
    if all(x is not None for x in fixed):
        params = CostParams(n, c, b, args.k, args.lam, args.lam_prime, args.mode)
        est = total_cost(params)
        result.update({"params": params.to_dict(), "estimate": est.to_dict(), "optimized": False})
        k = args.k
    elif any(x is not None for x in fixed):
        raise ParameterError("give all of --k, --lambda, --lambda-prime or none")
    else:
        opt = optimize_params(n, c, b, args.mode, args.budget)
        result.update({"optimized": True, **opt.to_dict()})
        if not opt.feasible:
            _emit(args, result)
            return EXIT_RESOURCE
        k = opt.params.k
    if v.get("epsilon") is not None:
        terms = main_result_bound(n, c, v["epsilon"], args.mode)
        result["main_result"] = {"bits": terms.bits, "leading": terms.leading, "subleading": terms.subleading, "total": terms.total}
    rows = tradeoff_frontier(n, c, b, k, args.mode) if c <= 1 << 20 else []
    result["frontier"] = rows
    est = result.get("estimate") or {}
    pretty = f"toffoli: {est.get('toffoli')}\nt_gates: {est.get('t_gates')}\nancilla: {est.get('ancilla')}"
    _emit(args, result, rows, pretty)
    return EXIT_OK


# --- chem -------------------------------------------------------------------


def cmd_chem(args) -> int:
    systems = load_systems(args.dataset, args.epsilon)
    rows = []
    for spec in systems:
        est = estimate_system(spec)
        rows.append({
            "system": spec.name,
            "representation": spec.representation,
            "N": spec.N,
            "c": spec.c,
            "M": spec.M,
            "lambda": spec.lambda_tradeoff,
            "epsilon": spec.epsilon,
            "n_spin": spec.n_spin,
            "b_deterministic": est.b_deterministic,
            "b_randomized": est.b_randomized,
            "published_b_deterministic": spec.published_b_deterministic,
            "lookup_width": est.lookup_width,
            "mux_toffoli_per_half": est.mux_toffoli_per_query,
            "mux_toffoli_per_half_deterministic": est.mux_toffoli_per_query_deterministic,
            "mux_ancilla": est.mux_ancilla,
            "mux_ancilla_deterministic": est.mux_ancilla_deterministic,
            "error_bound": est.error_bound,
        })
    pretty = "\n".join(f"{r['system']}: b_det={r['b_deterministic']} b_rand={r['b_randomized']}" for r in rows)
    _emit(args, {"systems": rows}, rows, pretty)
    return EXIT_OK


# --- tail -------------------------------------------------------------------


def cmd_tail(args) -> int:
    seq = random_sequence(args.n, args.c, args.seed, interleave=True)
    eps = [float(x) for x in args.epsilon.split(",")] if args.epsilon else None
    report = run_monte_carlo(seq, args.b, args.trials, args.seed, args.states, eps, cap=args.cap)
    result = report.to_dict()
    if args.p is not None:
        target = eps[0] if eps else report.analytic_mean_bound
        result["bits_for_tail"] = {"p": args.p, "epsilon": target, "bits": bits_for_tail(args.p, target, args.n)}
    rows = report.tail_rows()
    ok = report.worst_mean <= report.analytic_mean_bound and all(r["within_bound"] for r in rows if r["analytic_bound"] < 1)
    result["passed"] = bool(ok and report.decomposition_holds())
    pretty = f"worst mean error {report.worst_mean:.6g} vs bound {report.analytic_mean_bound:.6g}\n" + "\n".join(
        f"eps={r['epsilon']:.4g} tail={r['empirical_tail']:.4g} bound={r['analytic_bound']:.4g}" for r in rows
    )
    _emit(args, result, rows, pretty)
    return EXIT_OK if result["passed"] else EXIT_INVARIANT


# --- parser -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["json", "csv", "pretty"], default="json")
    p.add_argument("--out-dir", default=None, help=f"also write files here (default ${OUTPUT_DIR_ENV})")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randmux", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"randmux {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("round", help="round one angle deterministically or randomly")
    p.add_argument("--theta", type=float, required=True, help="angle in turns")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--mode", choices=["deterministic", "randomized"], default="deterministic")
    _common(p)
    p.set_defaults(func=cmd_round)

    for name, func, help_ in (
        ("simulate", cmd_simulate, "verify channel bounds and circuit identity"),
        ("lower", cmd_lower, "emit the lowered circuit as a JSON op list"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("spec", nargs="?", default=None, help="JSON spec file; random spec if omitted")
        p.add_argument("--bits", type=int, required=True)
        p.add_argument("--controls", type=int, default=4)
        p.add_argument("--layers", type=int, default=1)
        p.add_argument("--cap", type=int, default=config.SIMULATOR_CAP)
        _common(p)
        if name == "simulate":
            p.add_argument("--checks", default=None, help="comma list of theorem,oracle,lemma1,circuit")
            p.add_argument("--atol", type=float, default=config.MATRIX_ATOL, help="matrix comparison tolerance")
        else:
            p.add_argument("--k", type=int, default=1)
            p.add_argument("--lambda", dest="lam", type=int, default=1)
            p.add_argument("--lambda-prime", dest="lam_prime", type=int, default=1)
            p.add_argument("--mode", choices=["deterministic", "randomized"], default="deterministic")
            p.add_argument("--cost-mode", choices=["strict_pow2", "relaxed"], default="strict_pow2")
        p.set_defaults(func=func)

    p = sub.add_parser("cost", help="Toffoli/ancilla estimate and trade-off frontier")
    p.add_argument("--input", default=None, help="JSON file with the same fields")
    p.add_argument("--n", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--lambda-prime", dest="lam_prime", type=int)
    p.add_argument("--mode", choices=["strict_pow2", "relaxed"], default="strict_pow2")
    p.add_argument("--budget", type=int, default=None, help="ancilla budget")
    _common(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("chem", help="precision columns for chemistry systems")
    p.add_argument("--dataset", default="builtin")
    p.add_argument("--epsilon", type=float, default=None)
    _common(p)
    p.set_defaults(func=cmd_chem)

    p = sub.add_parser("tail", help="Monte Carlo check of the concentration bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--c", type=int, default=2)
    p.add_argument("--epsilon", default=None, help="comma-separated thresholds")
    p.add_argument("--p", type=float, default=None, help="failure probability for bits_for_tail")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--states", choices=["fixed", "random", "adversarial"], default="random")
    p.add_argument("--cap", type=int, default=config.SIMULATOR_CAP)
    _common(p)
    p.set_defaults(func=cmd_tail)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"randmux: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as exc:
        print(f"randmux: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except InvariantError as exc:
        print(f"randmux: invariant failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
