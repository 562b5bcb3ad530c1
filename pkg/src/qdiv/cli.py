"""Command-line frontend: state-file generation, quantity computation, and
audit execution with persisted reports.

Exit codes: 0 success (and all audited properties hold), 1 when any audited
property is violated (including the intentional mutation_dpi violation),
2 on input errors.

State files are JSON: ``{"dims": [d_a, d_b], "matrix": [[[re, im], ...], ...]}``
with the matrix row-major and every entry a [real, imaginary] pair.

Report files are JSON with the tool version, a config echo, the per-check
records, and a trailing ``timings_seconds`` key.  Everything except the
timing key is byte-deterministic for a fixed master seed;
``report_canonical_bytes`` strips exactly that key for comparisons.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .audit import (
    ALL_CHECKS,
    CHECK_NAMES,
    AuditConfig,
    AuditReport,
    record_to_dict,
    run_check,
    sample_state,
)
from .divergences import RENYI_KINDS, DivergenceSpec
from .linalg import ValidationError
from .quantities import OptimizerConfig, QuantityKind, SMOOTHED_FAMILIES, compute_quantity
from .states import BipartiteState, DensityOperator, max_entangled_state, maximally_mixed

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2

DIVERGENCE_ALIASES = {
    "umegaki": "umegaki",
    "petz": "petz_renyi",
    "sandwiched": "sandwiched_renyi",
    "geometric": "geometric_renyi",
    "dmax": "max_relative",
    "dh": "hypothesis_testing",
}

QUANTITIES = ("I1", "I2", "I3", "I4", "H1", "H2", "H3")

GEN_KINDS = ("random", "bell", "product", "maxmixed")


def format_number(x: float) -> str:
    """Human-readable numeric output: 12 significant digits, 'inf' for +∞."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


# ---------------------------------------------------------------------------
# State files
# ---------------------------------------------------------------------------


def state_to_dict(state: BipartiteState) -> dict:
    matrix = [
        [[float(z.real), float(z.imag)] for z in row] for row in state.matrix
    ]
    return {"dims": [state.dim_a, state.dim_b], "matrix": matrix}


def state_from_dict(data: dict) -> BipartiteState:
    if not isinstance(data, dict) or "dims" not in data or "matrix" not in data:
        raise ValidationError("state file must contain 'dims' and 'matrix'")
    dims = data["dims"]
    if (
        not isinstance(dims, (list, tuple))
        or len(dims) != 2
        or not all(isinstance(d, int) and d >= 1 for d in dims)
    ):
        raise ValidationError(f"dims must be a pair of positive integers, got {dims!r}")
    d = dims[0] * dims[1]
    rows = data["matrix"]
    if not isinstance(rows, list) or len(rows) != d:
        raise ValidationError(f"matrix must have {d} rows, got {len(rows)}")
    out = np.zeros((d, d), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != d:
            raise ValidationError(f"matrix[{i}]: expected {d} entries")
        for j, cell in enumerate(row):
            if (
                not isinstance(cell, (list, tuple))
                or len(cell) != 2
                or not all(isinstance(x, (int, float)) for x in cell)
            ):
                raise ValidationError(
                    f"matrix[{i}][{j}]: expected a [re, im] pair, got {cell!r}"
                )
            out[i, j] = complex(cell[0], cell[1])
    return BipartiteState(dims[0], dims[1], DensityOperator(out))


def write_state_file(path: str | None, state: BipartiteState) -> None:
    text = json.dumps(state_to_dict(state), sort_keys=True, separators=(",", ":"))
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def read_state_file(path: str) -> BipartiteState:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"state file is not valid JSON: {exc}") from exc
    return state_from_dict(data)


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------


def report_file_dict(
    report: AuditReport, config_echo: dict, timings: dict[str, float]
) -> dict:
    return {
        "tool": f"qdiv {__version__}",
        "config": config_echo,
        "master_seed": report.master_seed,
        "overall_pass": report.overall_pass,
        "checks": [record_to_dict(r) for r in report.records],
        "timings_seconds": timings,
    }


def report_canonical_bytes(report_data: dict) -> bytes:
    """Deterministic bytes for comparison: everything except wall-clock timing."""
    stripped = {k: v for k, v in report_data.items() if k != "timings_seconds"}
    return (json.dumps(stripped, sort_keys=True, separators=(",", ":")) + "\n").encode()


def write_report_file(path: str, report_data: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report_data, sort_keys=True, separators=(",", ":")) + "\n")


def read_report_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _parse_dim_pairs(text: str) -> tuple[tuple[int, int], ...]:
    pairs = []
    for chunk in text.split(","):
        bits = chunk.strip().lower().split("x")
        if len(bits) != 2:
            raise ValidationError(f"dims must look like AxB, got {chunk!r}")
        try:
            pair = (int(bits[0]), int(bits[1]))
        except ValueError as exc:
            raise ValidationError(f"dims must be integers, got {chunk!r}") from exc
        if pair[0] < 1 or pair[1] < 1:
            raise ValidationError(f"dims must be positive, got {chunk!r}")
        pairs.append(pair)
    return tuple(pairs)


def _build_divergence(args) -> DivergenceSpec:
    kind = DIVERGENCE_ALIASES[args.divergence]
    base = 2.0 if args.log_base == "2" else math.e
    alpha = args.alpha if kind in RENYI_KINDS else None
    if kind in RENYI_KINDS and alpha is None:
        raise ValidationError(f"--divergence {args.divergence} requires --alpha")
    epsilon = None
    if kind == "hypothesis_testing":
        if args.epsilon is None:
            raise ValidationError("--divergence dh requires --epsilon")
        epsilon = args.epsilon
    return DivergenceSpec(kind, alpha=alpha, epsilon=epsilon, base=base)


def cmd_compute(args) -> int:
    spec = _build_divergence(args)
    if args.quantity in SMOOTHED_FAMILIES:
        if args.epsilon is None:
            raise ValidationError(f"--quantity {args.quantity} requires --epsilon")
        kind = QuantityKind(args.quantity, epsilon=args.epsilon)
    else:
        kind = QuantityKind(args.quantity)
    state = read_state_file(args.state)
    cfg = OptimizerConfig(seed=args.seed, sigma_tolerance=args.tolerance)
    result = compute_quantity(kind, spec, state, cfg)
    unit = "bits" if args.log_base == "2" else "nats"
    print(f"quantity {args.quantity} divergence {args.divergence} ({unit})")
    print(f"value {format_number(result.value)}")
    print(f"exactness {result.exactness}")
    print(f"converged {'true' if result.converged else 'false'}")
    return EXIT_OK


def cmd_audit(args) -> int:
    if args.checks.strip() == "all":
        names = ALL_CHECKS
    else:
        names = tuple(c.strip() for c in args.checks.split(",") if c.strip())
        for name in names:
            if name not in CHECK_NAMES:
                raise ValidationError(
                    f"unknown check {name!r}; known: {', '.join(CHECK_NAMES)} "
                    f"(or 'all' for every verification check)"
                )
        if not names:
            raise ValidationError("no checks requested")
    kwargs = {"samples": args.samples, "master_seed": args.seed}
    if args.dims is not None:
        kwargs["dim_pairs"] = _parse_dim_pairs(args.dims)
    cfg = AuditConfig(**kwargs)

    records = []
    timings: dict[str, float] = {}
    for name in names:
        start = time.perf_counter()
        record = run_check(name, cfg)
        timings[name] = round(time.perf_counter() - start, 6)
        records.append(record)
        status = "PASS" if record.passed else "FAIL"
        extra = " (expected violation)" if record.expect_violation else ""
        print(
            f"[{status}] {record.name}: worst violation "
            f"{format_number(record.worst_violation)} vs threshold "
            f"{format_number(record.threshold)} over {record.samples_run} samples"
            f"{extra}"
        )
    report = AuditReport(cfg.master_seed, tuple(records))
    config_echo = {
        "checks": list(names),
        "dims": [list(p) for p in cfg.pair_pool()],
        "samples": cfg.samples,
        "master_seed": cfg.master_seed,
        "iso_extra_dims": cfg.iso_extra_dims,
    }
    data = report_file_dict(report, config_echo, timings)
    if args.out is not None:
        write_report_file(args.out, data)
        print(f"report written to {args.out}")
    print(f"overall: {'PASS' if report.overall_pass else 'FAIL'}")
    if all(r.property_holds for r in records):
        return EXIT_OK
    return EXIT_VIOLATION


def cmd_gen(args) -> int:
    pairs = _parse_dim_pairs(args.dims)
    if len(pairs) != 1:
        raise ValidationError("gen takes exactly one AxB dims pair")
    d_a, d_b = pairs[0]
    if args.kind == "bell":
        if d_a != d_b:
            raise ValidationError(f"bell requires equal dims, got {d_a}x{d_b}")
        state = max_entangled_state(d_a)
    elif args.kind == "maxmixed":
        state = BipartiteState(d_a, d_b, maximally_mixed(d_a * d_b))
    elif args.kind == "product":
        rho_a = sample_state(d_a, rank=args.rank, seed=args.seed)
        rho_b = sample_state(d_b, rank=args.rank, seed=args.seed + 1)
        state = BipartiteState(
            d_a, d_b, DensityOperator(np.kron(rho_a.matrix, rho_b.matrix))
        )
    else:
        state = sample_state((d_a, d_b), rank=args.rank, seed=args.seed)
    write_state_file(args.out, state)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdiv",
        description=(
            "Divergence-based information quantities on bipartite states, "
            "plus a randomized invariance audit."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_compute = sub.add_parser("compute", help="evaluate one quantity on a state file")
    p_compute.add_argument("--quantity", required=True, choices=QUANTITIES)
    p_compute.add_argument(
        "--divergence", required=True, choices=sorted(DIVERGENCE_ALIASES)
    )
    p_compute.add_argument("--alpha", type=float, default=None)
    p_compute.add_argument(
        "--epsilon",
        type=float,
        default=None,
        help="smoothing radius and/or dh test error, whichever the request needs",
    )
    p_compute.add_argument("--state", required=True, help="input state file (JSON)")
    p_compute.add_argument("--log-base", choices=("2", "e"), default="2")
    p_compute.add_argument("--seed", type=int, default=0)
    p_compute.add_argument("--tolerance", type=float, default=1e-8)
    p_compute.set_defaults(func=cmd_compute)

    p_audit = sub.add_parser("audit", help="run randomized verification checks")
    p_audit.add_argument(
        "--checks",
        default="all",
        help="comma list of check names, or 'all' (mutation_dpi must be explicit)",
    )
    p_audit.add_argument("--samples", type=int, default=None)
    p_audit.add_argument("--dims", default=None, help="AxB[,CxD...] pairs")
    p_audit.add_argument("--seed", type=int, default=0)
    p_audit.add_argument("--out", default=None, help="report file path (JSON)")
    p_audit.set_defaults(func=cmd_audit)

    p_gen = sub.add_parser("gen", help="generate a state file")
    p_gen.add_argument("--dims", required=True, help="AxB")
    p_gen.add_argument("--kind", choices=GEN_KINDS, default="random")
    p_gen.add_argument("--rank", type=int, default=None)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", default=None, help="output path (default stdout)")
    p_gen.set_defaults(func=cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
