"""Command-line front end.

Exit codes: 0 on a certified (or exact) result, 1 on usage and input errors,
2 when the solver or the certificate check fails.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .bounds_code import METHODS, CodeBoundSpec, affine_cap_bound, build_affine_cap_sdp, build_code_program, code_bound
from .bounds_covering import (
    COVER_METHODS,
    CoverBoundSpec,
    build_first_sdp,
    build_second_sdp,
    covering_bound,
    pair_covering_ineq,
    read_covering_table,
    read_inequality_set,
    sphere_covering_ineq,
    van_wee_ineq,
)
from .certify import CertificateError, clamp_dual, verify_certificate
from .combinatorics import sphere_covering_bound
from .report import BoundReport
from .sdp import SdpaParseError, SolverOptions, read_sdpa, read_sdpa_solution, solve, write_sdpa, write_sdpa_solution

SOLVER_ENV = "HAMMING_SDP_SOLVER_CMD"

CODE_METHOD_ALIASES = {
    "delsarte": "delsarte",
    "sdp": "sdp_basic",
    "sdp+": "sdp_laurent",
    "nplus": "matrixcut_nplus",
    "ntilde": "matrixcut_ntilde",
}

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    backend: str = "builtin"
    command: str | None = None
    gap_tol: float = 1e-7
    max_iter: int = 200
    output: str = "json"
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise UsageError(f"--jobs must be at least 1, got {self.jobs}")
        if self.backend == "external":
            if not self.command or "{in}" not in self.command or "{out}" not in self.command:
                raise UsageError("the external backend needs a command template containing {in} and {out}")

    def solver_options(self) -> SolverOptions:
        return SolverOptions(gap_tol=self.gap_tol, max_iter=self.max_iter, backend=self.backend, command=self.command)


def _config(args) -> RunConfig:
    command = args.solver_cmd or os.environ.get(SOLVER_ENV)
    backend = args.backend or ("external" if command else "builtin")
    output = args.format or ("text" if args.command == "table" else "json")
    return RunConfig(backend, command, args.gap_tol, args.max_iter, output, getattr(args, "jobs", 1))


# ---------------------------------------------------------------------------
# spec construction


def code_method(name: str) -> str:
    if name in CODE_METHOD_ALIASES:
        return CODE_METHOD_ALIASES[name]
    if name in METHODS:
        return name
    raise UsageError(f"unknown code method {name!r}; choose from {', '.join(CODE_METHOD_ALIASES)}")


def inequality_sets(q: int, n: int, r: int, ineq: str, ftable: str | None):
    """Parse --ineq: sphere, vanwee, pair (needs --ftable) or file:PATH."""
    if ineq == "sphere":
        return (sphere_covering_ineq(q, n, r),)
    if ineq == "vanwee":
        if q != 2:
            raise UsageError("van Wee inequalities are provided for q = 2 only")
        return (van_wee_ineq(n, r),)
    if ineq == "pair":
        if q != 2:
            raise UsageError("pair covering inequalities are provided for q = 2 only")
        if not ftable:
            raise UsageError("--ineq pair needs --ftable PATH")
        return (pair_covering_ineq(q, n, r, read_covering_table(ftable)),)
    if ineq.startswith("file:"):
        path = ineq[5:]
        sets = read_inequality_set(path)
        if (sets.q, sets.n) != (q, n):
            raise UsageError(f"{path}: inequality set is for q={sets.q}, n={sets.n}, not q={q}, n={n}")
        return (sets,)
    raise UsageError(f"unknown inequality source {ineq!r}; use sphere, vanwee, pair or file:PATH")


def cover_spec(q: int, n: int, r: int, method: str, ineq: str = "sphere", ftable: str | None = None) -> CoverBoundSpec:
    if method not in COVER_METHODS:
        raise UsageError(f"unknown covering method {method!r}; choose from {', '.join(COVER_METHODS)}")
    return CoverBoundSpec(q, n, r, inequality_sets(q, n, r, ineq, ftable), method)


# ---------------------------------------------------------------------------
# output


def _text(report: BoundReport) -> str:
    data = report.to_json()
    width = max(len(k) for k in data)
    lines = [f"{k:<{width}}  {v}" for k, v in data.items() if k != "note"]
    if report.note:
        lines.append(report.note)
    return "\n".join(lines)


def emit(report: BoundReport, cfg: RunConfig) -> int:
    if cfg.output == "json":
        print(report.dumps())
        if report.note:
            print(report.note, file=sys.stderr)
    else:
        print(_text(report))
    return EXIT_OK if report.status in ("certified", "exact") else EXIT_SOLVER


# ---------------------------------------------------------------------------
# subcommands


def cmd_codebound(args, cfg: RunConfig) -> int:
    spec = CodeBoundSpec(args.q, args.n, args.d, code_method(args.method))
    return emit(code_bound(spec, cfg.solver_options()), cfg)


def cmd_coverbound(args, cfg: RunConfig) -> int:
    spec = cover_spec(args.q, args.n, args.r, args.method, args.ineq, args.ftable)
    return emit(covering_bound(spec, cfg.solver_options()), cfg)


def cmd_affinecap(args, cfg: RunConfig) -> int:
    return emit(affine_cap_bound(args.n, cfg.solver_options()), cfg)


def _compiled_for(args):
    if args.family == "affinecap":
        return build_affine_cap_sdp(args.n)
    if args.family == "code":
        if args.d is None:
            raise UsageError("--family code needs --d")
        return build_code_program(CodeBoundSpec(args.q, args.n, args.d, code_method(args.method or "sdp+")))
    if args.r is None:
        raise UsageError("--family cover needs --r")
    spec = cover_spec(args.q, args.n, args.r, args.method or "sdp2", args.ineq, args.ftable)
    if spec.method == "lin":
        raise UsageError("the lin method is an exact rational formula, not an SDP")
    build = build_first_sdp if spec.method == "sdp1" else build_second_sdp
    return build(spec.q, spec.n, spec.r, spec.inequalities)


def cmd_emit_sdpa(args, cfg: RunConfig) -> int:
    compiled = _compiled_for(args)
    write_sdpa(compiled.problem, args.out)
    print(f"wrote {args.out} ({compiled.problem.m} variables, {len(compiled.problem.block_sizes)} blocks)")
    if args.box_out:
        Path(args.box_out).write_text(json.dumps(compiled.problem.variable_box.tolist()))
        print(f"wrote {args.box_out}")
    if args.solution:
        sol = solve(compiled.problem, cfg.solver_options())
        with open(args.solution, "w") as fh:
            write_sdpa_solution(sol, compiled.problem, fh)
        print(f"wrote {args.solution} (solver status {sol.status})")
        if sol.status not in ("optimal", "near_optimal"):
            return EXIT_SOLVER
    return EXIT_OK


def _read_box(path: str | None, m: int) -> np.ndarray:
    if path is None:
        return np.tile([0.0, 1.0], (m, 1))
    box = np.asarray(json.loads(Path(path).read_text()), dtype=float)
    if box.shape != (m, 2):
        raise UsageError(f"{path}: box has shape {box.shape}, problem has {m} variables")
    return box


def cmd_certify(args, cfg: RunConfig) -> int:
    problem = read_sdpa(args.problem)
    sol = read_sdpa_solution(args.dual, problem)
    box = _read_box(args.box, problem.m)
    sol = clamp_dual(sol, problem)
    try:
        certified, cert = verify_certificate(problem, sol, box)
        ok = True
    except CertificateError as exc:
        cert, ok = exc.cert, False
        certified = math.nan
        print(f"certificate rejected: {exc}", file=sys.stderr)
    out = {
        "status": "certified" if ok else "certificate_failed",
        "certified_lower_bound": certified if ok else None,
        "dual_obj": cert.dual_obj if cert else None,
        "correction": cert.correction if cert else None,
        "min_eig": cert.min_eig if cert else None,
        "y_norm": cert.y_norm if cert else None,
        "residual_max": float(np.abs(cert.epsilons).max(initial=0.0)) if cert else None,
    }
    if args.out and cert is not None:
        cert.save(args.out)
    if cfg.output == "json":
        print(json.dumps(out))
    else:
        width = max(len(k) for k in out)
        print("\n".join(f"{k:<{width}}  {v}" for k, v in out.items()))
    return EXIT_OK if ok else EXIT_SOLVER


# ---------------------------------------------------------------------------
# table runner


def _run_entry(entry: dict[str, Any], opts: SolverOptions) -> dict[str, Any]:
    """Solve one suite line; the reference column is Delsarte or sphere covering."""
    family = entry.get("family", "code")
    if family == "code":
        spec = CodeBoundSpec(entry["q"], entry["n"], entry["d"], code_method(entry.get("method", "sdp+")))
        report = code_bound(spec, opts)
        ref = code_bound(CodeBoundSpec(spec.q, spec.n, spec.d, "delsarte"), opts).integer_bound
        param = spec.d
    elif family == "cover":
        spec = cover_spec(entry["q"], entry["n"], entry["r"], entry.get("method", "sdp2"),
                          entry.get("ineq", "sphere"), entry.get("ftable"))
        report = covering_bound(spec, opts)
        ref = sphere_covering_bound(spec.q, spec.n, spec.r)
        param = spec.r
    else:
        raise UsageError(f"unknown family {family!r}")
    return {
        "family": family, "q": spec.q, "n": spec.n, "param": param, "method": report.method,
        "known": entry.get("known"), "bound": report.integer_bound, "previous": entry.get("previous"),
        "reference": ref, "status": report.status, "certified_value": report.certified_value,
        "expected": entry.get("expected"),
    }


def read_suite(path: str) -> list[dict[str, Any]]:
    entries = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    for no, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            entry = json.loads(s)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}:{no}: {exc.msg}") from None
        if not isinstance(entry, dict):
            raise UsageError(f"{path}:{no}: expected a JSON object")
        entries.append(entry)
    return entries


def run_suite(entries: Sequence[dict[str, Any]], opts: SolverOptions, jobs: int = 1) -> list[dict[str, Any]]:
    """Results in input order; workers each own their problem and solver state."""
    if jobs == 1 or len(entries) <= 1:
        return [_run_entry(e, opts) for e in entries]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_entry, entries, [opts] * len(entries)))


def format_table(rows: Sequence[dict[str, Any]]) -> str:
    heads = {
        "code": ("q", "n", "d", "known lower", "our bound", "previous", "Delsarte"),
        "cover": ("q", "n", "R", "known upper", "our bound", "previous", "sphere"),
    }
    out = []
    for family in ("code", "cover"):
        part = [r for r in rows if r["family"] == family]
        if not part:
            continue
        cells = [heads[family]] + [
            tuple("-" if v is None else str(v)
                  for v in (r["q"], r["n"], r["param"], r["known"], r["bound"], r["previous"], r["reference"]))
            for r in part
        ]
        widths = [max(len(c[k]) for c in cells) for k in range(len(cells[0]))]
        for c in cells:
            out.append("  ".join(v.rjust(w) for v, w in zip(c, widths)))
        out.append("")
    return "\n".join(out).rstrip("\n")


def cmd_table(args, cfg: RunConfig) -> int:
    rows = run_suite(read_suite(args.suite), cfg.solver_options(), cfg.jobs)
    if cfg.output == "json":
        for r in rows:
            print(json.dumps({k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in r.items()}))
    else:
        print(format_table(rows))
    bad = [r for r in rows if r["status"] not in ("certified", "exact")]
    return EXIT_SOLVER if bad else EXIT_OK


def cmd_selftest(args, cfg: RunConfig) -> int:
    from .selftest import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_SOLVER


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--backend", choices=("builtin", "external"), default=None,
                        help=f"solver backend (default: external if ${SOLVER_ENV} is set, else builtin)")
    common.add_argument("--solver-cmd", default=None,
                        help="external command template with {in} and {out} placeholders")
    common.add_argument("--gap-tol", type=float, default=1e-7)
    common.add_argument("--max-iter", type=int, default=200)
    common.add_argument("--format", choices=("json", "text"), default=None, help="default: text for table, json otherwise")

    parser = _Parser(prog="hamming-sdp", description="Semidefinite bounds for codes in the Hamming scheme.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("codebound", parents=[common], help="upper bound on A_q(n,d)")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--method", default="sdp+", help="delsarte, sdp, sdp+, nplus or ntilde")
    p.set_defaults(func=cmd_codebound)

    p = sub.add_parser("coverbound", parents=[common], help="lower bound on K_q(n,r)")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--method", choices=COVER_METHODS, default="sdp2")
    p.add_argument("--ineq", default="sphere", help="sphere, vanwee, pair or file:PATH")
    p.add_argument("--ftable", default=None, help="covering-number table with lines 'm k F'")
    p.set_defaults(func=cmd_coverbound)

    p = sub.add_parser("affinecap", parents=[common], help="ternary affine cap program")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_affinecap)

    p = sub.add_parser("emit-sdpa", parents=[common], help="write a program in SDPA sparse format")
    p.add_argument("--family", choices=("code", "cover", "affinecap"), default="code")
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--method", default=None)
    p.add_argument("--ineq", default="sphere")
    p.add_argument("--ftable", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--box-out", default=None, help="also write the variable box as JSON")
    p.add_argument("--solution", default=None, help="also solve and write the solution file")
    p.set_defaults(func=cmd_emit_sdpa)

    p = sub.add_parser("certify", parents=[common], help="audit a dual solution for an SDPA problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--dual", required=True, help="solution file: x line, then '1|2 block i j value' entries")
    p.add_argument("--box", default=None, help="JSON list of [lo, hi] per variable (default [0, 1])")
    p.add_argument("--out", default=None, help="write the certificate as JSON")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("table", parents=[common], help="run a JSON-lines suite and print a results table")
    p.add_argument("--suite", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("selftest", parents=[common], help="exact identities and dense-oracle checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (UsageError, ValueError, KeyError, OSError, SdpaParseError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"hamming-sdp {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
