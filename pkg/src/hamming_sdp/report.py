"""Solve, certify and round: the shared pipeline behind code and covering bounds."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .certify import CertificateError, DualCertificate, clamp_dual, verify_certificate
from .model import CompiledModel
from .sdp import SdpSolution, SolverOptions, solve

ROUND_GUARD = 1e-9

REPORT_KEYS = (
    "q", "n", "d", "method", "solver_objective", "certified_value", "integer_bound",
    "status", "gap", "residual_max", "wall_time_ms",
)


@dataclass
class BoundReport:
    q: int
    n: int
    d: int | None
    method: str
    solver_objective: float
    certified_value: float
    integer_bound: int | None
    status: str
    gap: float
    residual_max: float
    wall_time_ms: float
    r: int | None = None
    direction: str = "upper"
    raw_integer_bound: int | None = None
    exact_value: str | None = None
    note: str | None = None
    solution: SdpSolution | None = field(default=None, repr=False, compare=False)
    certificate: DualCertificate | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k not in ("solution", "certificate")}
        for k, v in out.items():
            if isinstance(v, float) and not math.isfinite(v):
                out[k] = None
        if self.d is None:
            out.pop("d")
        if self.r is None:
            out.pop("r")
        for k in ("exact_value", "note"):
            if out[k] is None:
                out.pop(k)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False)


def round_bound(value: float, direction: str, guard: float = ROUND_GUARD) -> int | None:
    """floor(v + guard) for upper bounds, ceil(v - guard) for lower bounds."""
    if not math.isfinite(value):
        return None
    if direction == "upper":
        return int(math.floor(value + guard))
    return int(math.ceil(value - guard))


def _raw_guard(value: float, gap: float) -> float:
    if not (math.isfinite(value) and math.isfinite(gap)):
        return ROUND_GUARD
    return max(ROUND_GUARD, abs(gap) * max(1.0, abs(value)))


def run_program(
    compiled: CompiledModel,
    opts: SolverOptions | None,
    *,
    q: int,
    n: int,
    method: str,
    d: int | None = None,
    r: int | None = None,
) -> BoundReport:
    """Solve, clamp, certify and round one compiled program."""
    direction = "upper" if compiled.sense == "max" else "lower"
    t0 = time.perf_counter()
    sol = solve(compiled.problem, opts)
    sign = -1.0 if compiled.sense == "max" else 1.0
    solver_value = sign * sol.primal_obj + compiled.offset
    certified = math.nan
    cert = None
    status = sol.status
    residual = math.nan
    if sol.status in ("optimal", "near_optimal"):
        sol = clamp_dual(sol, compiled.problem)
        try:
            low, cert = verify_certificate(compiled.problem, sol)
            certified = sign * low + compiled.offset
            status = "certified"
            residual = float(np.abs(cert.epsilons).max(initial=0.0))
        except CertificateError as exc:
            cert = exc.cert
            status = "certificate_failed"
    wall = (time.perf_counter() - t0) * 1e3
    return BoundReport(
        q=q, n=n, d=d, method=method,
        solver_objective=float(solver_value),
        certified_value=float(certified),
        integer_bound=round_bound(certified, direction) if status == "certified" else None,
        status=status,
        gap=float(sol.gap),
        residual_max=residual,
        wall_time_ms=wall,
        r=r,
        direction=direction,
        # the raw value is only as accurate as the solver's own relative gap
        raw_integer_bound=round_bound(solver_value, direction, _raw_guard(solver_value, sol.gap)),
        solution=sol,
        certificate=cert,
    )
