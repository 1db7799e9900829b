"""Upper bounds on A_q(n, d): Delsarte, the Terwilliger SDP, matrix cuts, affine caps."""
from __future__ import annotations

from dataclasses import dataclass

from .algebra_program import (
    add_block_images,
    add_delsarte_rows,
    add_trace_border,
    orbit_representatives,
    class_values,
    complement_values,
    diagonal_values,
    distance_zero,
    gamma_objective,
    zero_dist_values,
)
from .combinatorics import shell_size
from .model import Affine, CompiledModel, Model, affine_sum
from .report import BoundReport, run_program
from .sdp import SolverOptions
from .terwilliger import TripleClass, enumerate_classes, gamma

METHODS = ("delsarte", "sdp_basic", "sdp_laurent", "matrixcut_nplus", "matrixcut_ntilde")
DEBUG_METHODS = ("delsarte_classic", "sdp_variation1", "sdp_variation2")


@dataclass(frozen=True)
class CodeBoundSpec:
    q: int
    n: int
    d: int
    method: str = "sdp_laurent"

    def __post_init__(self) -> None:
        if self.q < 2 or self.n < 1:
            raise ValueError(f"need q >= 2 and n >= 1, got q={self.q}, n={self.n}")
        if self.d < 1:
            raise ValueError(f"minimum distance must be >= 1, got d={self.d}")
        if self.method not in METHODS + DEBUG_METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def _check(q: int, n: int, d: int) -> None:
    CodeBoundSpec(q, n, d, "delsarte")


def build_delsarte(q: int, n: int, d: int, classic: bool = False) -> CompiledModel:
    """Delsarte LP; trace form with the 2x2 border, or the classic x_0 = 1 form."""
    _check(q, n, d)
    model = Model()
    x: list[Affine] = []
    for i in range(n + 1):
        if i == 0 and classic:
            x.append(Affine(const=1.0))
        elif 1 <= i <= d - 1:
            x.append(Affine())
        else:
            x.append(model.add_var(f"x[{i}]"))
    add_delsarte_rows(model, q, n, x)
    if classic:
        model.maximize(gamma_objective(q, n, x))
    else:
        add_trace_border(model, q, n, x[0], x)
        model.maximize(x[0] * float(q**n))
    return model.compile()


def build_schrijver_sdp(q: int, n: int, d: int, strength: str = "basic") -> CompiledModel:
    """The Terwilliger SDP; strength in {basic, laurent, variation1, variation2}."""
    _check(q, n, d)
    if strength not in ("basic", "laurent", "variation1", "variation2"):
        raise ValueError(f"unknown strength {strength!r}")
    model = Model()
    index = enumerate_classes(q, n)
    zero = distance_zero(d, "all")
    origin = TripleClass(0, 0, 0, 0)
    fixed = {origin: 1.0} if strength == "basic" else None
    hi = float("inf") if strength == "variation1" else 1.0
    x = class_values(model, q, n, "x", "full", zero, fixed, hi=hi)
    if strength == "variation2":
        # tr M = 1 fixes x_{0,0}^{0,0}; x_{i,i}^{i,i} is aliased with x_{i,0}^{0,0}
        rest = affine_sum((float(shell_size(q, n, i)), x[index.ordinal(i, i, i, i)]) for i in range(1, n + 1))
        origin_value = x[index.ordinal(0, 0, 0, 0)]
        x = [Affine(const=1.0) - rest if v is origin_value else v for v in x]
    x0k = zero_dist_values(q, n, x)
    for pos, c in enumerate(index.classes):
        xi0 = x[index.ordinal(c.i, 0, 0, 0)]
        model.add_ge(x[pos], label="nonneg")
        model.add_ge(xi0 - x[pos], label="below_row")
    dd = [a - b for a, b in zip(x0k, x)]
    add_block_images(model, q, n, x, "M1")
    x00 = x[index.ordinal(0, 0, 0, 0)]
    diag = diagonal_values(q, n, x)
    if strength == "laurent":
        border = [x00 - v for v in diag]
        add_block_images(model, q, n, dd, "M2", corner=1.0 - x00, border=border)
        model.maximize(x00 * float(q**n))
    else:
        add_block_images(model, q, n, dd, "M2")
        if strength == "basic":
            model.maximize(gamma_objective(q, n, [x[index.ordinal(i, 0, 0, 0)] for i in range(n + 1)]))
        elif strength == "variation1":
            tr = gamma_objective(q, n, diag)
            model.add_psd([[1.0, x00], [x00, tr]], "variation1")
            model.maximize(x00)
        else:
            total = affine_sum((float(gamma(q, n, c)), x[pos]) for pos, c in enumerate(index.classes))
            model.maximize(total)
    return model.compile()


def build_matrix_cut_sdp(q: int, n: int, d: int, variant: str = "nplus") -> CompiledModel:
    """Matrix-cut programs without the permutation symmetry of the classes.

    Only the transposition y_{i,j} = y_{j,i} is shared, which every
    constraint respects, so symmetric y lose nothing.
    """
    _check(q, n, d)
    if variant not in ("nplus", "ntilde"):
        raise ValueError(f"unknown variant {variant!r}")
    model = Model()
    index = enumerate_classes(q, n)
    zero = distance_zero(d, "distance")
    qn = float(q**n)
    if variant == "nplus":
        y = class_values(model, q, n, "y", "transpose", zero)
        y00 = y[index.ordinal(0, 0, 0, 0)]
        ydiag = diagonal_values(q, n, y)
        z = class_values(model, q, n, "z", "transpose", zero)
        for i in range(n + 1):
            pos = index.ordinal(i, i, i, i)
            z[pos] = y00 - ydiag[i]
        add_delsarte_rows(model, q, n, ydiag)
        add_trace_border(model, q, n, y00, ydiag)
        for pos in range(len(index)):
            model.add_ge(y[pos], label="y_nonneg")
            model.add_ge(z[pos], label="z_nonneg")
        add_block_images(model, q, n, y, "Y", corner=y00)
        add_block_images(model, q, n, z, "Z", corner=1.0 - y00)
        model.maximize(y00 * qn)
        return model.compile()

    y = class_values(model, q, n, "y", "transpose", zero)
    for i in range(1, n + 1):
        # y_{i,0}^{0,0} = y_{i,i}^{i,i}; a zero on either side zeroes both
        diag_pos = index.ordinal(i, i, i, i)
        v = Affine() if zero(TripleClass(i, 0, 0, 0)) else y[diag_pos]
        y[diag_pos] = v
        y[index.ordinal(i, 0, 0, 0)] = v
        y[index.ordinal(0, i, 0, 0)] = v
    y00 = y[index.ordinal(0, 0, 0, 0)]
    yk = zero_dist_values(q, n, y)
    comp = [a - b for a, b in zip(yk, y)]
    for pos in range(len(index)):
        model.add_ge(y[pos], label="y_nonneg")
        model.add_ge(comp[pos], label="z_nonneg")
    add_block_images(model, q, n, y, "Y")
    border = [y00 - v for v in diagonal_values(q, n, y)]
    add_block_images(model, q, n, comp, "Z", corner=1.0 - y00, border=border)
    model.maximize(y00 * qn)
    return model.compile()


def build_affine_cap_sdp(n: int) -> CompiledModel:
    """Ternary program with x_{i,i}^{i,0} = 0 in place of distance zeroing."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    q = 3
    model = Model()
    index = enumerate_classes(q, n)
    reps = orbit_representatives(q, n, "full")
    vanish = {reps[index.ordinal(i, i, i, 0)] for i in range(1, n + 1)}
    x = class_values(
        model, q, n, "x", "full",
        lambda c: index.ordinal(*c) in vanish,
        {TripleClass(0, 0, 0, 0): 1.0},
    )
    for pos, c in enumerate(index.classes):
        model.add_ge(x[pos], label="nonneg")
        model.add_ge(x[index.ordinal(c.i, 0, 0, 0)] - x[pos], label="below_row")
    add_block_images(model, q, n, x, "M1")
    add_block_images(model, q, n, complement_values(q, n, x), "M2")
    model.maximize(gamma_objective(q, n, [x[index.ordinal(i, 0, 0, 0)] for i in range(n + 1)]))
    return model.compile()


def build_code_program(spec: CodeBoundSpec) -> CompiledModel:
    q, n, d, m = spec.q, spec.n, spec.d, spec.method
    if m == "delsarte":
        return build_delsarte(q, n, d)
    if m == "delsarte_classic":
        return build_delsarte(q, n, d, classic=True)
    if m == "sdp_basic":
        return build_schrijver_sdp(q, n, d, "basic")
    if m == "sdp_laurent":
        return build_schrijver_sdp(q, n, d, "laurent")
    if m == "sdp_variation1":
        return build_schrijver_sdp(q, n, d, "variation1")
    if m == "sdp_variation2":
        return build_schrijver_sdp(q, n, d, "variation2")
    if m == "matrixcut_nplus":
        return build_matrix_cut_sdp(q, n, d, "nplus")
    return build_matrix_cut_sdp(q, n, d, "ntilde")


def code_bound(spec: CodeBoundSpec, opts: SolverOptions | None = None) -> BoundReport:
    """Build, solve, certify over the box [0, 1] and floor."""
    compiled = build_code_program(spec)
    return run_program(compiled, opts, q=spec.q, n=spec.n, d=spec.d, method=spec.method)


def affine_cap_bound(n: int, opts: SolverOptions | None = None) -> BoundReport:
    compiled = build_affine_cap_sdp(n)
    return run_program(compiled, opts, q=3, n=n, method="affinecap")
