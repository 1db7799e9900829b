"""Lower bounds on K_q(n, r): linear inequalities and two semidefinite programs.

An inequality set (lambda_0..lambda_n) beta says that every word u of a covering
code's ambient space satisfies sum_i lambda_i A_i(u) >= beta, where A_i(u)
counts codewords at distance i from u. Everything in the inequality calculus
is exact (ints and Fractions); only the SDP builders use floats.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .algebra_program import (
    add_block_images,
    add_delsarte_rows,
    add_trace_border,
    class_values,
    complement_values,
    diagonal_values,
    zero_dist_values,
)
from .combinatorics import binomial, multinomial, power, shell_size
from .model import Affine, CompiledModel, Model, affine_sum
from .report import BoundReport, run_program
from .sdp import SolverOptions
from .terwilliger import TripleClass, enumerate_classes, is_class

COVER_METHODS = ("lin", "sdp1", "sdp2")

RELAXATION_CAVEAT = (
    "note: this inequality set may also hold for codes whose covering radius "
    "exceeds r; the bound is a lower bound on K_q(n,r) only if every code of "
    "covering radius r satisfies the set."
)


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class LinearInequalitySet:
    """(lambda_0, ..., lambda_n) beta with lambda_i >= 0 and beta > 0."""

    q: int
    n: int
    lam: tuple[Fraction, ...]
    beta: Fraction

    def __post_init__(self) -> None:
        if self.q < 2 or self.n < 1:
            raise ValueError(f"need q >= 2 and n >= 1, got q={self.q}, n={self.n}")
        lam = tuple(_frac(v) for v in self.lam)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "beta", _frac(self.beta))
        if len(lam) != self.n + 1:
            raise ValueError(f"expected {self.n + 1} coefficients, got {len(lam)}")
        if any(v < 0 for v in lam):
            raise ValueError("coefficients lambda_i must be nonnegative")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    def as_floats(self) -> tuple[list[float], float]:
        return [float(v) for v in self.lam], float(self.beta)


class MissingCoveringNumber(KeyError):
    def __init__(self, m: int, k: int):
        super().__init__(f"covering number F({m},{k}) missing from the table")
        self.m, self.k = m, k

    def __str__(self) -> str:
        return self.args[0]


@dataclass
class CoveringNumberTable:
    """User-supplied exact values F(m, k): fewest k-subsets covering all pairs of an m-set."""

    entries: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for (m, k), v in self.entries.items():
            if int(v) != v or v <= 0:
                raise ValueError(f"F({m},{k}) = {v} is not a positive integer")

    def __getitem__(self, key: tuple[int, int]) -> int:
        try:
            return self.entries[key]
        except KeyError:
            raise MissingCoveringNumber(*key) from None


@dataclass(frozen=True)
class CoverBoundSpec:
    q: int
    n: int
    r: int
    inequalities: tuple[LinearInequalitySet, ...] = ()
    method: str = "sdp2"

    def __post_init__(self) -> None:
        if self.q < 2 or self.n < 1:
            raise ValueError(f"need q >= 2 and n >= 1, got q={self.q}, n={self.n}")
        if not 0 <= self.r <= self.n:
            raise ValueError(f"radius must satisfy 0 <= r <= n, got r={self.r}")
        if self.method not in COVER_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        ineqs = tuple(self.inequalities) or (sphere_covering_ineq(self.q, self.n, self.r),)
        for s in ineqs:
            if (s.q, s.n) != (self.q, self.n):
                raise ValueError(f"inequality set is for (q,n)=({s.q},{s.n}), not ({self.q},{self.n})")
        object.__setattr__(self, "inequalities", ineqs)


# ---------------------------------------------------------------------------
# inequality calculus


def sphere_covering_ineq(q: int, n: int, r: int) -> LinearInequalitySet:
    if not 0 <= r <= n:
        raise ValueError(f"radius must satisfy 0 <= r <= n, got r={r}")
    return LinearInequalitySet(q, n, tuple(1 if i <= r else 0 for i in range(n + 1)), 1)


def van_wee_ineq(n: int, r: int) -> LinearInequalitySet:
    """Binary van Wee inequalities."""
    if not 0 <= r < n:
        raise ValueError(f"van Wee inequalities need 0 <= r < n, got n={n}, r={r}")
    c = -(-(n + 1) // (r + 1))
    lam = [0] * (n + 1)
    for i in range(r):
        lam[i] = c
    lam[r] = 1
    lam[r + 1] = 1
    return LinearInequalitySet(2, n, tuple(lam), c)


def pair_covering_ineq(q: int, n: int, r: int, F: CoveringNumberTable) -> LinearInequalitySet:
    """Binary pair covering inequalities with m_1 maximized over i = 2..(n-r-1)//r.

    The range keeps F(n - i r + 1, r + 2) a genuine covering design (m >= k).
    """
    if q != 2:
        raise ValueError("pair covering inequalities are provided for q = 2 only")
    if not 1 <= r or r + 2 > n:
        raise ValueError(f"pair covering inequalities need 1 <= r and r + 2 <= n, got n={n}, r={r}")
    top = F[(n - r + 1, r + 2)]
    imax = (n - r - 1) // r
    if imax < 2:
        raise ValueError(f"no admissible i >= 2 for n={n}, r={r}")
    m1 = max(Fraction(top - F[(n - i * r + 1, r + 2)], i - 1) for i in range(2, imax + 1))
    m0 = m1 + top
    lam = [Fraction(0)] * (n + 1)
    for i in range(r - 1):
        lam[i] = m0
    for i in (r - 1, r):
        if i >= 0:
            lam[i] = m1
    lam[r + 1] = Fraction(1)
    lam[r + 2] = Fraction(1)
    return LinearInequalitySet(2, n, tuple(lam), m0)


@lru_cache(maxsize=None)
def pair_intersection(q: int, n: int, i: int, j: int, k: int) -> int:
    """alpha_{i,j}^k: words v with |v| = i and d(v, u) = j, for a fixed u of weight k."""
    if q < 2 or not (0 <= i <= n and 0 <= j <= n and 0 <= k <= n):
        raise ValueError(f"pair_intersection needs q >= 2 and 0 <= i, j, k <= n, got {(q, n, i, j, k)}")
    s = k + i - j
    total = 0
    if q == 2:
        if s % 2:
            return 0
        t = s // 2
        return binomial(k, t) * binomial(n - k, i - t)
    for p in range(0, s // 2 + 1):
        t = s - p
        if t < p:
            continue
        total += (
            multinomial(k, [t - p, p])
            * binomial(n - k, i - t)
            * power(q - 1, i - t)
            * power(q - 2, t - p)
        )
    return total


def induce_inequality(q: int, n: int, ineq: LinearInequalitySet, i: int) -> LinearInequalitySet:
    """Sum the inequality over the sphere S_i(u)."""
    if (ineq.q, ineq.n) != (q, n):
        raise ValueError("inequality set does not match (q, n)")
    if not 0 <= i <= n:
        raise ValueError(f"need 0 <= i <= n, got i={i}")
    lam = tuple(
        sum((ineq.lam[j] * pair_intersection(q, n, i, j, k) for j in range(n + 1)), Fraction(0))
        for k in range(n + 1)
    )
    return LinearInequalitySet(q, n, lam, shell_size(q, n, i) * ineq.beta)


def add_inequalities(a: LinearInequalitySet, b: LinearInequalitySet) -> LinearInequalitySet:
    if (a.q, a.n) != (b.q, b.n):
        raise ValueError("inequality sets for different (q, n)")
    return LinearInequalitySet(a.q, a.n, tuple(x + y for x, y in zip(a.lam, b.lam)), a.beta + b.beta)


def scale_round(ineq: LinearInequalitySet, divisor) -> LinearInequalitySet:
    """Divide by divisor, then round every entry up (valid since A_i(u) are integers)."""
    divisor = _frac(divisor)
    if divisor <= 0:
        raise ValueError(f"divisor must be positive, got {divisor}")
    lam = tuple(Fraction(math.ceil(v / divisor)) for v in ineq.lam)
    return LinearInequalitySet(ineq.q, ineq.n, lam, Fraction(math.ceil(ineq.beta / divisor)))


def lin_ineq_bound(q: int, n: int, ineq: LinearInequalitySet) -> Fraction:
    """beta q^n / sum_i lambda_i C(n,i)(q-1)^i, exactly."""
    denom = sum((v * shell_size(q, n, i) for i, v in enumerate(ineq.lam)), Fraction(0))
    if denom == 0:
        raise ZeroDivisionError("all coefficients lambda_i are zero")
    return ineq.beta * q**n / denom


# ---------------------------------------------------------------------------
# triple intersection numbers


def _binary_table(n: int, i: int, j: int, t: int) -> dict[tuple[int, int, int, int], int]:
    """Binary counts keyed (j', t', t', d), summing over a00, a01, a10, a11."""
    out: dict[tuple[int, int, int, int], int] = defaultdict(int)
    for a10 in range(i - t + 1):
        for a01 in range(j - t + 1):
            for a11 in range(t + 1):
                for a00 in range(n + t - i - j + 1):
                    w = binomial(i - t, a10) * binomial(j - t, a01) * binomial(t, a11) * binomial(n + t - i - j, a00)
                    jp = a00 + a01 + a10 + a11
                    tp = a10 + a11
                    d = j + a00 + a10 - a01 - a11
                    out[(jp, tp, tp, d)] += w
    return dict(out)


def _convolve(a: dict, b: dict) -> dict:
    out: dict = defaultdict(int)
    for ka, va in a.items():
        for kb, vb in b.items():
            out[tuple(x + y for x, y in zip(ka, kb))] += va * vb
    return dict(out)


def _group(size: int, choices: Sequence[tuple[tuple[int, int, int, int], int]]) -> dict:
    """Generating dict for `size` positions, each taking one of `choices`.

    A choice is (increment of (j', t', p', d), multiplicity). Positions are
    unlabelled, so the count of an assignment is a multinomial.
    """
    out: dict = defaultdict(int)
    k = len(choices)

    def rec(idx: int, left: int, parts: list[int]) -> None:
        if idx == k - 1:
            parts = parts + [left]
            key = [0, 0, 0, 0]
            weight = multinomial(size, parts[:-1])
            for (inc, mult), cnt in zip(choices, parts):
                for r in range(4):
                    key[r] += inc[r] * cnt
                weight *= power(mult, cnt)
            if weight:
                out[tuple(key)] += weight
            return
        for c in range(left + 1):
            rec(idx + 1, left - c, parts + [c])

    rec(0, size, [])
    return dict(out)


@lru_cache(maxsize=None)
def triple_table(q: int, n: int, base: TripleClass) -> dict[tuple[int, int, int, int], int]:
    """All nonzero alpha_{(i,j',t',p'),d}^{(i,j,t,p)} for one base class, keyed (j', t', p', d)."""
    base = TripleClass(*base)
    if not is_class(q, n, base):
        raise ValueError(f"{tuple(base)} is not in I({q},{n})")
    i, j, t, p = base
    if q == 2:
        return _binary_table(n, i, j, t)
    # per position class: choices of w_k as (dj', dt', dp', dd) and multiplicity
    groups = [
        # u != 0, v = 0: w = 0, w = u (A1), other nonzero (A2)
        (i - t, [((0, 0, 0, 0), 1), ((1, 1, 1, 1), 1), ((1, 1, 0, 1), q - 2)]),
        # u = 0, v != 0: w = 0 (differs from v), w = v (B1), other (B2)
        (j - t, [((0, 0, 0, 1), 1), ((1, 0, 0, 0), 1), ((1, 0, 0, 1), q - 2)]),
        # u = v != 0: w = 0, w = u (C1), other (C2)
        (p, [((0, 0, 0, 1), 1), ((1, 1, 1, 0), 1), ((1, 1, 0, 1), q - 2)]),
        # u, v != 0, u != v: w = 0, w = u (D1), w = v (D2), other (D3)
        (t - p, [((0, 0, 0, 1), 1), ((1, 1, 1, 1), 1), ((1, 1, 0, 0), 1), ((1, 1, 0, 1), q - 3)]),
        # u = v = 0: w = 0, w != 0 (E)
        (n + t - i - j, [((0, 0, 0, 0), 1), ((1, 0, 0, 1), q - 1)]),
    ]
    out = {(0, 0, 0, 0): 1}
    for size, choices in groups:
        out = _convolve(out, _group(size, choices))
    return out


def triple_intersection(q: int, n: int, base: Sequence[int], target: Sequence[int], d: int) -> int:
    """Words w with class (i, j', t', p') against u and d(v, w) = d, where (u, v) has class base."""
    base = TripleClass(*base)
    if not is_class(q, n, base):
        raise ValueError(f"{tuple(base)} is not in I({q},{n})")
    if not 0 <= d <= n:
        raise ValueError(f"need 0 <= d <= n, got d={d}")
    jp, tp, pp = target
    return triple_table(q, n, base).get((jp, tp, pp, d), 0)


@lru_cache(maxsize=None)
def _row_coefficients(q: int, n: int, base: TripleClass, lam: tuple[Fraction, ...]) -> dict[TripleClass, float]:
    """lambda_{(i,j',t',p')}^{base} = sum_d lambda_d alpha_{(i,j',t',p'),d}^{base}."""
    acc: dict[TripleClass, Fraction] = defaultdict(Fraction)
    for (jp, tp, pp, d), cnt in triple_table(q, n, base).items():
        if lam[d]:
            acc[TripleClass(base.i, jp, tp, pp)] += lam[d] * cnt
    return {c: float(v) for c, v in acc.items() if v}


# ---------------------------------------------------------------------------
# programs


def build_first_sdp(q: int, n: int, r: int, ineqs: Iterable[LinearInequalitySet]) -> CompiledModel:
    """Bose-Mesner program in x_0..x_n: minimize q^n x_0."""
    ineqs = list(ineqs)
    if not ineqs:
        raise ValueError("need at least one inequality set")
    CoverBoundSpec(q, n, r, tuple(ineqs), "sdp1")
    model = Model()
    x = [model.add_var(f"x[{i}]") for i in range(n + 1)]
    add_delsarte_rows(model, q, n, x)
    for s, ineq in enumerate(ineqs):
        beta = float(ineq.beta)
        for k in range(n + 1):
            coef = [float(sum(ineq.lam[j] * pair_intersection(q, n, i, j, k) for j in range(n + 1))) for i in range(n + 1)]
            row = affine_sum((c, x[i]) for i, c in enumerate(coef))
            comp = affine_sum((c, x[0] - x[i]) for i, c in enumerate(coef))
            model.add_ge(row - x[0] * beta, label=f"ineq{s}[{k}]")
            model.add_ge(comp - (1.0 - x[0]) * beta, label=f"ineq{s}_comp[{k}]")
    add_trace_border(model, q, n, x[0], x)
    model.minimize(x[0] * float(q**n))
    return model.compile()


def build_second_sdp(q: int, n: int, r: int, ineqs: Iterable[LinearInequalitySet]) -> CompiledModel:
    """Terwilliger program over I(q,n): minimize q^n x_{0,0}^{0,0}."""
    ineqs = list(ineqs)
    if not ineqs:
        raise ValueError("need at least one inequality set")
    CoverBoundSpec(q, n, r, tuple(ineqs), "sdp2")
    model = Model()
    index = enumerate_classes(q, n)
    x = class_values(model, q, n, "x", "full")
    x00 = x[index.ordinal(0, 0, 0, 0)]
    xk = zero_dist_values(q, n, x)
    xi0 = [x[index.ordinal(i, 0, 0, 0)] for i in range(n + 1)]
    for pos, c in enumerate(index.classes):
        v = x[pos]
        model.add_ge(v, label="nonneg")
        model.add_ge(x[index.ordinal(c.i, c.i, c.i, c.i)] - v, label="below_diag")
        model.add_ge(v - xi0[c.i] - xk[pos] + x00, label="lower_pair")
        model.add_ge(xk[pos] - v, label="upper_pair")

    def val(c: TripleClass) -> Affine:
        return x[index.ordinal(*c)]

    for s, ineq in enumerate(ineqs):
        beta = float(ineq.beta)
        lam = ineq.lam
        for c in index.classes:
            coef = _row_coefficients(q, n, c, lam)
            i = c.i
            # M' row: sum x_{i,j'} lam >= x_{i,0} beta
            f1 = affine_sum((w, val(cp)) for cp, w in coef.items())
            model.add_ge(f1 - xi0[i] * beta, label=f"ineq{s}_a")
            # diag(M') - M' row
            f2 = affine_sum((w, xi0[cp.j] - val(cp)) for cp, w in coef.items())
            model.add_ge(f2 - (x00 - xi0[i]) * beta, label=f"ineq{s}_b")
            # M'' row, coefficients x_{i+j'-t'-p',0} - x_{i,j'}^{t',p'}
            f3 = affine_sum((w, xi0[cp.distance] - val(cp)) for cp, w in coef.items())
            model.add_ge(f3 - (x00 - xi0[i]) * beta, label=f"ineq{s}_c")
            # diag(M'') - M'' row
            f4 = affine_sum((w, x00 - xi0[cp.j] - xi0[cp.distance] + val(cp)) for cp, w in coef.items())
            model.add_ge(f4 - (1.0 - 2.0 * x00 + xi0[i]) * beta, label=f"ineq{s}_d")

    add_block_images(model, q, n, x, "M1")
    border = [x00 - v for v in diagonal_values(q, n, x)]
    add_block_images(model, q, n, complement_values(q, n, x), "M2", corner=1.0 - x00, border=border)
    model.minimize(x00 * float(q**n))
    return model.compile()


def lin_bound(spec: CoverBoundSpec) -> Fraction:
    """Best linear-inequality bound over the given sets (each set is a separate LP bound)."""
    return max(lin_ineq_bound(spec.q, spec.n, s) for s in spec.inequalities)


def _uses_only_sphere_covering(spec: CoverBoundSpec) -> bool:
    ref = sphere_covering_ineq(spec.q, spec.n, spec.r)
    return all(s == ref for s in spec.inequalities)


def covering_bound(spec: CoverBoundSpec, opts: SolverOptions | None = None) -> BoundReport:
    """Lower bound on K_q(n, r); SDP values are certified from below and ceiled."""
    if spec.method == "lin":
        value = lin_bound(spec)
        return BoundReport(
            q=spec.q, n=spec.n, d=None, method="lin",
            solver_objective=float(value), certified_value=float(value),
            integer_bound=math.ceil(value), status="exact", gap=0.0, residual_max=0.0,
            wall_time_ms=0.0, r=spec.r, direction="lower", raw_integer_bound=math.ceil(value),
            exact_value=str(value),
            note=None if _uses_only_sphere_covering(spec) else RELAXATION_CAVEAT,
        )
    build = build_first_sdp if spec.method == "sdp1" else build_second_sdp
    compiled = build(spec.q, spec.n, spec.r, spec.inequalities)
    report = run_program(compiled, opts, q=spec.q, n=spec.n, method=spec.method, r=spec.r)
    if not _uses_only_sphere_covering(spec):
        report.note = RELAXATION_CAVEAT
    return report


# ---------------------------------------------------------------------------
# file formats


def _lines(source: TextIO | str | Path) -> list[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text().splitlines()
    return source.read().splitlines()


def _content(lines: list[str]) -> list[tuple[int, list[str]]]:
    out = []
    for no, line in enumerate(lines, 1):
        s = line.split("#", 1)[0].strip()
        if s:
            out.append((no, s.split()))
    return out


def read_inequality_set(source: TextIO | str | Path) -> LinearInequalitySet:
    """Header `q n beta`, then one line `i lambda_i` per i (missing i default to 0)."""
    rows = _content(_lines(source))
    if not rows:
        raise ValueError("inequality file is empty")
    no, head = rows[0]
    if len(head) != 3:
        raise ValueError(f"line {no}: header must be 'q n beta'")
    try:
        q, n, beta = int(head[0]), int(head[1]), Fraction(head[2])
    except ValueError as exc:
        raise ValueError(f"line {no}: {exc}") from None
    lam = [Fraction(0)] * (n + 1)
    seen = set()
    for no, tok in rows[1:]:
        if len(tok) != 2:
            raise ValueError(f"line {no}: expected 'i lambda_i'")
        try:
            i, v = int(tok[0]), Fraction(tok[1])
        except ValueError as exc:
            raise ValueError(f"line {no}: {exc}") from None
        if not 0 <= i <= n or i in seen:
            raise ValueError(f"line {no}: index {i} out of range or repeated")
        seen.add(i)
        lam[i] = v
    try:
        return LinearInequalitySet(q, n, tuple(lam), beta)
    except ValueError as exc:
        raise ValueError(f"invalid inequality set: {exc}") from None


def write_inequality_set(ineq: LinearInequalitySet, sink: TextIO) -> None:
    sink.write(f"{ineq.q} {ineq.n} {ineq.beta}\n")
    for i, v in enumerate(ineq.lam):
        sink.write(f"{i} {v}\n")


def read_covering_table(source: TextIO | str | Path) -> CoveringNumberTable:
    """Lines `m k F`."""
    entries: dict[tuple[int, int], int] = {}
    for no, tok in _content(_lines(source)):
        if len(tok) != 3:
            raise ValueError(f"line {no}: expected 'm k F'")
        try:
            m, k, f = (int(v) for v in tok)
        except ValueError as exc:
            raise ValueError(f"line {no}: {exc}") from None
        if f <= 0:
            raise ValueError(f"line {no}: F must be positive")
        entries[(m, k)] = f
    return CoveringNumberTable(entries)

