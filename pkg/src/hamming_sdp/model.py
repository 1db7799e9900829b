"""Small affine modelling layer that compiles to the standard block SDP form.

Programs are written with :class:`Affine` expressions: scalar variables with
boxes, linear rows ``expr >= 0`` and symmetric PSD blocks with affine
entries. :meth:`Model.compile` produces an :class:`~hamming_sdp.sdp.SdpProblem`
(minimize c^T x subject to sum x_i F_i - F_0 PSD) with every box written as
explicit rows, so a certificate box is always implied by the program itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .sdp import SdpProblem

_ZERO_TOL = 0.0


class Affine:
    """sum_k terms[k] * x_k + const."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms: dict[int, float] = dict(terms) if terms else {}
        self.const = float(const)

    @classmethod
    def var(cls, k: int) -> "Affine":
        return cls({k: 1.0})

    @classmethod
    def lift(cls, v: "Affine | float | int") -> "Affine":
        return v if isinstance(v, Affine) else cls(const=float(v))

    def copy(self) -> "Affine":
        return Affine(self.terms, self.const)

    def is_constant(self) -> bool:
        return not self.terms

    def is_zero(self) -> bool:
        return not self.terms and self.const == 0.0

    def _combine(self, other, sign: float) -> "Affine":
        other = Affine.lift(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            w = out.get(k, 0.0) + sign * v
            if w == 0.0:
                out.pop(k, None)
            else:
                out[k] = w
        return Affine(out, self.const + sign * other.const)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return Affine.lift(other)._combine(self, -1.0)

    def __neg__(self):
        return Affine({k: -v for k, v in self.terms.items()}, -self.const)

    def __mul__(self, s):
        s = float(s)
        if s == 0.0:
            return Affine()
        return Affine({k: s * v for k, v in self.terms.items()}, s * self.const)

    __rmul__ = __mul__

    def value(self, x: Sequence[float]) -> float:
        return self.const + sum(v * x[k] for k, v in self.terms.items())

    def __repr__(self) -> str:
        return f"Affine({self.terms!r}, {self.const!r})"


def affine_sum(items: Iterable[tuple[float, Affine]]) -> Affine:
    """sum coef * expr, accumulated in one dict."""
    terms: dict[int, float] = {}
    const = 0.0
    for coef, e in items:
        if coef == 0.0:
            continue
        const += coef * e.const
        for k, v in e.terms.items():
            terms[k] = terms.get(k, 0.0) + coef * v
    return Affine({k: v for k, v in terms.items() if v != 0.0}, const)


@dataclass
class PsdBlock:
    size: int
    entries: dict[tuple[int, int], Affine]
    label: str = ""


@dataclass
class CompiledModel:
    problem: SdpProblem
    sense: str
    offset: float
    names: list[str]

    def objective_value(self, x: Sequence[float]) -> float:
        """Value of the modelled objective at the standard-form point x."""
        v = float(np.dot(self.problem.c, x))
        return (-v if self.sense == "max" else v) + self.offset


class Model:
    def __init__(self) -> None:
        self.names: list[str] = []
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.rows: list[tuple[Affine, str]] = []
        self.blocks: list[PsdBlock] = []
        self.objective = Affine()
        self.sense = "min"

    @property
    def num_vars(self) -> int:
        return len(self.names)

    def add_var(self, name: str, lo: float = 0.0, hi: float = 1.0) -> Affine:
        self.names.append(name)
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        return Affine.var(len(self.names) - 1)

    def add_ge(self, lhs, rhs=0.0, label: str = "") -> None:
        """lhs >= rhs."""
        self.rows.append((Affine.lift(lhs) - rhs, label))

    def add_le(self, lhs, rhs=0.0, label: str = "") -> None:
        self.rows.append((Affine.lift(rhs) - lhs, label))

    def add_psd(self, matrix: Sequence[Sequence[Affine | float]] | np.ndarray, label: str = "") -> None:
        size = len(matrix)
        entries = {}
        for r in range(size):
            for c in range(r, size):
                e = Affine.lift(matrix[r][c])
                if not e.is_zero():
                    entries[(r, c)] = e
        self.blocks.append(PsdBlock(size, entries, label))

    def add_psd_entries(self, size: int, entries: Mapping[tuple[int, int], Affine], label: str = "") -> None:
        """Upper-triangle entries (r <= c) of a symmetric PSD block."""
        clean = {}
        for (r, c), e in entries.items():
            if r > c:
                r, c = c, r
            if not e.is_zero():
                clean[(r, c)] = clean[(r, c)] + e if (r, c) in clean else e
        self.blocks.append(PsdBlock(size, clean, label))

    def maximize(self, expr) -> None:
        self.objective = Affine.lift(expr)
        self.sense = "max"

    def minimize(self, expr) -> None:
        self.objective = Affine.lift(expr)
        self.sense = "min"

    def _used_variables(self) -> list[int]:
        used = set(self.objective.terms)
        for e, _ in self.rows:
            used.update(e.terms)
        for blk in self.blocks:
            for e in blk.entries.values():
                used.update(e.terms)
        return sorted(used)

    def _fix_forced_zeros(self) -> None:
        """A PSD row with zero diagonal is zero; single-variable entries there are fixed to 0.

        Repeated to a fixpoint. The feasible set is unchanged, but the solver no
        longer faces a program without interior points.
        """
        while True:
            dead: set[int] = set()
            for blk in self.blocks:
                zero_rows = {r for rc in blk.entries for r in rc if (r, r) not in blk.entries}
                for (r, c), e in blk.entries.items():
                    if r != c and (r in zero_rows or c in zero_rows) and len(e.terms) == 1 and e.const == 0.0:
                        dead.update(e.terms)
            if not dead:
                return

            def kill(e: Affine) -> Affine:
                if not dead.intersection(e.terms):
                    return e
                return Affine({k: v for k, v in e.terms.items() if k not in dead}, e.const)

            self.rows = [(kill(e), lab) for e, lab in self.rows]
            for blk in self.blocks:
                blk.entries = {rc: ke for rc, e in blk.entries.items() if not (ke := kill(e)).is_zero()}
            self.objective = kill(self.objective)

    def _renumbered(self) -> "Model":
        """Copy without variables that occur in no row, block or objective."""
        used = self._used_variables()
        if len(used) == self.num_vars:
            return self
        new_of = {k: t for t, k in enumerate(used)}

        def ren(e: Affine) -> Affine:
            return Affine({new_of[k]: v for k, v in e.terms.items()}, e.const)

        out = Model()
        out.names = [self.names[k] for k in used]
        out.lo = [self.lo[k] for k in used]
        out.hi = [self.hi[k] for k in used]
        out.rows = [(ren(e), lab) for e, lab in self.rows]
        out.blocks = [PsdBlock(b.size, {rc: ren(e) for rc, e in b.entries.items()}, b.label) for b in self.blocks]
        out.objective = ren(self.objective)
        out.sense = self.sense
        return out

    def compile(self, box_rows: bool = True) -> CompiledModel:
        """Standard form; variables that occur nowhere are dropped first."""
        self._fix_forced_zeros()
        model = self._renumbered()
        if model is not self:
            return model.compile(box_rows)
        m = self.num_vars
        c = np.zeros(m)
        for k, v in self.objective.terms.items():
            c[k] = v
        if self.sense == "max":
            c = -c
        entries: list[tuple[int, int, int, int, float]] = []
        block_sizes: list[int] = []

        for blk in self.blocks:
            live = sorted({r for rc in blk.entries for r in rc})
            if not live:
                continue
            pos = {r: t for t, r in enumerate(live)}
            b = len(block_sizes)
            block_sizes.append(len(live))
            for (r, cc), e in blk.entries.items():
                i, j = pos[r], pos[cc]
                if e.const != 0.0:
                    entries.append((0, b, i, j, -e.const))
                for k, v in e.terms.items():
                    entries.append((k + 1, b, i, j, v))

        rows = [e for e, _ in self.rows]
        if box_rows:
            for k in range(m):
                if np.isfinite(self.lo[k]):
                    rows.append(Affine({k: 1.0}, -self.lo[k]))
                if np.isfinite(self.hi[k]):
                    rows.append(Affine({k: -1.0}, self.hi[k]))
        seen = set()
        lp_rows = []
        for e in rows:
            if e.is_constant():
                if e.const < -1e-12:
                    lp_rows.append(e)
                continue
            scale = max(abs(v) for v in e.terms.values())
            key = (
                tuple(sorted((k, round(v / scale, 12)) for k, v in e.terms.items())),
                round(e.const / scale, 12),
            )
            if key in seen:
                continue
            seen.add(key)
            lp_rows.append(e)
        if lp_rows:
            b = len(block_sizes)
            block_sizes.append(-len(lp_rows))
            for r, e in enumerate(lp_rows):
                if e.const != 0.0:
                    entries.append((0, b, r, r, -e.const))
                for k, v in e.terms.items():
                    entries.append((k + 1, b, r, r, v))

        box = np.column_stack([self.lo, self.hi]) if m else np.zeros((0, 2))
        problem = SdpProblem.from_entries(c, block_sizes, entries, variable_box=box, merge=True)
        return CompiledModel(problem, self.sense, self.objective.const, list(self.names))
