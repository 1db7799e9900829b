"""Helpers for programs whose variables are Terwilliger coefficients.

Each class of I(q, n) is mapped to an :class:`Affine` value: a fresh variable,
an alias of another class, or a constant. Block images of such value vectors
are then added to a :class:`Model` as PSD constraints.
"""
from __future__ import annotations

from collections import defaultdict
from functools import lru_cache
from itertools import permutations
from typing import Callable, Sequence

import numpy as np

from .combinatorics import binomial, krawtchouk, shell_size
from .model import Affine, Model, affine_sum
from .terwilliger import TripleClass, block_tables, border_weights, enumerate_classes


@lru_cache(maxsize=None)
def orbit_representatives(q: int, n: int, mode: str = "full") -> tuple[int, ...]:
    """Ordinal of the canonical (smallest) class in each symmetry orbit.

    ``full``: t - p fixed and (i, j, i+j-t-p) permuted.
    ``transpose``: only (i, j) swapped.
    ``none``: every class on its own.
    """
    index = enumerate_classes(q, n)
    reps = []
    for c in index.classes:
        if mode == "none":
            reps.append(index.ordinal(*c))
            continue
        s = c.t - c.p
        k = c.distance
        triples = set(permutations((c.i, c.j, k))) if mode == "full" else {(c.i, c.j, k), (c.j, c.i, k)}
        best = None
        for i, j, kk in triples:
            tp = i + j - kk
            if (tp + s) % 2:
                continue
            t, p = (tp + s) // 2, (tp - s) // 2
            pos = index.get(i, j, t, p)
            if pos is not None and (best is None or pos < best):
                best = pos
        reps.append(best)
    return tuple(reps)


def class_values(
    model: Model,
    q: int,
    n: int,
    prefix: str,
    mode: str = "full",
    zero: Callable[[TripleClass], bool] | None = None,
    fixed: dict[TripleClass, float] | None = None,
    lo: float = 0.0,
    hi: float = 1.0,
) -> list[Affine]:
    """One Affine per class: shared variable per orbit, zeros and constants applied."""
    index = enumerate_classes(q, n)
    reps = orbit_representatives(q, n, mode)
    fixed = fixed or {}
    made: dict[int, Affine] = {}
    out = []
    for pos, c in enumerate(index.classes):
        rep = reps[pos]
        if rep not in made:
            rc = index.classes[rep]
            if zero is not None and zero(rc):
                made[rep] = Affine()
            elif rc in fixed:
                made[rep] = Affine(const=fixed[rc])
            else:
                made[rep] = model.add_var(f"{prefix}[{rc.i},{rc.j},{rc.t},{rc.p}]", lo, hi)
        out.append(made[rep])
    return out


def distance_zero(d: int, positions: str = "all") -> Callable[[TripleClass], bool]:
    """Predicate for classes forced to zero by minimum distance d.

    ``all`` looks at {i, j, i+j-t-p}; ``distance`` only at i+j-t-p.
    """
    bad = set(range(1, d))
    if positions == "all":
        return lambda c: bool({c.i, c.j, c.distance} & bad)
    return lambda c: c.distance in bad


def zero_dist_values(q: int, n: int, values: Sequence[Affine]) -> list[Affine]:
    """x_{i+j-t-p,0}^{0,0} for every class."""
    index = enumerate_classes(q, n)
    return [values[index.ordinal(c.distance, 0, 0, 0)] for c in index.classes]


def complement_values(q: int, n: int, values: Sequence[Affine]) -> list[Affine]:
    """x_{i+j-t-p,0}^{0,0} - x_{i,j}^{t,p}: the coefficients of M''."""
    return [a - b for a, b in zip(zero_dist_values(q, n, values), values)]


def diagonal_values(q: int, n: int, values: Sequence[Affine]) -> list[Affine]:
    index = enumerate_classes(q, n)
    return [values[index.ordinal(i, i, i, i)] for i in range(n + 1)]


@lru_cache(maxsize=None)
def _grouped(q: int, n: int):
    """Per block: the spec and, per upper-triangle cell, (class ordinals, coefficients)."""
    out = []
    for tab in block_tables(q, n):
        cells: dict[tuple[int, int], list[tuple[int, float]]] = defaultdict(list)
        for r, c, cl, co in zip(tab.rows.tolist(), tab.cols.tolist(), tab.cls.tolist(), tab.coef.tolist()):
            if r <= c:
                cells[(r, c)].append((cl, co))
        out.append((tab.spec, dict(cells)))
    return tuple(out)


def add_block_images(
    model: Model,
    q: int,
    n: int,
    values: Sequence[Affine],
    label: str,
    corner: Affine | float | None = None,
    border: Sequence[Affine] | None = None,
    skip_zero_block: bool = False,
) -> None:
    """PSD constraints for every block of sum values[c] M_c.

    With ``corner`` the (0,0) block is bordered: corner, then the border
    weights times ``border`` (default: the diagonal coefficients of ``values``).
    """
    weights = border_weights(q, n)
    for spec, cells in _grouped(q, n):
        entries = {
            rc: affine_sum((co, values[cl]) for cl, co in items) for rc, items in cells.items()
        }
        is_zero_block = spec.a == 0 and spec.k == 0
        if is_zero_block and corner is not None:
            diag = border if border is not None else diagonal_values(q, n, values)
            shifted = {(r + 1, c + 1): e for (r, c), e in entries.items()}
            shifted[(0, 0)] = Affine.lift(corner)
            for i in range(n + 1):
                shifted[(0, i + 1)] = diag[i] * weights[i]
            model.add_psd_entries(spec.size + 1, shifted, f"{label}[R]")
            continue
        if is_zero_block and skip_zero_block:
            continue
        model.add_psd_entries(spec.size, entries, f"{label}[{spec.a},{spec.k}]")


def add_delsarte_rows(model: Model, q: int, n: int, x: Sequence[Affine], label: str = "krawtchouk") -> None:
    """sum_i x_i K_i(j) >= 0 for j = 0..n: sum x_i A_i is PSD."""
    for j in range(n + 1):
        model.add_ge(affine_sum((float(krawtchouk(q, n, i, j)), x[i]) for i in range(n + 1)), label=f"{label}[{j}]")


def add_trace_border(model: Model, q: int, n: int, x0: Affine, x: Sequence[Affine], label: str = "border") -> None:
    """[[q^n, q^n x0], [q^n x0, sum_i x_i C(n,i)(q-1)^i]] PSD."""
    qn = float(q**n)
    tr = affine_sum((float(shell_size(q, n, i)), x[i]) for i in range(n + 1))
    model.add_psd([[qn, x0 * qn], [x0 * qn, tr]], label)


def gamma_objective(q: int, n: int, x: Sequence[Affine]) -> Affine:
    return affine_sum((float(shell_size(q, n, i)), x[i]) for i in range(n + 1))


def code_values_from_words(q: int, n: int, code: Sequence[Sequence[int]], normalize: str = "laurent") -> np.ndarray:
    """Coefficients x_c built from an explicit code (feasibility witness for tests).

    ``laurent`` gives x_{0,0}^{0,0} = |C| / q^n; ``schrijver`` gives x_{0,0}^{0,0} = 1.
    """
    words = np.asarray(code, dtype=np.int64)
    index = enumerate_classes(q, n)
    counts = np.zeros(len(index))
    for u in words:
        a = (words - u) % q
        nz = a != 0
        i = nz.sum(1)
        t = (nz[:, None, :] & nz[None, :, :]).sum(2)
        p = ((a[:, None, :] == a[None, :, :]) & nz[:, None, :]).sum(2)
        for r in range(len(words)):
            for s in range(len(words)):
                counts[index.ordinal(int(i[r]), int(i[s]), int(t[r, s]), int(p[r, s]))] += 1
    from .terwilliger import gamma

    g = np.array([gamma(q, n, c) for c in index.classes], dtype=float)
    x = counts / g
    if normalize == "laurent":
        return x / q**n
    return x / len(words)
