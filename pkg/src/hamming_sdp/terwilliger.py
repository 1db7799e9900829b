"""Terwilliger algebra of the Hamming scheme and its explicit block diagonalization.

A triple class (i, j, t, p) labels the 0/1 matrix M_{i,j}^{t,p} whose (u, v)
entry is 1 iff |S(u)| = i, |S(v)| = j, |S(u) & S(v)| = t and u, v agree on p
nonzero positions. For q = 2 every class has p = t.

Block images come in two normalizations. The default drops the
C(n+a-2k, i-k)^(-1/2) row/column prefactors (a positive diagonal congruence,
so PSD status is unchanged). ``scaled=True`` puts them back, which gives
the matrix that U* M U actually has in each block.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import sqrt
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence, TextIO

import numpy as np

from .combinatorics import binomial, multinomial, power


class TripleClass(NamedTuple):
    i: int
    j: int
    t: int
    p: int

    @property
    def distance(self) -> int:
        """Hamming distance between the two words of the pair, i + j - t - p."""
        return self.i + self.j - self.t - self.p


def is_class(q: int, n: int, c: Sequence[int]) -> bool:
    i, j, t, p = c
    if not (0 <= p <= t <= min(i, j) and i + j <= n + t):
        return False
    return q >= 3 or p == t


@dataclass(frozen=True)
class ClassIndex:
    """The ordered class set I(q, n) with its inverse lookup."""

    q: int
    n: int
    classes: tuple[TripleClass, ...]
    lookup: Mapping[TripleClass, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def ordinal(self, i: int, j: int, t: int, p: int) -> int:
        return self.lookup[TripleClass(i, j, t, p)]

    def get(self, i: int, j: int, t: int, p: int) -> int | None:
        return self.lookup.get(TripleClass(i, j, t, p))


def _check_qn(q: int, n: int) -> None:
    if q < 2 or n < 1:
        raise ValueError(f"need q >= 2 and n >= 1, got q={q}, n={n}")


@lru_cache(maxsize=None)
def enumerate_classes(q: int, n: int) -> ClassIndex:
    """All members of I(q, n), lexicographic in (i, j, t, p)."""
    _check_qn(q, n)
    out = []
    for i in range(n + 1):
        for j in range(n + 1):
            for t in range(max(0, i + j - n), min(i, j) + 1):
                ps = range(t + 1) if q >= 3 else (t,)
                out.extend(TripleClass(i, j, t, p) for p in ps)
    classes = tuple(out)
    return ClassIndex(q, n, classes, {c: k for k, c in enumerate(classes)})


def gamma(q: int, n: int, c: Sequence[int]) -> int:
    """Number of nonzero entries of M_{i,j}^{t,p}."""
    if not is_class(q, n, c):
        raise ValueError(f"{tuple(c)} is not in I({q},{n})")
    i, j, t, p = c
    return (
        power(q - 1, i + j - t)
        * power(q - 2, t - p)
        * multinomial(n, [p, t - p, i - t, j - t])
    )


@lru_cache(maxsize=None)
def beta(n: int, i: int, j: int, k: int, t: int) -> int:
    """beta_{i,j,k}^{n,t}, the binary block coefficient (defining sum)."""
    s = 0
    for p in range(0, k + 1):
        s += (
            (-1) ** (k - p)
            * binomial(k, p)
            * binomial(i - p, t - p)
            * binomial(n + p - i - k, n + t - i - j)
        )
    return binomial(n - 2 * k, i - k) * s


def beta_symmetric(n: int, i: int, j: int, k: int, t: int) -> int:
    """The same number via the expression that is visibly symmetric in i and j."""
    return sum(
        (-1) ** (u - t)
        * binomial(u, t)
        * binomial(n - 2 * k, u - k)
        * binomial(n - k - u, i - u)
        * binomial(n - k - u, j - u)
        for u in range(0, n + 1)
    )


@lru_cache(maxsize=None)
def alpha_core(q: int, n: int, i: int, j: int, t: int, p: int, a: int, k: int) -> int:
    """Integer part of alpha: beta_{i-a,j-a,k-a}^{n-a,t-a} times the g-sum."""
    b = beta(n - a, i - a, j - a, k - a, t - a)
    if b == 0:
        return 0
    g_sum = sum(
        (-1) ** (a - g)
        * binomial(a, g)
        * binomial(t - a, p - g)
        * power(q - 2, t - a - p + g)
        for g in range(0, p + 1)
    )
    return b * g_sum


def alpha(q: int, n: int, i: int, j: int, t: int, p: int, a: int, k: int) -> float:
    """alpha(i,j,t,p,a,k): exact core times sqrt(q-1)^(i+j-2t) in double precision."""
    if q < 3:
        raise ValueError("alpha is defined for q >= 3; use beta for q = 2")
    if not (0 <= a <= k <= min(i, j)):
        raise ValueError(f"alpha needs 0 <= a <= k <= min(i, j), got a={a}, k={k}, i={i}, j={j}")
    core = alpha_core(q, n, i, j, t, p, a, k)
    if core == 0:
        return 0.0
    return core * sqrt(q - 1) ** (i + j - 2 * t)


# ---------------------------------------------------------------------------
# block layout


@dataclass(frozen=True)
class BlockSpec:
    a: int
    k: int
    size: int
    multiplicity: int
    row_labels: tuple[int, ...]


@lru_cache(maxsize=None)
def block_specs(q: int, n: int) -> tuple[BlockSpec, ...]:
    """One spec per admissible (a, k), sorted; q = 2 keeps a = 0 only."""
    _check_qn(q, n)
    specs = []
    for a in range(n + 1):
        for k in range(a, n + 1):
            if 2 * k - a > n:
                break
            mult = (
                binomial(n, a)
                * power(q - 2, a)
                * (binomial(n - a, k - a) - binomial(n - a, k - a - 1))
            )
            if mult == 0:
                continue
            rows = tuple(range(k, n + a - k + 1))
            specs.append(BlockSpec(a, k, len(rows), mult, rows))
    return tuple(specs)


@dataclass(frozen=True)
class BlockTable:
    """Sparse description of the linear map x -> block (a, k).

    Entry (rows[m], cols[m]) of the block receives coef[m] * x[cls[m]].
    """

    spec: BlockSpec
    rows: np.ndarray
    cols: np.ndarray
    cls: np.ndarray
    coef: np.ndarray


@lru_cache(maxsize=None)
def block_tables(q: int, n: int, scaled: bool = False) -> tuple[BlockTable, ...]:
    """Coefficient tables for every block; the binary case uses beta."""
    index = enumerate_classes(q, n)
    out = []
    for spec in block_specs(q, n):
        a, k = spec.a, spec.k
        m = n + a - 2 * k
        rows, cols, cls, coef = [], [], [], []
        for r, i in enumerate(spec.row_labels):
            for s, j in enumerate(spec.row_labels):
                for t in range(max(0, i + j - n), min(i, j) + 1):
                    ps = range(t + 1) if q >= 3 else (t,)
                    for p in ps:
                        if q >= 3:
                            v = alpha(q, n, i, j, t, p, a, k)
                        else:
                            v = float(beta(n, i, j, k, t))
                        if v == 0.0:
                            continue
                        if scaled:
                            v /= sqrt(binomial(m, i - k) * binomial(m, j - k))
                        rows.append(r)
                        cols.append(s)
                        cls.append(index.ordinal(i, j, t, p))
                        coef.append(v)
        out.append(
            BlockTable(
                spec,
                np.asarray(rows, dtype=np.intp),
                np.asarray(cols, dtype=np.intp),
                np.asarray(cls, dtype=np.intp),
                np.asarray(coef, dtype=float),
            )
        )
    return tuple(out)


def border_weights(q: int, n: int, scaled: bool = False) -> np.ndarray:
    """Border coefficients w_i with border entry w_i * x_{i,i}^{i,i}.

    In the unit-normalized (scaled) frame the diagonal indicator of S_i(0) is
    sqrt(C(n,i)(q-1)^i) times a basis vector; undoing the prefactor
    C(n,i)^(-1/2) gives C(n,i) (q-1)^(i/2) in the default frame.
    """
    w = np.empty(n + 1)
    for i in range(n + 1):
        if scaled:
            w[i] = sqrt(binomial(n, i) * (q - 1) ** i)
        else:
            w[i] = binomial(n, i) * sqrt(q - 1) ** i
    return w


# ---------------------------------------------------------------------------
# algebra elements and their images


@dataclass
class AlgebraElement:
    """sum_c coeff[c] M_c over the class set of ``index``."""

    index: ClassIndex
    coeff: np.ndarray

    def __post_init__(self) -> None:
        self.coeff = np.asarray(self.coeff, dtype=float)
        if self.coeff.shape != (len(self.index),):
            raise ValueError(
                f"coefficient vector has shape {self.coeff.shape}, expected ({len(self.index)},)"
            )

    @property
    def q(self) -> int:
        return self.index.q

    @property
    def n(self) -> int:
        return self.index.n

    @classmethod
    def zeros(cls, q: int, n: int) -> "AlgebraElement":
        index = enumerate_classes(q, n)
        return cls(index, np.zeros(len(index)))

    @classmethod
    def identity(cls, q: int, n: int) -> "AlgebraElement":
        x = cls.zeros(q, n)
        for i in range(n + 1):
            x.coeff[x.index.ordinal(i, i, i, i)] = 1.0
        return x

    @classmethod
    def from_mapping(cls, q: int, n: int, values: Mapping[Sequence[int], float]) -> "AlgebraElement":
        x = cls.zeros(q, n)
        for c, v in values.items():
            pos = x.index.get(*c)
            if pos is None:
                raise ValueError(f"{tuple(c)} is not in I({q},{n})")
            x.coeff[pos] = float(v)
        return x

    def __getitem__(self, c: Sequence[int]) -> float:
        return float(self.coeff[self.index.ordinal(*c)])

    def diagonal_coefficients(self) -> np.ndarray:
        """x_{i,i}^{i,i} for i = 0..n."""
        return np.array([self.coeff[self.index.ordinal(i, i, i, i)] for i in range(self.n + 1)])


def write_algebra_element(x: AlgebraElement, sink: TextIO) -> None:
    """Text format: header ``q n`` then ``i j t p coeff`` per class."""
    sink.write(f"{x.q} {x.n}\n")
    for c, v in zip(x.index.classes, x.coeff):
        sink.write(f"{c.i} {c.j} {c.t} {c.p} {repr(float(v))}\n")


def read_algebra_element(source: TextIO | str | Path) -> AlgebraElement:
    """Inverse of :func:`write_algebra_element`; coefficients may be ``num/den``."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            return read_algebra_element(fh)
    lines = [(no, ln.split()) for no, ln in enumerate(source, 1)]
    lines = [(no, parts) for no, parts in lines if parts and not parts[0].startswith("#")]
    if not lines:
        raise ValueError("empty algebra element file")
    no, head = lines[0]
    if len(head) != 2:
        raise ValueError(f"line {no}: expected header 'q n'")
    q, n = int(head[0]), int(head[1])
    x = AlgebraElement.zeros(q, n)
    for no, parts in lines[1:]:
        if len(parts) != 5:
            raise ValueError(f"line {no}: expected 'i j t p coeff'")
        c = tuple(int(v) for v in parts[:4])
        pos = x.index.get(*c)
        if pos is None:
            raise ValueError(f"line {no}: {c} is not in I({q},{n})")
        x.coeff[pos] = float(Fraction(parts[4]))
    return x


@dataclass
class BlockDiagonalForm:
    specs: tuple[BlockSpec, ...]
    blocks: list[np.ndarray]
    bordered: bool = False

    def min_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh(b)[0]) for b in self.blocks)

    def is_psd(self, tol: float = 1e-9) -> bool:
        scale = max(1.0, max(float(np.abs(b).max(initial=0.0)) for b in self.blocks))
        return self.min_eigenvalue() >= -tol * scale


def _image(x: AlgebraElement, scaled: bool) -> list[np.ndarray]:
    blocks = []
    for tab in block_tables(x.q, x.n, scaled):
        b = np.zeros((tab.spec.size, tab.spec.size))
        np.add.at(b, (tab.rows, tab.cols), tab.coef * x.coeff[tab.cls])
        blocks.append(b)
    return blocks


def block_image(x: AlgebraElement, scaled: bool = False) -> BlockDiagonalForm:
    """Blocks (sum_{t,p} alpha(i,j,t,p,a,k) x_{i,j}^{t,p})_{i,j} for every (a, k)."""
    if x.q == 2:
        return binary_block_image(x, scaled)
    return BlockDiagonalForm(block_specs(x.q, x.n), _image(x, scaled))


def binary_block_image(x: AlgebraElement, scaled: bool = False) -> BlockDiagonalForm:
    """Blocks (sum_t beta_{i,j,k}^t x_{i,j}^t)_{i,j=k}^{n-k} for k = 0..n/2."""
    if x.q != 2:
        raise ValueError("binary_block_image needs q = 2")
    return BlockDiagonalForm(block_specs(2, x.n), _image(x, scaled))


def bordered_block_image(x: AlgebraElement, corner: float, scaled: bool = False) -> BlockDiagonalForm:
    """Block image for R(corner; M): the (0,0) block gets a border row and column.

    The border carries the diagonal of M expressed in the block frame.
    """
    blocks = _image(x, scaled)
    w = border_weights(x.q, x.n, scaled)
    border = w * x.diagonal_coefficients()
    b0 = blocks[0]
    s = b0.shape[0]
    big = np.empty((s + 1, s + 1))
    big[0, 0] = corner
    big[0, 1:] = border
    big[1:, 0] = border
    big[1:, 1:] = b0
    blocks[0] = big
    return BlockDiagonalForm(block_specs(x.q, x.n), blocks, bordered=True)


# ---------------------------------------------------------------------------
# Johnson scheme


@dataclass(frozen=True)
class JohnsonBlock:
    k: int
    kp: int
    rows: tuple[int, ...]
    multiplicity: int


def johnson_blocks(n: int, w: int) -> tuple[JohnsonBlock, ...]:
    """Blocks (k, k') of the Terwilliger algebra of J(n, w); rows are |U & W| values."""
    if not 1 <= w <= n // 2:
        raise ValueError(f"need 1 <= w <= n/2, got n={n}, w={w}")
    out = []
    for k in range(w // 2 + 1):
        for kp in range((n - w) // 2 + 1):
            lo = max(k, 2 * w - n + kp)
            hi = min(w - k, w - kp)
            if lo > hi:
                continue
            mult = (binomial(w, k) - binomial(w, k - 1)) * (
                binomial(n - w, kp) - binomial(n - w, kp - 1)
            )
            out.append(JohnsonBlock(k, kp, tuple(range(lo, hi + 1)), mult))
    return tuple(out)


def johnson_classes(n: int, w: int) -> list[tuple[int, int, int, int]]:
    """Quadruples (i, j, s, t) labelling the nonzero basis matrices M_{i,j}^{s,t}."""
    out = []
    for i in range(w + 1):
        for j in range(w + 1):
            for s in range(max(0, i + j - w), min(i, j) + 1):
                for t in range(0, min(w - i, w - j) + 1):
                    if (w - i) + (w - j) - t <= n - w:
                        out.append((i, j, s, t))
    return out


def johnson_block_image(
    n: int, w: int, coeffs: Mapping[tuple[int, int, int, int], float], scaled: bool = False
) -> list[tuple[JohnsonBlock, np.ndarray]]:
    """Image of sum coeffs[i,j,s,t] M_{i,j}^{s,t} in every block (k, k')."""
    out = []
    for blk in johnson_blocks(n, w):
        size = len(blk.rows)
        b = np.zeros((size, size))
        for r, i in enumerate(blk.rows):
            for c, j in enumerate(blk.rows):
                v = 0.0
                for (ii, jj, s, t), x in coeffs.items():
                    if ii != i or jj != j or x == 0:
                        continue
                    v += x * beta(w, i, j, blk.k, s) * beta(n - w, w - i, w - j, blk.kp, t)
                if scaled and v != 0.0:
                    v /= sqrt(
                        binomial(w - 2 * blk.k, i - blk.k)
                        * binomial(w - 2 * blk.k, j - blk.k)
                        * binomial(n - w - 2 * blk.kp, w - i - blk.kp)
                        * binomial(n - w - 2 * blk.kp, w - j - blk.kp)
                    )
                b[r, c] = v
        out.append((blk, b))
    return out


def johnson_dense_matrix(n: int, w: int, coeffs: Mapping[tuple[int, int, int, int], float]) -> np.ndarray:
    """Brute-force sum coeffs M_{i,j}^{s,t} on the w-subsets of range(n), W = range(w)."""
    sets = [frozenset(c) for c in itertools.combinations(range(n), w)]
    base = frozenset(range(w))
    out = np.zeros((len(sets), len(sets)))
    for a, u in enumerate(sets):
        for b, v in enumerate(sets):
            key = (len(u & base), len(v & base), len(u & v & base), len((u & v) - base))
            out[a, b] = coeffs.get(key, 0.0)
    return out


# ---------------------------------------------------------------------------
# dense oracle


@dataclass
class DenseOracle:
    q: int
    n: int
    words: np.ndarray
    class_of_pair: np.ndarray
    transform: np.ndarray
    column_groups: list[tuple[int, int, list[int]]]

    def matrix(self, x: AlgebraElement) -> np.ndarray:
        """Dense sum_c x_c M_c."""
        return x.coeff[self.class_of_pair]

    def basis_matrix(self, c: Sequence[int]) -> np.ndarray:
        pos = enumerate_classes(self.q, self.n).ordinal(*c)
        return (self.class_of_pair == pos).astype(float)

    def predicted(self, x: AlgebraElement) -> np.ndarray:
        """Block-diagonal matrix U* M U predicted from the scaled block image."""
        image = block_image(x, scaled=True)
        by_ak = {(s.a, s.k): b for s, b in zip(image.specs, image.blocks)}
        size = len(self.words)
        out = np.zeros((size, size))
        for a, k, cols in self.column_groups:
            out[np.ix_(cols, cols)] = by_ak[(a, k)]
        return out


def _subset_kernel_basis(ground: Sequence[int], k: int) -> tuple[list[frozenset], np.ndarray]:
    """Orthonormal basis of L_k on ``ground``: vectors on k-sets killed by the down map."""
    ksets = [frozenset(c) for c in itertools.combinations(ground, k)]
    if k == 0:
        return ksets, np.ones((1, 1))
    lower = {frozenset(c): r for r, c in enumerate(itertools.combinations(ground, k - 1))}
    down = np.zeros((len(lower), len(ksets)))
    for col, s in enumerate(ksets):
        for h in s:
            down[lower[s - {h}], col] = 1.0
    _, sv, vt = np.linalg.svd(down)
    rank = int(np.sum(sv > 1e-8))
    basis = vt[rank:].T
    expected = binomial(len(ground), k) - binomial(len(ground), k - 1)
    if basis.shape[1] != expected:
        raise RuntimeError(f"kernel dimension {basis.shape[1]} differs from {expected}")
    return ksets, basis


def dense_oracle(q: int, n: int) -> DenseOracle:
    """Brute-force model of the algebra and of the unitary U built from the Psi vectors."""
    _check_qn(q, n)
    if q**n > 4096:
        raise ValueError(f"dense oracle limited to q^n <= 4096, got {q}^{n}")
    index = enumerate_classes(q, n)
    words = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64).reshape(-1, n)
    nz = words != 0
    i = nz.sum(1)
    t = (nz[:, None, :] & nz[None, :, :]).sum(2)
    p = ((words[:, None, :] == words[None, :, :]) & nz[:, None, :]).sum(2)
    lut = np.full((n + 1,) * 4, -1, dtype=np.int64)
    for pos, c in enumerate(index.classes):
        lut[c] = pos
    cls = lut[i[:, None], i[None, :], t, p]
    assert (cls >= 0).all()

    phi = np.exp(2j * np.pi / (q - 1)) if q > 2 else 1.0
    supports = [frozenset(np.flatnonzero(row).tolist()) for row in nz]
    columns: list[np.ndarray] = []
    groups: list[tuple[int, int, list[int]]] = []
    for spec in block_specs(q, n):
        a, k = spec.a, spec.k
        for sa in itertools.combinations(range(n), a):
            rest = [h for h in range(n) if h not in sa]
            ksets, basis = _subset_kernel_basis(rest, k - a)
            kpos = {s: r for r, s in enumerate(ksets)}
            for letters in itertools.product(range(1, q - 1), repeat=a):
                avec = np.zeros(n, dtype=np.int64)
                avec[list(sa)] = letters
                sa_set = frozenset(sa)
                phase = phi ** (words @ avec)
                for bcol in range(basis.shape[1]):
                    b = basis[:, bcol]
                    cols = []
                    for row_i in spec.row_labels:
                        scale = (q - 1) ** (-row_i / 2) / sqrt(binomial(n + a - 2 * k, row_i - k))
                        v = np.zeros(len(words), dtype=complex)
                        for wpos in np.flatnonzero(i == row_i):
                            sx = supports[wpos]
                            if not sa_set <= sx:
                                continue
                            rem = sorted(sx - sa_set)
                            acc = sum(b[kpos[frozenset(sub)]] for sub in itertools.combinations(rem, k - a))
                            v[wpos] = scale * phase[wpos] * acc
                        cols.append(len(columns))
                        columns.append(v)
                    groups.append((a, k, cols))
    u = np.column_stack(columns)
    err = np.abs(u.conj().T @ u - np.eye(len(words))).max()
    if err > 1e-10:
        raise RuntimeError(f"oracle transform is not unitary (error {err:.2e})")
    return DenseOracle(q, n, words, cls, u, groups)


def random_element(q: int, n: int, rng: np.random.Generator, symmetric: bool = True) -> AlgebraElement:
    """Random coefficients; with ``symmetric`` the matrix is symmetric (x_{i,j} = x_{j,i})."""
    x = AlgebraElement.zeros(q, n)
    x.coeff[:] = rng.standard_normal(len(x.index))
    if symmetric:
        for pos, c in enumerate(x.index.classes):
            x.coeff[pos] = x.coeff[x.index.ordinal(min(c.i, c.j), max(c.i, c.j), c.t, c.p)]
    return x


def iter_classes(q: int, n: int) -> Iterable[TripleClass]:
    return iter(enumerate_classes(q, n).classes)
