"""Standard-form block SDP, SDPA sparse files and a primal-dual interior-point solver.

Primal:  minimize c^T x  subject to  X(x) = sum_i x_i F_i - F_0 PSD (blockwise).
Dual:    maximize <F_0, Y>  subject to  <F_i, Y> = c_i,  Y PSD.

Negative block sizes denote diagonal (LP) blocks. Indices are 0-based in
memory and 1-based on disk.
"""
from __future__ import annotations

import io
import logging
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Sequence, TextIO

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

STATUSES = ("optimal", "near_optimal", "infeasible", "unbounded", "failed")


class SdpaParseError(ValueError):
    """Malformed SDPA input; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DimensionMismatchError(ValueError):
    """A solution file does not fit the problem it is read against."""


@dataclass(eq=False)
class SdpProblem:
    c: np.ndarray
    block_sizes: tuple[int, ...]
    mat: np.ndarray
    blk: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray
    variable_box: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.c)

    @property
    def num_entries(self) -> int:
        return len(self.val)

    @classmethod
    def from_entries(
        cls,
        c: Sequence[float],
        block_sizes: Sequence[int],
        entries: Iterable[tuple[int, int, int, int, float]],
        variable_box: np.ndarray | None = None,
        merge: bool = False,
    ) -> "SdpProblem":
        """Build from (matno, block, row, col, value) tuples, 0-based blocks/rows.

        Entries below the diagonal are mirrored. Duplicates are an error unless
        ``merge`` is set, in which case they are summed. Zeros are dropped.
        """
        c = np.asarray(c, dtype=float).reshape(-1) + 0.0
        ent = list(entries)
        if ent:
            arr = np.array([e[:4] for e in ent], dtype=np.int64)
            val = np.array([e[4] for e in ent], dtype=float)
        else:
            arr = np.zeros((0, 4), dtype=np.int64)
            val = np.zeros(0)
        mat, blk, row, col = arr.T.copy()
        lo, hi = np.minimum(row, col), np.maximum(row, col)
        p = cls(c, tuple(int(s) for s in block_sizes), mat, blk, lo, hi, val, variable_box)
        p._canonicalize(merge)
        p.validate()
        return p

    def _canonicalize(self, merge: bool) -> None:
        order = np.lexsort((self.col, self.row, self.blk, self.mat))
        for name in ("mat", "blk", "row", "col", "val"):
            setattr(self, name, getattr(self, name)[order])
        if len(self.val) > 1:
            key = np.column_stack([self.mat, self.blk, self.row, self.col])
            same = np.all(key[1:] == key[:-1], axis=1)
            if same.any():
                if not merge:
                    k = int(np.flatnonzero(same)[0]) + 1
                    raise ValueError(f"duplicate entry {tuple(int(v) for v in key[k])}")
                start = np.concatenate([[True], ~same])
                groups = np.cumsum(start) - 1
                val = np.zeros(int(groups[-1]) + 1)
                np.add.at(val, groups, self.val)
                for name in ("mat", "blk", "row", "col"):
                    setattr(self, name, getattr(self, name)[start])
                self.val = val
        keep = self.val != 0.0
        for name in ("mat", "blk", "row", "col", "val"):
            setattr(self, name, getattr(self, name)[keep])

    def validate(self) -> None:
        if any(s == 0 for s in self.block_sizes):
            raise ValueError("block sizes must be nonzero")
        nb = len(self.block_sizes)
        if len(self.val) == 0:
            return
        if self.mat.min() < 0 or self.mat.max() > self.m:
            raise ValueError("matrix number out of range")
        if self.blk.min() < 0 or self.blk.max() >= nb:
            raise ValueError("block index out of range")
        sizes = np.abs(np.array(self.block_sizes))[self.blk]
        if self.row.min() < 0 or (self.col >= sizes).any():
            raise ValueError("entry outside its block")
        diag = np.array(self.block_sizes)[self.blk] < 0
        if (self.row[diag] != self.col[diag]).any():
            raise ValueError("off-diagonal entry in a diagonal block")
        if not np.isfinite(self.val).all() or not np.isfinite(self.c).all():
            raise ValueError("non-finite data")
        if self.variable_box is not None and np.shape(self.variable_box) != (self.m, 2):
            raise ValueError("variable_box must have shape (m, 2)")

    def entries(self) -> Iterator[tuple[int, int, int, int, float]]:
        for t in zip(self.mat.tolist(), self.blk.tolist(), self.row.tolist(), self.col.tolist(), self.val.tolist()):
            yield t

    def __eq__(self, other: object) -> bool:
        """Structural equality of c, layout and canonical entries (boxes ignored)."""
        if not isinstance(other, SdpProblem):
            return NotImplemented
        return (
            self.block_sizes == other.block_sizes
            and np.array_equal(self.c, other.c)
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("mat", "blk", "row", "col", "val")
            )
        )

    def matrix_blocks(self, i: int) -> list[np.ndarray]:
        """Dense F_i: 2-D arrays for PSD blocks, 1-D diagonals for LP blocks."""
        out = [np.zeros((s, s)) if s > 0 else np.zeros(-s) for s in self.block_sizes]
        sel = self.mat == i
        for b, r, c, v in zip(self.blk[sel], self.row[sel], self.col[sel], self.val[sel]):
            if self.block_sizes[b] < 0:
                out[b][r] = v
            else:
                out[b][r, c] = v
                out[b][c, r] = v
        return out

    def slack(self, x: Sequence[float]) -> list[np.ndarray]:
        """X(x) = sum x_i F_i - F_0 per block."""
        x = np.asarray(x, dtype=float)
        out = [np.zeros((s, s)) if s > 0 else np.zeros(-s) for s in self.block_sizes]
        coef = np.where(self.mat == 0, -1.0, 0.0)
        nz = self.mat > 0
        coef[nz] = x[self.mat[nz] - 1]
        for b, r, c, v in zip(self.blk, self.row, self.col, self.val * coef):
            if self.block_sizes[b] < 0:
                out[b][r] += v
            else:
                out[b][r, c] += v
                if r != c:
                    out[b][c, r] += v
        return out

    def dual_inner(self, y_blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Vector (<F_0,Y>, <F_1,Y>, ..., <F_m,Y>) in plain double precision."""
        vals = np.empty(len(self.val))
        for k, (b, r, c, v) in enumerate(zip(self.blk, self.row, self.col, self.val)):
            y = y_blocks[b]
            if self.block_sizes[b] < 0:
                vals[k] = v * y[r]
            else:
                vals[k] = v * (y[r, c] if r == c else y[r, c] + y[c, r])
        out = np.zeros(self.m + 1)
        np.add.at(out, self.mat, vals)
        return out


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray
    y_blocks: list[np.ndarray]
    primal_obj: float
    dual_obj: float
    gap: float
    iterations: int
    x_blocks: list[np.ndarray] | None = None
    primal_infeasibility: float = float("nan")
    dual_infeasibility: float = float("nan")
    message: str = ""
    wall_time: float = 0.0


@dataclass
class SolverOptions:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    max_iter: int = 200
    backend: str = "builtin"
    command: str | None = None
    step_fraction: float = 0.95
    verbose: bool = False


# ---------------------------------------------------------------------------
# SDPA sparse format


def _fmt(v: float) -> str:
    return repr(float(v) + 0.0)


def write_sdpa(p: SdpProblem, sink: BinaryIO | TextIO | str | Path) -> None:
    """Emit the SDPA sparse dialect, entries sorted by (matno, block, i, j)."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            write_sdpa(p, fh)
        return
    parts = [
        f"{p.m}\n",
        f"{len(p.block_sizes)}\n",
        " ".join(str(s) for s in p.block_sizes) + "\n",
        " ".join(_fmt(v) for v in p.c) + "\n",
    ]
    for mat, b, r, c, v in p.entries():
        parts.append(f"{mat} {b + 1} {r + 1} {c + 1} {_fmt(v)}\n")
    text = "".join(parts)
    if isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("ascii"))


def sdpa_bytes(p: SdpProblem) -> bytes:
    buf = io.BytesIO()
    write_sdpa(p, buf)
    return buf.getvalue()


_PUNCT = str.maketrans({ch: " " for ch in "{}(),"})


def _read_lines(source) -> list[str]:
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and os.path.exists(source)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, bytes):
        data = source
    elif isinstance(source, str):
        data = source.encode()
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    return data.decode("ascii", errors="replace").splitlines()


def _tokens(lines: list[str], start: int = 0) -> Iterator[tuple[int, str]]:
    # header lines may carry trailing labels such as "=mDIM" or a comment
    for no in range(start, len(lines)):
        for tok in lines[no].translate(_PUNCT).split():
            if tok[0] in "=\"*#":
                break
            yield no + 1, tok


def _is_comment(line: str) -> bool:
    s = line.strip()
    return not s or s[0] in "\"*#"


def read_sdpa(source) -> SdpProblem:
    """Parse an SDPA sparse file (path, bytes, text or stream)."""
    lines = _read_lines(source)
    start = 0
    while start < len(lines) and _is_comment(lines[start]):
        start += 1
    toks = _tokens(lines, start)
    last_line = len(lines)

    def take(what: str) -> tuple[int, str]:
        try:
            return next(toks)
        except StopIteration:
            raise SdpaParseError(last_line + 1, f"unexpected end of input while reading {what}") from None

    def as_int(t: tuple[int, str], what: str) -> int:
        try:
            return int(t[1])
        except ValueError:
            raise SdpaParseError(t[0], f"expected integer {what}, got {t[1]!r}") from None

    def as_float(t: tuple[int, str], what: str) -> float:
        try:
            return float(t[1])
        except ValueError:
            raise SdpaParseError(t[0], f"expected number {what}, got {t[1]!r}") from None

    m = as_int(take("number of variables"), "number of variables")
    nb_tok = take("number of blocks")
    nb = as_int(nb_tok, "number of blocks")
    if m < 0 or nb < 0:
        raise SdpaParseError(nb_tok[0], "negative dimension")
    last = nb_tok[0]
    sizes = []
    for _ in range(nb):
        t = take("block sizes")
        s = as_int(t, "block size")
        if s == 0:
            raise SdpaParseError(t[0], "block size 0")
        sizes.append(s)
        last = t[0]
    c = []
    for _ in range(m):
        t = take("objective vector")
        c.append(as_float(t, "objective coefficient"))
        last = t[0]
    first_data = last

    entries = []
    seen: dict[tuple[int, int, int, int], int] = {}
    for no in range(first_data, len(lines)):
        line = lines[no]
        if _is_comment(line):
            continue
        parts = line.translate(_PUNCT).split()
        if len(parts) != 5:
            raise SdpaParseError(no + 1, f"expected 'matno blkno i j value', got {len(parts)} fields")
        try:
            mat, b, i, j = (int(v) for v in parts[:4])
            v = float(parts[4])
        except ValueError:
            raise SdpaParseError(no + 1, "malformed entry") from None
        if not 0 <= mat <= m:
            raise SdpaParseError(no + 1, f"matrix number {mat} out of range 0..{m}")
        if not 1 <= b <= nb:
            raise SdpaParseError(no + 1, f"block number {b} out of range 1..{nb}")
        size = abs(sizes[b - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise SdpaParseError(no + 1, f"index ({i},{j}) outside block of size {size}")
        if sizes[b - 1] < 0 and i != j:
            raise SdpaParseError(no + 1, "off-diagonal entry in a diagonal block")
        i, j = min(i, j), max(i, j)
        key = (mat, b - 1, i - 1, j - 1)
        if key in seen:
            raise SdpaParseError(no + 1, f"duplicate of the entry on line {seen[key]}")
        seen[key] = no + 1
        entries.append((*key, v))
    return SdpProblem.from_entries(c, sizes, entries)


def write_sdpa_solution(sol: SdpSolution, p: SdpProblem, sink: TextIO) -> None:
    """x vector, then entries ``1 b i j v`` of X and ``2 b i j v`` of Y (upper triangles)."""
    sink.write(" ".join(_fmt(v) for v in sol.x) + "\n")
    xb = sol.x_blocks if sol.x_blocks is not None else p.slack(sol.x)
    for matno, blocks in ((1, xb), (2, sol.y_blocks)):
        for b, s in enumerate(p.block_sizes):
            a = blocks[b]
            if s < 0:
                for r in range(-s):
                    if a[r] != 0:
                        sink.write(f"{matno} {b + 1} {r + 1} {r + 1} {_fmt(a[r])}\n")
            else:
                for r in range(s):
                    for c in range(r, s):
                        if a[r, c] != 0:
                            sink.write(f"{matno} {b + 1} {r + 1} {c + 1} {_fmt(a[r, c])}\n")


def read_sdpa_solution(source, p: SdpProblem, gap_tol: float = 1e-7) -> SdpSolution:
    """Parse the solution layout of :func:`write_sdpa_solution` against ``p``."""
    lines = _read_lines(source)
    k = 0
    while k < len(lines) and _is_comment(lines[k]):
        k += 1
    if k >= len(lines):
        raise SdpaParseError(k + 1, "missing x vector")
    try:
        x = np.array([float(t) for t in lines[k].translate(_PUNCT).split()])
    except ValueError:
        raise SdpaParseError(k + 1, "malformed x vector") from None
    if len(x) != p.m:
        raise DimensionMismatchError(f"x vector has {len(x)} entries, problem has {p.m} variables")
    xb = [np.zeros((s, s)) if s > 0 else np.zeros(-s) for s in p.block_sizes]
    yb = [np.zeros((s, s)) if s > 0 else np.zeros(-s) for s in p.block_sizes]
    for no in range(k + 1, len(lines)):
        if _is_comment(lines[no]):
            continue
        parts = lines[no].translate(_PUNCT).split()
        if len(parts) != 5:
            raise SdpaParseError(no + 1, f"expected 'matno blkno i j value', got {len(parts)} fields")
        try:
            mat, b, i, j = (int(v) for v in parts[:4])
            v = float(parts[4])
        except ValueError:
            raise SdpaParseError(no + 1, "malformed entry") from None
        if mat not in (1, 2):
            raise SdpaParseError(no + 1, f"matrix number must be 1 (X) or 2 (Y), got {mat}")
        if not 1 <= b <= len(p.block_sizes):
            raise DimensionMismatchError(
                f"line {no + 1}: block {b} but problem has {len(p.block_sizes)} blocks"
            )
        s = p.block_sizes[b - 1]
        if not (1 <= i <= abs(s) and 1 <= j <= abs(s)) or (s < 0 and i != j):
            raise DimensionMismatchError(f"line {no + 1}: index ({i},{j}) does not fit block {b} of size {s}")
        target = xb if mat == 1 else yb
        if s < 0:
            target[b - 1][i - 1] = v
        else:
            target[b - 1][i - 1, j - 1] = v
            target[b - 1][j - 1, i - 1] = v
    return _finish(p, x, xb, yb, 0, gap_tol, 1e-6, "parsed from solution file")


def _finish(p: SdpProblem, x, xb, yb, iters: int, gap_tol: float, feas_tol: float, msg: str) -> SdpSolution:
    inner = p.dual_inner(yb)
    pobj = float(p.c @ x)
    dobj = float(inner[0])
    gap = abs(pobj - dobj) / max(1.0, 0.5 * (abs(pobj) + abs(dobj)))
    slack = p.slack(x)
    pinf = max((float(np.abs(a - b).max(initial=0.0)) for a, b in zip(slack, xb)), default=0.0)
    dinf = float(np.abs(inner[1:] - p.c).max(initial=0.0)) / (1.0 + float(np.abs(p.c).max(initial=0.0)))
    status = "optimal" if gap <= gap_tol and dinf <= feas_tol else "near_optimal"
    return SdpSolution(status, np.asarray(x), list(yb), pobj, dobj, gap, iters, list(xb), pinf, dinf, msg)


# ---------------------------------------------------------------------------
# builtin interior-point method


@dataclass
class _PsdBlock:
    size: int
    vars: np.ndarray
    F: np.ndarray
    Fflat: np.ndarray
    F0: np.ndarray


@dataclass
class _Data:
    m: int
    c: np.ndarray
    psd: list[_PsdBlock]
    lp_A: sp.csr_matrix | None
    lp_f0: np.ndarray
    psd_index: list[int]
    lp_index: list[tuple[int, int, int]] = field(default_factory=list)


def _assemble(p: SdpProblem, active: np.ndarray):
    """Split the problem into dense PSD stacks and one sparse LP matrix."""
    m = p.m
    col_of = -np.ones(m + 1, dtype=np.int64)
    col_of[0] = -1
    col_of[1:][active] = np.arange(int(active.sum()))
    psd_blocks, psd_index = [], []
    lp_rows = []
    offset = 0
    lp_index = []
    for b, s in enumerate(p.block_sizes):
        if s < 0:
            lp_index.append((b, offset, -s))
            offset += -s
    lp_offset = {b: off for b, off, _ in lp_index}
    total_lp = offset
    lp_r, lp_c, lp_v = [], [], []
    f0 = np.zeros(total_lp)
    per_block: dict[int, list[int]] = {}
    for k, b in enumerate(p.blk.tolist()):
        per_block.setdefault(b, []).append(k)
    for b, s in enumerate(p.block_sizes):
        ks = np.array(per_block.get(b, []), dtype=np.int64)
        mats, rows, cols, vals = p.mat[ks], p.row[ks], p.col[ks], p.val[ks]
        if s < 0:
            off = lp_offset[b]
            z = mats == 0
            f0[off + rows[z]] = vals[z]
            nz = (mats > 0) & (col_of[mats] >= 0)
            lp_r.append(off + rows[nz])
            lp_c.append(col_of[mats[nz]])
            lp_v.append(vals[nz])
            continue
        used = np.unique(mats[mats > 0])
        used = used[col_of[used] >= 0]
        local = {int(v): t for t, v in enumerate(used)}
        F = np.zeros((len(used), s, s))
        F0 = np.zeros((s, s))
        for mt, r, c_, v in zip(mats.tolist(), rows.tolist(), cols.tolist(), vals.tolist()):
            if mt == 0:
                F0[r, c_] = v
                F0[c_, r] = v
            elif mt in local:
                F[local[mt], r, c_] = v
                F[local[mt], c_, r] = v
        psd_blocks.append(_PsdBlock(s, col_of[used], F, F.reshape(len(used), s * s), F0))
        psd_index.append(b)
    n_act = int(active.sum())
    if total_lp:
        A = sp.csr_matrix(
            (np.concatenate(lp_v) if lp_v else np.zeros(0),
             (np.concatenate(lp_r) if lp_r else np.zeros(0, int), np.concatenate(lp_c) if lp_c else np.zeros(0, int))),
            shape=(total_lp, n_act),
        )
    else:
        A = None
    return _Data(n_act, p.c[active].copy(), psd_blocks, A, f0, psd_index, lp_index)


class _Scaling:
    def __init__(self, data: _Data):
        m = data.m
        col = np.zeros(m)
        for blk in data.psd:
            if len(blk.vars):
                np.maximum.at(col, blk.vars, np.abs(blk.Fflat).max(axis=1))
        if data.lp_A is not None and data.lp_A.nnz:
            col = np.maximum(col, np.asarray(abs(data.lp_A).max(axis=0).todense()).ravel())
        col[col == 0] = 1.0
        self.col = col
        for blk in data.psd:
            blk.F /= col[blk.vars][:, None, None]
            blk.Fflat = blk.F.reshape(len(blk.vars), blk.size * blk.size)
        c = data.c / col
        if data.lp_A is not None:
            data.lp_A = data.lp_A @ sp.diags(1.0 / col)
            rmax = np.asarray(abs(data.lp_A).max(axis=1).todense()).ravel()
            rmax = np.maximum(rmax, np.abs(data.lp_f0) * 1e-3)
            rmax[rmax == 0] = 1.0
            self.row = rmax
            data.lp_A = sp.diags(1.0 / rmax) @ data.lp_A
            data.lp_A = data.lp_A.tocsr()
            data.lp_f0 = data.lp_f0 / rmax
        else:
            self.row = np.zeros(0)
        self.blk = []
        for blk in data.psd:
            s = max(float(np.abs(blk.F).max(initial=0.0)), 1e-3 * float(np.abs(blk.F0).max(initial=0.0)))
            s = s if s > 0 else 1.0
            self.blk.append(s)
            blk.F /= s
            blk.Fflat = blk.F.reshape(len(blk.vars), blk.size * blk.size)
            blk.F0 = blk.F0 / s
        f0max = max(
            [float(np.abs(b.F0).max(initial=0.0)) for b in data.psd]
            + [float(np.abs(data.lp_f0).max(initial=0.0))]
        )
        self.b = max(1.0, f0max)
        self.c = max(1.0, float(np.abs(c).max(initial=0.0)))
        data.c = c / self.c
        for blk in data.psd:
            blk.F0 = blk.F0 / self.b
        data.lp_f0 = data.lp_f0 / self.b


def _chol(a: np.ndarray) -> np.ndarray | None:
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None


def _max_step(L: np.ndarray, d: np.ndarray) -> float:
    """Largest a with L L^T + a d PSD."""
    w = sla.solve_triangular(L, d, lower=True)
    w = sla.solve_triangular(L, w.T, lower=True)
    lam = float(np.linalg.eigvalsh(0.5 * (w + w.T))[0])
    return np.inf if lam >= 0 else -1.0 / lam


def _lp_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


class _Ipm:
    def __init__(self, data: _Data, opts: SolverOptions, obj_scale: float = 1.0):
        self.d = data
        self.opts = opts
        # objective value in original units = obj_scale * scaled value
        self.obj_scale = obj_scale
        self.nlp = 0 if data.lp_A is None else data.lp_A.shape[0]
        self.N = sum(b.size for b in data.psd) + self.nlp

    def amap(self, Zs: list[np.ndarray], zl: np.ndarray | None) -> np.ndarray:
        out = np.zeros(self.d.m)
        for blk, Z in zip(self.d.psd, Zs):
            if len(blk.vars):
                np.add.at(out, blk.vars, blk.Fflat @ Z.ravel())
        if self.nlp and zl is not None:
            out += self.d.lp_A.T @ zl
        return out

    def opmap(self, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        mats = [np.tensordot(x[b.vars], b.F, axes=1) if len(b.vars) else np.zeros((b.size, b.size)) for b in self.d.psd]
        lp = self.d.lp_A @ x if self.nlp else np.zeros(0)
        return mats, lp

    def run(self):
        d, o = self.d, self.opts
        m, N = d.m, self.N
        xi = max(10.0, np.sqrt(N))
        x = np.zeros(m)
        X = [xi * np.eye(b.size) for b in d.psd]
        Y = [xi * np.eye(b.size) for b in d.psd]
        xl = xi * np.ones(self.nlp)
        yl = xi * np.ones(self.nlp)
        f0norm = 1.0 + max([float(np.abs(b.F0).max(initial=0.0)) for b in d.psd] + [float(np.abs(d.lp_f0).max(initial=0.0))])
        cnorm = 1.0 + float(np.abs(d.c).max(initial=0.0))
        status, msg = "failed", "iteration limit"
        it = 0
        hist = []
        best = None
        for it in range(1, o.max_iter + 1):
            Sx, Sl = self.opmap(x)
            P = [s - b.F0 - Xb for s, b, Xb in zip(Sx, d.psd, X)]
            Pl = Sl - d.lp_f0 - xl
            rd = d.c - self.amap(Y, yl)
            pobj = float(d.c @ x)
            dobj = sum(float(np.vdot(b.F0, Yb)) for b, Yb in zip(d.psd, Y)) + float(d.lp_f0 @ yl)
            mu = (sum(float(np.vdot(Xb, Yb)) for Xb, Yb in zip(X, Y)) + float(xl @ yl)) / N
            pinf = max([float(np.abs(Pb).max(initial=0.0)) for Pb in P] + [float(np.abs(Pl).max(initial=0.0))]) / f0norm
            dinf = float(np.abs(rd).max(initial=0.0)) / cnorm
            relgap = abs(pobj - dobj) / max(1.0 / self.obj_scale, 0.5 * (abs(pobj) + abs(dobj)))
            hist.append((pobj, dobj, pinf, dinf, relgap))
            merit = max(pinf, dinf, relgap)
            if best is None or merit < best[0]:
                best = (merit, it, x.copy(), [a.copy() for a in X], [a.copy() for a in Y], xl.copy(), yl.copy(), hist[-1])
            if o.verbose:
                log.info("it %3d pobj %+.10e dobj %+.10e pinf %.1e dinf %.1e gap %.1e mu %.1e",
                         it, pobj, dobj, pinf, dinf, relgap, mu)
            if pinf <= o.feas_tol and dinf <= o.feas_tol and relgap <= o.gap_tol:
                status, msg = "optimal", "converged"
                break
            aY = self.amap(Y, yl)
            if dobj > 0 and float(np.abs(aY).max(initial=0.0)) <= 1e-8 * dobj:
                status, msg = "infeasible", "dual ray certifies primal infeasibility"
                break
            if pobj < 0:
                ray = max([float(np.abs(Pb + b.F0).max(initial=0.0)) for Pb, b in zip(P, d.psd)]
                          + [float(np.abs(Pl + d.lp_f0).max(initial=0.0))])
                if ray <= 1e-8 * -pobj and pinf > o.feas_tol:
                    status, msg = "unbounded", "primal ray certifies unboundedness"
                    break
                if -pobj > 1e12:
                    status, msg = "unbounded", "primal objective diverged"
                    break
            if dobj > 1e12:
                status, msg = "infeasible", "dual objective diverged"
                break

            LX = [_chol(Xb) for Xb in X]
            if any(L is None for L in LX):
                status, msg = "near_optimal", "lost positive definiteness of X"
                break
            Xinv = [sla.cho_solve((L, True), np.eye(len(L))) for L in LX]
            Xinv = [0.5 * (A + A.T) for A in Xinv]
            M = np.zeros((m, m))
            for blk, Xi, Yb in zip(d.psd, Xinv, Y):
                k = len(blk.vars)
                if not k:
                    continue
                T = Xi @ blk.F @ Yb
                Mb = blk.Fflat @ T.transpose(0, 2, 1).reshape(k, -1).T
                M[np.ix_(blk.vars, blk.vars)] += Mb
            if self.nlp:
                A = d.lp_A
                M += (A.T @ sp.diags(yl / xl) @ A).toarray()
            M = 0.5 * (M + M.T)
            solve = self._factor(M)
            if solve is None:
                status, msg = "near_optimal", "Schur complement singular"
                break
            xinvP_Y = [Xi @ Pb @ Yb for Xi, Pb, Yb in zip(Xinv, P, Y)]
            lp_PY = Pl * yl / xl if self.nlp else None

            def direction(Rterm, Rl):
                # Rterm = X^{-1} R_c per block; Rl likewise for the LP part
                rhs = self.amap([R - Q for R, Q in zip(Rterm, xinvP_Y)],
                                (Rl - lp_PY) if self.nlp else None) - rd
                dx = solve(rhs)
                Fdx, Fl = self.opmap(dx)
                dX = [f + Pb for f, Pb in zip(Fdx, P)]
                dY = []
                for R, Xi, dXb, Yb in zip(Rterm, Xinv, dX, Y):
                    g = R - Xi @ dXb @ Yb
                    dY.append(0.5 * (g + g.T))
                dxl = Fl + Pl
                dyl = Rl - dxl * yl / xl if self.nlp else np.zeros(0)
                return dx, dX, dY, dxl, dyl

            Ra = [-Yb for Yb in Y]
            Rla = -yl
            dxa, dXa, dYa, dxla, dyla = direction(Ra, Rla)
            LY = [_chol(Yb) for Yb in Y]
            if any(L is None for L in LY):
                status, msg = "near_optimal", "lost positive definiteness of Y"
                break
            ap = min(1.0, min([_max_step(L, D) for L, D in zip(LX, dXa)] + [_lp_step(xl, dxla)]))
            ad = min(1.0, min([_max_step(L, D) for L, D in zip(LY, dYa)] + [_lp_step(yl, dyla)]))
            mu_a = (sum(float(np.vdot(Xb + ap * a, Yb + ad * b)) for Xb, a, Yb, b in zip(X, dXa, Y, dYa))
                    + float((xl + ap * dxla) @ (yl + ad * dyla))) / N
            sigma = min(1.0, max(0.0, mu_a / mu)) ** 3 if mu > 0 else 0.0
            Rc = [sigma * mu * Xi - Yb - Xi @ a @ b for Xi, Yb, a, b in zip(Xinv, Y, dXa, dYa)]
            Rlc = (sigma * mu - dxla * dyla) / xl - yl if self.nlp else np.zeros(0)
            dx, dX, dY, dxl, dyl = direction(Rc, Rlc)

            tau = o.step_fraction if relgap > 1e-4 else max(o.step_fraction, 0.98)
            ap = min(1.0, tau * min([_max_step(L, D) for L, D in zip(LX, dX)] + [_lp_step(xl, dxl)]))
            ad = min(1.0, tau * min([_max_step(L, D) for L, D in zip(LY, dY)] + [_lp_step(yl, dyl)]))
            ok = False
            for _ in range(30):
                nX = [Xb + ap * D for Xb, D in zip(X, dX)]
                nY = [Yb + ad * D for Yb, D in zip(Y, dY)]
                nxl, nyl = xl + ap * dxl, yl + ad * dyl
                if (all(_chol(A) is not None for A in nX) and all(_chol(A) is not None for A in nY)
                        and (nxl > 0).all() and (nyl > 0).all()):
                    ok = True
                    break
                ap *= 0.5
                ad *= 0.5
            if not ok:
                status, msg = "near_optimal", "step halving exhausted"
                break
            x = x + ap * dx
            X, Y, xl, yl = nX, nY, nxl, nyl
            if ap < 1e-10 and ad < 1e-10:
                status, msg = "near_optimal", "stalled"
                break
        else:
            it = o.max_iter
        if status in ("near_optimal", "failed"):
            # late iterates can lose dual feasibility; fall back to the best one seen
            if best is not None and best[0] < max(hist[-1][2:]):
                _, it_best, x, X, Y, xl, yl, last = best
                hist.append(last)
                msg = f"{msg}; returned iterate {it_best}"
            pobj, dobj, pinf, dinf, relgap = hist[-1]
            if status == "failed" and pinf < 1e-5 and dinf < 1e-5 and relgap < 1e-4:
                status = "near_optimal"
            elif status == "near_optimal" and not (pinf < 1e-4 and dinf < 1e-4 and relgap < 1e-2):
                status = "failed"
        return status, msg, it, x, X, Y, xl, yl

    @staticmethod
    def _factor(M: np.ndarray):
        """Solver for M dx = r with two steps of iterative refinement."""
        base = None
        try:
            cf = sla.cho_factor(M, lower=True, check_finite=False)
            base = lambda r: sla.cho_solve(cf, r, check_finite=False)  # noqa: E731
        except np.linalg.LinAlgError:
            scale = max(1.0, float(np.abs(np.diag(M)).max(initial=0.0)))
            try:
                cf = sla.cho_factor(M + 1e-12 * scale * np.eye(len(M)), lower=True, check_finite=False)
                base = lambda r: sla.cho_solve(cf, r, check_finite=False)  # noqa: E731
            except np.linalg.LinAlgError:
                w, V = np.linalg.eigh(M)
                cut = 1e-14 * max(1.0, float(np.abs(w).max(initial=0.0)))
                inv = np.where(np.abs(w) > cut, 1.0 / np.where(np.abs(w) > cut, w, 1.0), 0.0)
                base = lambda r: V @ (inv * (V.T @ r))  # noqa: E731

        def refined(r: np.ndarray) -> np.ndarray:
            dx = base(r)
            for _ in range(2):
                dx = dx + base(r - M @ dx)
            return dx

        return refined


def _solve_builtin(p: SdpProblem, opts: SolverOptions) -> SdpSolution:
    t0 = time.perf_counter()
    touched = np.zeros(p.m, dtype=bool)
    touched[p.mat[p.mat > 0] - 1] = True
    if (~touched & (p.c != 0)).any():
        x = np.zeros(p.m)
        return SdpSolution("unbounded", x, [np.zeros((s, s)) if s > 0 else np.zeros(-s) for s in p.block_sizes],
                           -np.inf, -np.inf, np.inf, 0, message="variable with cost appears in no constraint")
    if not touched.any():
        # nothing to optimize: X = -F_0 is either PSD or not
        xb = p.slack(np.zeros(p.m))
        zero = [np.zeros_like(a) for a in xb]
        ok = min(block_min_eigenvalues(xb), default=0.0) >= -opts.feas_tol
        sol = _finish(p, np.zeros(p.m), xb, zero, 0, opts.gap_tol, opts.feas_tol, "no free variables")
        sol.status = "optimal" if ok else "infeasible"
        sol.wall_time = time.perf_counter() - t0
        return sol
    data = _assemble(p, touched)
    sc = _Scaling(data)
    ipm = _Ipm(data, opts, sc.c * sc.b)
    status, msg, it, xs, Xs, Ys, xl, yl = ipm.run()

    x = np.zeros(p.m)
    x[touched] = xs * sc.b / sc.col
    yb: list[np.ndarray] = [None] * len(p.block_sizes)  # type: ignore[list-item]
    xb: list[np.ndarray] = [None] * len(p.block_sizes)  # type: ignore[list-item]
    for k, b in enumerate(data.psd_index):
        yb[b] = Ys[k] * sc.c / sc.blk[k]
        xb[b] = Xs[k] * sc.b * sc.blk[k]
    for b, off, size in data.lp_index:
        yb[b] = yl[off:off + size] * sc.c / sc.row[off:off + size]
        xb[b] = xl[off:off + size] * sc.b * sc.row[off:off + size]
    sol = _finish(p, x, xb, yb, it, opts.gap_tol, opts.feas_tol, msg)
    if status in ("infeasible", "unbounded", "failed"):
        sol.status = status
    elif status == "near_optimal":
        sol.status = "near_optimal"
    else:
        sol.status = "optimal"
    sol.wall_time = time.perf_counter() - t0
    return sol


# ---------------------------------------------------------------------------
# external bridge


def _solve_external(p: SdpProblem, opts: SolverOptions) -> SdpSolution:
    if not opts.command or "{in}" not in opts.command or "{out}" not in opts.command:
        raise ValueError("external backend needs a command template containing {in} and {out}")
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="hamming_sdp_") as tmp:
        fin = os.path.join(tmp, "problem.dat-s")
        fout = os.path.join(tmp, "solution.out")
        write_sdpa(p, fin)
        cmd = opts.command.replace("{in}", shlex.quote(fin)).replace("{out}", shlex.quote(fout))
        empty = [np.zeros((s, s)) if s > 0 else np.zeros(-s) for s in p.block_sizes]
        nan = float("nan")
        try:
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        except OSError as exc:
            return SdpSolution("failed", np.zeros(p.m), empty, nan, nan, nan, 0,
                               message=f"backend process error: {exc}")
        if proc.returncode != 0:
            return SdpSolution("failed", np.zeros(p.m), empty, nan, nan, nan, 0,
                               message=f"backend process exited with code {proc.returncode}: {proc.stderr.strip()[:500]}")
        try:
            sol = read_sdpa_solution(fout, p, opts.gap_tol)
        except (OSError, ValueError) as exc:
            return SdpSolution("failed", np.zeros(p.m), empty, nan, nan, nan, 0,
                               message=f"backend output parse error: {exc}")
    sol.wall_time = time.perf_counter() - t0
    sol.message = "external backend"
    return sol


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve with the builtin IPM or the configured external command."""
    opts = opts or SolverOptions()
    if opts.backend == "builtin":
        return _solve_builtin(p, opts)
    if opts.backend == "external":
        return _solve_external(p, opts)
    raise ValueError(f"unknown backend {opts.backend!r}")


def block_min_eigenvalues(blocks: Sequence[np.ndarray]) -> list[float]:
    out = []
    for a in blocks:
        if a.ndim == 1:
            out.append(float(a.min(initial=np.inf)))
        else:
            out.append(float(np.linalg.eigvalsh(a)[0]) if a.size else np.inf)
    return out


def r_operator(a: np.ndarray, corner: float = 1.0) -> np.ndarray:
    """R(A) = [[corner, diag(A)^T], [diag(A), A]]."""
    a = np.asarray(a, dtype=float)
    d = np.diag(a)
    out = np.empty((len(a) + 1, len(a) + 1))
    out[0, 0] = corner
    out[0, 1:] = d
    out[1:, 0] = d
    out[1:, 1:] = a
    return out
