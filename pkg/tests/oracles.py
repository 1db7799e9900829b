"""Independent oracles for the tests: brute-force word enumeration and a cvxpy reference solve."""
from __future__ import annotations

import itertools
import re

import numpy as np

from hamming_sdp.sdp import SdpProblem
from hamming_sdp.terwilliger import enumerate_classes


def words(q: int, n: int) -> list[tuple[int, ...]]:
    return list(itertools.product(range(q), repeat=n))


def distance(u, v) -> int:
    return sum(a != b for a, b in zip(u, v))


def class_of(u, v) -> tuple[int, int, int, int]:
    """(|S(u)|, |S(v)|, |S(u) & S(v)|, #{k : u_k = v_k != 0})."""
    i = sum(a != 0 for a in u)
    j = sum(b != 0 for b in v)
    t = sum(a != 0 and b != 0 for a, b in zip(u, v))
    p = sum(a != 0 and a == b for a, b in zip(u, v))
    return i, j, t, p


def dense_matrices(p: SdpProblem) -> list[tuple[int, dict[int, np.ndarray]]]:
    """Per block: (signed size, {matno: dense matrix or diagonal vector})."""
    out = []
    for b, s in enumerate(p.block_sizes):
        sel = p.blk == b
        size = abs(s)
        mats: dict[int, np.ndarray] = {}
        for k, r, c, v in zip(p.mat[sel], p.row[sel], p.col[sel], p.val[sel]):
            m = mats.setdefault(int(k), np.zeros((size, size)))
            m[r, c] = v
            m[c, r] = v
        if s < 0:
            mats = {k: np.diag(m).copy() for k, m in mats.items()}
        out.append((s, mats))
    return out


def slack_min_eig(p: SdpProblem, x: np.ndarray) -> float:
    """Least eigenvalue (or diagonal entry) of sum x_i F_i - F_0 over all blocks."""
    worst = np.inf
    for s, mats in dense_matrices(p):
        size = abs(s)
        acc = -mats.get(0, np.zeros(size) if s < 0 else np.zeros((size, size)))
        for k, m in mats.items():
            if k:
                acc = acc + x[k - 1] * m
        worst = min(worst, float(acc.min()) if s < 0 else float(np.linalg.eigvalsh(acc)[0]))
    return worst


def cvxpy_optimum(p: SdpProblem) -> float:
    """Reference optimum of min c^T x s.t. sum x_i F_i - F_0 PSD, via cvxpy + Clarabel."""
    import cvxpy as cp

    x = cp.Variable(p.m)
    cons = []
    for s, mats in dense_matrices(p):
        size = abs(s)
        f0 = mats.pop(0, np.zeros(size) if s < 0 else np.zeros((size, size)))
        expr = sum(x[k - 1] * m for k, m in mats.items()) - f0
        if s < 0:
            cons.append(expr >= 0)
        else:
            cons.append((expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Minimize(p.c @ x), cons)
    prob.solve(solver="CLARABEL")
    return float(prob.value)


def model_point(compiled, q: int, n: int, values: np.ndarray) -> np.ndarray:
    """Standard-form point from per-class values, using the variable names ``x[i,j,t,p]``."""
    index = enumerate_classes(q, n)
    out = []
    for name in compiled.names:
        c = tuple(int(v) for v in re.findall(r"-?\d+", name))
        out.append(values[index.ordinal(*c)])
    return np.array(out)


def known_optimum_problem(rng, m=4, sizes=(3, 2, -3)):
    """Complementary X*, Y* give an SDP whose optimum is <F_0, Y*> at x*."""
    xs = rng.standard_normal(m)
    mats = [[] for _ in range(m)]
    f0 = []
    ystar = []
    for s in sizes:
        size = abs(s)
        if s < 0:
            split = rng.random(size) < 0.5
            xblk = np.where(split, rng.uniform(0.5, 2, size), 0.0)
            yblk = np.where(split, 0.0, rng.uniform(0.5, 2, size))
            fis = [np.diag(rng.standard_normal(size)) for _ in range(m)]
            xblk, yblk = np.diag(xblk), np.diag(yblk)
        else:
            qm, _ = np.linalg.qr(rng.standard_normal((size, size)))
            r = int(rng.integers(0, size + 1))
            xblk = (qm[:, :r] * rng.uniform(0.5, 2, r)) @ qm[:, :r].T
            yblk = (qm[:, r:] * rng.uniform(0.5, 2, size - r)) @ qm[:, r:].T
            fis = []
            for _ in range(m):
                a = rng.standard_normal((size, size))
                fis.append(a + a.T)
        for i in range(m):
            mats[i].append(fis[i])
        f0.append(sum(xs[i] * fis[i] for i in range(m)) - xblk)
        ystar.append(yblk)
    entries = []
    for k, blocks in enumerate([f0] + mats):
        for b, (s, a) in enumerate(zip(sizes, blocks)):
            for r in range(abs(s)):
                for c in range(r, abs(s)) if s > 0 else [r]:
                    if a[r, c] != 0:
                        entries.append((k, b, r, c, float(a[r, c])))
    cvec = [sum(float(np.sum(mats[i][b] * ystar[b])) for b in range(len(sizes))) for i in range(m)]
    opt = sum(float(np.sum(f0[b] * ystar[b])) for b in range(len(sizes)))
    box = np.column_stack([xs - 10 - np.abs(xs), xs + 10 + np.abs(xs)])
    return SdpProblem.from_entries(cvec, sizes, entries, variable_box=box), opt, xs
