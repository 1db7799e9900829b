"""Rigorous objective bounds from approximate dual solutions.

For min c^T x subject to X = sum x_i F_i - F_0 PSD, any PSD Y gives, for every
feasible x in a box,

    c^T x = <F_0, Y> + <X, Y> - sum_i x_i eps_i >= <F_0, Y> - sum_i max_box(x_i eps_i),

with eps_i = <F_i, Y> - c_i. For the box [0, 1] the correction is
sum_i max(0, eps_i).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .sdp import SdpProblem, SdpSolution

PSD_MARGIN = 1e-9
CLAMP_WINDOW = 1e-7
# eigenvalues above -CLAMP_FLOOR * ||Y|| are treated as exact zeros by clamp_dual;
# this keeps the projection idempotent under eigensolver round-off
CLAMP_FLOOR = 1e-15


class CertificateError(ValueError):
    """The dual matrices fail the PSD check or the box is unusable."""

    def __init__(self, message: str, cert: "DualCertificate | None" = None):
        super().__init__(message)
        self.cert = cert


@dataclass
class DualCertificate:
    y_blocks: list[np.ndarray]
    epsilons: np.ndarray
    dual_obj: float
    min_eig: float
    box: np.ndarray
    y_norm: float
    correction: float
    certified: float

    def to_json(self) -> dict:
        return {
            "y_blocks": [b.tolist() for b in self.y_blocks],
            "epsilons": self.epsilons.tolist(),
            "dual_obj": self.dual_obj,
            "min_eig": self.min_eig,
            "box": [[float(a), float(b)] for a, b in self.box],
            "y_norm": self.y_norm,
            "correction": self.correction,
            "certified": self.certified,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DualCertificate":
        return cls(
            [np.asarray(b, dtype=float) for b in data["y_blocks"]],
            np.asarray(data["epsilons"], dtype=float),
            float(data["dual_obj"]),
            float(data["min_eig"]),
            np.asarray(data["box"], dtype=float).reshape(-1, 2),
            float(data["y_norm"]),
            float(data["correction"]),
            float(data["certified"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def _check_blocks(p: SdpProblem, y_blocks: Sequence[np.ndarray]) -> None:
    if y_blocks is None or len(y_blocks) != len(p.block_sizes):
        raise CertificateError("dual solution missing or has the wrong number of blocks")
    for b, (s, y) in enumerate(zip(p.block_sizes, y_blocks)):
        want = (-s,) if s < 0 else (s, s)
        if y is None or np.shape(y) != want:
            raise CertificateError(f"dual block {b} has shape {np.shape(y)}, expected {want}")


def _block_eigs(y_blocks: Sequence[np.ndarray]) -> list[np.ndarray]:
    out = []
    for y in y_blocks:
        if y.ndim == 1:
            out.append(np.sort(y))
        else:
            out.append(np.linalg.eigvalsh(0.5 * (y + y.T)) if y.size else np.zeros(0))
    return out


def _inner_products(p: SdpProblem, y_blocks: Sequence[np.ndarray]) -> list[float]:
    """<F_k, Y> for k = 0..m with compensated summation over entries."""
    terms: list[list[float]] = [[] for _ in range(p.m + 1)]
    for mat, b, r, c, v in p.entries():
        y = y_blocks[b]
        if y.ndim == 1:
            terms[mat].append(v * float(y[r]))
        elif r == c:
            terms[mat].append(v * float(y[r, c]))
        else:
            terms[mat].append(v * float(y[r, c]))
            terms[mat].append(v * float(y[c, r]))
    return [math.fsum(t) for t in terms]


def verify_certificate(
    p: SdpProblem, sol: SdpSolution, box: np.ndarray | Sequence[Sequence[float]] | None = None
) -> tuple[float, DualCertificate]:
    """Certified lower bound on the optimum of min c^T x over the box."""
    _check_blocks(p, sol.y_blocks)
    if box is None:
        box = p.variable_box
    if box is None:
        raise CertificateError("no variable box given")
    box = np.asarray(box, dtype=float)
    if box.shape != (p.m, 2):
        raise CertificateError(f"box has shape {box.shape}, expected ({p.m}, 2)")
    if (box[:, 0] > box[:, 1]).any():
        raise CertificateError("box with lower end above upper end")
    y_blocks = [np.asarray(y, dtype=float) for y in sol.y_blocks]
    eigs = _block_eigs(y_blocks)
    nonempty = [e for e in eigs if e.size]
    y_norm = max((float(np.abs(e).max()) for e in nonempty), default=0.0)
    min_eig = min((float(e[0]) for e in nonempty), default=0.0)
    inner = _inner_products(p, y_blocks)
    eps = np.array([inner[k + 1] - float(p.c[k]) for k in range(p.m)])
    worst = []
    for (lo, hi), e in zip(box, eps):
        if e == 0.0:
            worst.append(0.0)
        else:
            worst.append(max(lo * e, hi * e))
    correction = math.fsum(worst) if all(np.isfinite(worst)) else math.inf
    certified = inner[0] - correction
    cert = DualCertificate(y_blocks, eps, inner[0], min_eig, box, y_norm, correction, certified)
    if min_eig < -PSD_MARGIN * y_norm:
        raise CertificateError(
            f"dual matrix not PSD: least eigenvalue {min_eig:.3e} below -{PSD_MARGIN:g}*||Y|| = {-PSD_MARGIN * y_norm:.3e}",
            cert,
        )
    return certified, cert


def clamp_dual(sol: SdpSolution, p: SdpProblem | None = None) -> SdpSolution:
    """Project slightly indefinite dual blocks onto the PSD cone.

    Only blocks whose least eigenvalue lies in [-1e-7 ||Y||, 0) are touched;
    anything more negative is left for :func:`verify_certificate` to reject.
    """
    eigs = _block_eigs(sol.y_blocks)
    nonempty = [e for e in eigs if e.size]
    y_norm = max((float(np.abs(e).max()) for e in nonempty), default=0.0)
    lo, hi = -CLAMP_WINDOW * y_norm, -CLAMP_FLOOR * y_norm
    changed = False
    out = []
    for y, e in zip(sol.y_blocks, eigs):
        if not e.size or not (lo <= e[0] < hi):
            out.append(y)
            continue
        changed = True
        if y.ndim == 1:
            out.append(np.maximum(y, 0.0))
        else:
            w, v = np.linalg.eigh(0.5 * (y + y.T))
            w = np.maximum(w, 0.0)
            z = (v * w) @ v.T
            out.append(0.5 * (z + z.T))
    if not changed:
        return sol
    new = replace(sol, y_blocks=out)
    if p is not None:
        new.dual_obj = _inner_products(p, out)[0]
    return new
