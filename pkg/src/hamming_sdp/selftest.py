"""Exact identities and small dense-oracle checks, shared by the CLI and the tests.

Each check returns a :class:`CheckResult`; nothing here raises on a failed
identity, so a caller always gets the full list.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .combinatorics import binomial, krawtchouk, shell_size
from .terwilliger import (
    AlgebraElement,
    beta,
    beta_symmetric,
    block_image,
    block_specs,
    bordered_block_image,
    dense_oracle,
    enumerate_classes,
    gamma,
    random_element,
)

ORACLE_CASES = ((2, 3), (2, 4), (3, 2), (3, 3), (4, 2))


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _first_failure(cases: Iterable, test: Callable) -> str | None:
    for case in cases:
        msg = test(*case)
        if msg:
            return msg
    return None


def _result(name: str, failure: str | None, detail: str) -> CheckResult:
    return CheckResult(name, failure is None, failure or detail)


def check_class_counts(max_n: int = 16) -> CheckResult:
    def test(q, n):
        want = binomial(n + 3, 3) if q == 2 else binomial(n + 4, 4)
        got = len(enumerate_classes(q, n))
        return None if got == want else f"|I({q},{n})| = {got}, expected {want}"

    cases = [(q, n) for q in (2, 3, 4, 5) for n in range(1, max_n + 1)]
    return _result("class counts", _first_failure(cases, test), f"{len(cases)} (q, n) pairs")


def check_block_dimensions(max_n: int = 16) -> CheckResult:
    def test(q, n):
        specs = block_specs(q, n)
        squares = sum(s.size**2 for s in specs)
        if squares != len(enumerate_classes(q, n)):
            return f"sum of squared block sizes {squares} != |I({q},{n})|"
        total = sum(s.multiplicity * s.size for s in specs)
        if total != q**n:
            return f"sum of multiplicity * size {total} != {q}^{n}"
        return None

    cases = [(q, n) for q in (2, 3, 4, 5) for n in range(1, max_n + 1)]
    return _result("block dimensions", _first_failure(cases, test), f"{len(cases)} (q, n) pairs")


def check_beta_formulas(max_n: int = 20) -> CheckResult:
    def test(n):
        for k in range(n // 2 + 1):
            for i in range(k, n - k + 1):
                for j in range(k, n - k + 1):
                    for t in range(min(i, j) + 1):
                        if beta(n, i, j, k, t) != beta_symmetric(n, i, j, k, t):
                            return f"beta mismatch at n={n}, i={i}, j={j}, k={k}, t={t}"
        return None

    cases = [(n,) for n in range(1, max_n + 1)]
    return _result("beta formulas agree", _first_failure(cases, test), f"n <= {max_n}")


def check_krawtchouk_orthogonality(max_q: int = 5, max_n: int = 12) -> CheckResult:
    def test(q, n):
        for i in range(n + 1):
            for j in range(i, n + 1):
                s = sum(krawtchouk(q, n, i, x) * krawtchouk(q, n, j, x) * shell_size(q, n, x) for x in range(n + 1))
                want = q**n * shell_size(q, n, i) if i == j else 0
                if s != want:
                    return f"Krawtchouk q={q}, n={n}, i={i}, j={j}: {s} != {want}"
        return None

    cases = [(q, n) for q in range(2, max_q + 1) for n in range(1, max_n + 1)]
    return _result("Krawtchouk orthogonality", _first_failure(cases, test), f"q <= {max_q}, n <= {max_n}")


def check_gamma_total(max_n: int = 10) -> CheckResult:
    def test(q, n):
        total = sum(gamma(q, n, c) for c in enumerate_classes(q, n).classes)
        return None if total == q ** (2 * n) else f"sum of gamma over I({q},{n}) = {total} != {q}^{2 * n}"

    cases = [(q, n) for q in (2, 3, 4, 5) for n in range(1, max_n + 1)]
    return _result("gamma totals", _first_failure(cases, test), f"n <= {max_n}")


def exact_identity_checks() -> list[CheckResult]:
    return [
        check_class_counts(),
        check_block_dimensions(),
        check_beta_formulas(),
        check_krawtchouk_orthogonality(),
        check_gamma_total(),
    ]


def _coefficients_of(oracle, dense: np.ndarray) -> AlgebraElement:
    """Read the class coefficients off a dense matrix known to lie in the algebra."""
    x = AlgebraElement.zeros(oracle.q, oracle.n)
    flat = oracle.class_of_pair.ravel()
    first = np.full(len(x.index), -1)
    first[flat[::-1]] = np.arange(len(flat))[::-1]
    x.coeff[:] = dense.ravel()[first]
    return x


def check_dense_blocks(cases=ORACLE_CASES, samples: int = 20, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for q, n in cases:
        oracle = dense_oracle(q, n)
        u = oracle.transform
        for _ in range(samples):
            x = random_element(q, n, rng, symmetric=False)
            got = u.conj().T @ oracle.matrix(x) @ u
            err = float(np.abs(got - oracle.predicted(x)).max())
            worst = max(worst, err)
            if err > 1e-9:
                return CheckResult("dense block images", False, f"q={q}, n={n}: entrywise error {err:.2e}")
    return CheckResult("dense block images", True, f"max entrywise error {worst:.1e}")


def _psd(a: np.ndarray, tol: float = 1e-9) -> bool:
    scale = max(1.0, float(np.abs(a).max()))
    return float(np.linalg.eigvalsh(a)[0]) >= -tol * scale


def check_psd_equivalence(cases=ORACLE_CASES, samples: int = 50, seed: int = 1) -> CheckResult:
    """PSD of M and of R(M) agree with PSD of the (bordered) block image.

    Samples are A A^T shifted by a random multiple of I, so both outcomes occur.
    """
    rng = np.random.default_rng(seed)
    seen = {True: 0, False: 0}
    for q, n in cases:
        oracle = dense_oracle(q, n)
        size = len(oracle.words)
        for s in range(samples):
            a = oracle.matrix(random_element(q, n, rng, symmetric=False))
            m = a @ a.T
            lo = float(np.linalg.eigvalsh(m)[0])
            m = m - (lo + rng.uniform(-0.5, 0.5) * (1.0 + abs(lo))) * np.eye(size)
            x = _coefficients_of(oracle, m)
            dense_ok = _psd(m)
            if dense_ok != block_image(x).is_psd():
                return CheckResult("PSD equivalence", False, f"q={q}, n={n}, sample {s}: block image disagrees")
            corner = float(rng.uniform(0.0, 2.0)) * max(1.0, float(np.abs(np.diag(m)).max()))
            r = np.empty((size + 1, size + 1))
            r[0, 0] = corner
            r[0, 1:] = r[1:, 0] = np.diag(m)
            r[1:, 1:] = m
            r_ok = _psd(r)
            if r_ok != bordered_block_image(x, corner).is_psd():
                return CheckResult("PSD equivalence", False, f"q={q}, n={n}, sample {s}: bordered image disagrees")
            seen[dense_ok] += 1
    return CheckResult("PSD equivalence", True, f"{seen[True]} PSD and {seen[False]} non-PSD samples")


def dense_oracle_checks() -> list[CheckResult]:
    return [check_dense_blocks(), check_psd_equivalence()]


def run_all() -> list[CheckResult]:
    return exact_identity_checks() + dense_oracle_checks()
