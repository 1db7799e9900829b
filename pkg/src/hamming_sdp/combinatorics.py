"""Exact integer combinatorics for the Hamming scheme H(n, q).

Everything here works on Python ints, so nothing overflows. Floats only
show up in :func:`distance_vector_psd`, which takes real input.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb, factorial
from typing import Sequence


def binomial(n: int, k: int) -> int:
    """C(n, k), returning 0 when k < 0, k > n or n < 0."""
    if n < 0 or k < 0 or k > n:
        return 0
    return comb(n, k)


def multinomial(n: int, parts: Sequence[int]) -> int:
    """n! / (prod parts! * (n - sum parts)!), or 0 if the parts do not fit in n."""
    if n < 0 or any(p < 0 for p in parts):
        return 0
    rest = n - sum(parts)
    if rest < 0:
        return 0
    out = factorial(n) // factorial(rest)
    for p in parts:
        out //= factorial(p)
    return out


def power(base: int, exp: int) -> int:
    """Integer power with the convention 0**0 == 1; negative exponents give 0."""
    if exp < 0:
        return 0
    return base**exp


def _check_qn(q: int, n: int) -> None:
    if q < 2 or n < 1:
        raise ValueError(f"need q >= 2 and n >= 1, got q={q}, n={n}")


@lru_cache(maxsize=None)
def krawtchouk(q: int, n: int, j: int, x: int) -> int:
    """K_j(x) = sum_k (-1)^k C(x,k) C(n-x, j-k) (q-1)^(j-k)."""
    _check_qn(q, n)
    if not (0 <= j <= n and 0 <= x <= n):
        raise ValueError(f"krawtchouk needs 0 <= j, x <= n, got j={j}, x={x}, n={n}")
    return sum(
        (-1) ** k * binomial(x, k) * binomial(n - x, j - k) * (q - 1) ** (j - k)
        for k in range(j + 1)
    )


def shell_size(q: int, n: int, i: int) -> int:
    """Number of words at distance i from a fixed word: C(n,i)(q-1)^i."""
    return binomial(n, i) * (q - 1) ** i if 0 <= i <= n else 0


def sphere_size(q: int, n: int, r: int) -> int:
    """Number of words in a Hamming ball of radius r."""
    _check_qn(q, n)
    if not 0 <= r <= n:
        raise ValueError(f"radius must satisfy 0 <= r <= n, got r={r}")
    return sum(shell_size(q, n, i) for i in range(r + 1))


def sphere_covering_bound(q: int, n: int, r: int) -> int:
    """ceil(q^n / |B_r|)."""
    size = sphere_size(q, n, r)
    return -(-(q**n) // size)


def distance_vector_psd(q: int, n: int, x: Sequence[float]) -> bool:
    """Delsarte nonnegativity of a distance distribution.

    True iff sum_i x_i K_j(i) >= -tol for every j. As a matrix statement this is
    sum_i x_i A_i / (C(n,i)(q-1)^i) being positive semidefinite.
    """
    _check_qn(q, n)
    if len(x) != n + 1:
        raise ValueError(f"expected {n + 1} entries, got {len(x)}")
    kmax = max(abs(krawtchouk(q, n, j, i)) for j in range(n + 1) for i in range(n + 1))
    xmax = max((abs(float(v)) for v in x), default=0.0)
    tol = 1e-10 * xmax * kmax
    for j in range(n + 1):
        s = sum(float(x[i]) * krawtchouk(q, n, j, i) for i in range(n + 1))
        if s < -tol:
            return False
    return True
