import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamming_sdp.combinatorics import (
    binomial,
    distance_vector_psd,
    krawtchouk,
    multinomial,
    power,
    shell_size,
    sphere_covering_bound,
    sphere_size,
)
from oracles import distance, words


@pytest.mark.parametrize("n,k,want", [(10, 3, 120), (4, -1, 0), (36, 18, 9075135300), (3, 5, 0), (-2, 1, 0), (0, 0, 1)])
def test_binomial_values(n, k, want):
    assert binomial(n, k) == want


def test_binomial_pascal_rule():
    for n in range(1, 41):
        for k in range(0, n + 1):
            assert binomial(n, k) == binomial(n - 1, k - 1) + binomial(n - 1, k)


def test_binomial_large_is_exact():
    assert binomial(64, 32) == math.factorial(64) // (math.factorial(32) ** 2)


@pytest.mark.parametrize("n,parts,want", [(2, [1, 0, 0, 0], 2), (7, [2, 2, 2], 630), (3, [2, 2], 0), (4, [-1], 0)])
def test_multinomial_values(n, parts, want):
    assert multinomial(n, parts) == want


@given(st.integers(0, 25), st.lists(st.integers(0, 8), max_size=4))
def test_multinomial_is_product_of_binomials(n, parts):
    want, left = 1, n
    for p in parts:
        want *= binomial(left, p)
        left -= p
    if left < 0:
        want = 0
    assert multinomial(n, parts) == want


def test_power_zero_to_zero():
    assert power(0, 0) == 1
    assert power(0, 3) == 0
    assert power(3, -1) == 0


@pytest.mark.parametrize("args,want", [((3, 6, 0, 4), 1), ((3, 6, 2, 0), 60), ((3, 6, 1, 2), 6)])
def test_krawtchouk_values(args, want):
    assert krawtchouk(*args) == want


@given(st.integers(2, 6), st.integers(1, 10), st.data())
@settings(max_examples=60)
def test_krawtchouk_generating_function(q, n, data):
    # K_j(x) is the z^j coefficient of (1 + (q-1) z)^(n-x) (1 - z)^x
    x = data.draw(st.integers(0, n))
    poly = np.polynomial.Polynomial
    gen = poly([1, q - 1]) ** (n - x) * poly([1, -1]) ** x
    coef = [int(round(c)) for c in gen.coef] + [0] * (n + 1)
    for j in range(n + 1):
        assert krawtchouk(q, n, j, x) == coef[j]


def test_krawtchouk_orthogonality():
    for q in range(2, 6):
        for n in range(1, 13):
            for j in range(n + 1):
                for l in range(j, n + 1):
                    s = sum(shell_size(q, n, i) * krawtchouk(q, n, j, i) * krawtchouk(q, n, l, i) for i in range(n + 1))
                    assert s == (q**n * shell_size(q, n, j) if j == l else 0)


def test_krawtchouk_domain():
    with pytest.raises(ValueError):
        krawtchouk(3, 4, 5, 0)
    with pytest.raises(ValueError):
        krawtchouk(1, 4, 0, 0)


@pytest.mark.parametrize("q,n,r,want", [(5, 7, 1, 29), (4, 6, 0, 1), (2, 5, 5, 32)])
def test_sphere_size(q, n, r, want):
    assert sphere_size(q, n, r) == want


def test_sphere_size_matches_enumeration():
    for q, n in [(2, 5), (3, 3), (4, 3)]:
        ws = words(q, n)
        for r in range(n + 1):
            assert sphere_size(q, n, r) == sum(distance(w, ws[0]) <= r for w in ws)


@pytest.mark.parametrize("q,n,r,want", [(5, 7, 1, 2694), (4, 7, 1, 745), (3, 13, 1, 59049)])
def test_sphere_covering_bound(q, n, r, want):
    assert sphere_covering_bound(q, n, r) == want
    assert want == math.ceil(Fraction(q**n, sphere_size(q, n, r)))


def test_sphere_size_domain():
    with pytest.raises(ValueError):
        sphere_size(3, 4, 5)


def _dense_distance_matrix(q, n, x):
    """sum_i x_i A_i / |S_i|, the matrix whose eigenvalues are sum_i x_i K_j(i) / |S_j|."""
    ws = words(q, n)
    d = np.array([[distance(u, v) for v in ws] for u in ws])
    w = np.array([x[i] / shell_size(q, n, i) for i in range(n + 1)])
    return w[d]


def test_distance_vector_psd_examples():
    assert distance_vector_psd(3, 4, [1, 0, 0, 0, 0])
    assert distance_vector_psd(3, 4, [1] * 5)


def test_distance_vector_psd_boundary_example():
    # all Krawtchouk sums are >= 0 (one is exactly 0), so the vector is accepted
    x = [1, -1, 1]
    assert [sum(x[i] * krawtchouk(2, 2, j, i) for i in range(3)) for j in range(3)] == [1, 0, 3]
    assert distance_vector_psd(2, 2, x)
    assert np.linalg.eigvalsh(_dense_distance_matrix(2, 2, x))[0] > -1e-12


def test_distance_vector_psd_matches_dense():
    rng = np.random.default_rng(7)
    seen = {True: 0, False: 0}
    for q, n in [(2, 3), (2, 4), (3, 2), (3, 3), (3, 4)]:
        for _ in range(20):
            x = np.concatenate([[1.0], rng.uniform(-0.3, 1.0, n)]) * rng.uniform(0.5, 2.0)
            lam = np.linalg.eigvalsh(_dense_distance_matrix(q, n, x))[0]
            if abs(lam) < 1e-9:
                continue
            got = distance_vector_psd(q, n, x)
            assert got == (lam > 0)
            seen[got] += 1
    assert seen[True] > 5 and seen[False] > 5


def test_distance_vector_psd_length():
    with pytest.raises(ValueError):
        distance_vector_psd(2, 3, [1, 0])
