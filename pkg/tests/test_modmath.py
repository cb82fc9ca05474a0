import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edcplab.errors import Inconsistent, NonCoprimeModuli, PrimeBoundExceeded, Underdetermined
from edcplab.modmath import (
    Modulus,
    RootOfUnity,
    ZqVector,
    centered,
    crt_reconstruct,
    discrete_gaussian_pmf,
    factorize,
    gaussian_support,
    is_prime,
    order_mod,
    solve_linear_mod,
    vector_order,
    wrapped_gaussian_pmf,
)


def brute_solutions(equations, n, q):
    return [
        s for s in itertools.product(range(q), repeat=n)
        if all(sum(a * b for a, b in zip(y, s)) % q == v % q for y, v in equations)
    ]


# ---------------------------------------------------------------- factorization


@pytest.mark.parametrize("q, want", [(36, [(2, 2), (3, 2)]), (8, [(2, 3)]), (97, [(97, 1)])])
def test_factorize_examples(q, want):
    assert factorize(q) == want


@given(st.integers(2, 10**6))
def test_factorize_reconstructs(q):
    fac = factorize(q)
    assert math.prod(p**e for p, e in fac) == q
    assert [p for p, _ in fac] == sorted({p for p, _ in fac})
    assert all(is_prime(p) for p, _ in fac)


def test_factorize_prime_bound():
    with pytest.raises(PrimeBoundExceeded):
        factorize(2 * 1009, prime_bound=1000)


def test_modulus_fields():
    mod = Modulus.of(72)
    assert mod.primes == [2, 3]
    assert mod.prime_powers == [8, 9]
    assert int(mod) == 72


# ---------------------------------------------------------------- vectors and roots


def test_zqvector_reduces_and_operates():
    a = ZqVector(5, (7, -1))
    assert a.coords == (2, 4)
    b = ZqVector(5, (1, 1))
    assert (a + b).coords == (3, 0)
    assert (a - b).coords == (1, 3)
    assert (-a).coords == (3, 1)
    assert a.scale(3).coords == (1, 2)
    assert a.dot([1, 2]) == (2 + 8) % 5


def test_zqvector_rejects_mixed_moduli():
    with pytest.raises(ValueError):
        ZqVector(5, (1,)) + ZqVector(7, (1,))


@given(st.integers(1, 60), st.integers(-200, 200), st.integers(-200, 200))
def test_root_of_unity_multiplication(m, a, b):
    prod = RootOfUnity(m, a) * RootOfUnity(m, b)
    assert abs(prod.evaluate() - RootOfUnity(m, a + b).evaluate()) < 1e-12
    assert abs(abs(RootOfUnity(m, a).evaluate()) - 1) < 1e-12


def test_root_of_unity_mixed_moduli_and_canonical():
    prod = RootOfUnity(4, 1) * RootOfUnity(6, 1)
    assert abs(prod.evaluate() - np.exp(2j * np.pi * (1 / 4 + 1 / 6))) < 1e-12
    assert RootOfUnity(12, 8).canonical() == RootOfUnity(3, 2)
    assert RootOfUnity(5, 0).canonical() == RootOfUnity(1, 0)


def test_orders_and_centering():
    assert order_mod(6, 8) == 4
    assert order_mod(0, 8) == 1
    assert vector_order([2, 3], 12) == 12
    assert vector_order([4, 6], 12) == 6
    assert [centered(v, 5) for v in range(5)] == [0, 1, 2, -2, -1]


# ---------------------------------------------------------------- CRT


@pytest.mark.parametrize("residues, modulus, want", [
    ([(4, [3]), (9, [7])], 36, 7),
    ([(2, [1]), (3, [2])], 6, 5),
    ([(11, [4])], 11, 4),
])
def test_crt_examples_match_exhaustive_search(residues, modulus, want):
    out = crt_reconstruct(residues)
    assert out.q == modulus and out.coords == (want,)
    brute = [x for x in range(modulus) if all(x % m == v[0] for m, v in residues)]
    assert brute == [want]


def test_crt_rejects_shared_factors():
    with pytest.raises(NonCoprimeModuli):
        crt_reconstruct([(4, [1]), (6, [1])])


@settings(max_examples=200)
@given(st.data())
def test_crt_reproduces_each_residue(data):
    k = data.draw(st.integers(1, 3))
    primes = data.draw(st.lists(st.sampled_from([2, 3, 5, 7, 11, 13, 17, 19, 23]), min_size=k, max_size=k, unique=True))
    moduli = [p ** data.draw(st.integers(1, 3)) for p in primes]
    if math.prod(moduli) > 10**6:
        moduli = moduli[:1]
    n = data.draw(st.integers(1, 3))
    residues = [(m, [data.draw(st.integers(0, m - 1)) for _ in range(n)]) for m in moduli]
    out = crt_reconstruct(residues)
    for m, v in residues:
        assert [c % m for c in out.coords] == v


# ---------------------------------------------------------------- linear systems


def test_solve_examples():
    assert solve_linear_mod([([1], 3)], 4).coords == (3,)
    with pytest.raises(Underdetermined):
        solve_linear_mod([([2], 2)], 4)
    rng = np.random.default_rng(0)
    s = (2, 3)
    eqs = []
    for _ in range(4):
        y = [int(c) for c in rng.integers(0, 5, 2)]
        eqs.append((y, (y[0] * s[0] + y[1] * s[1]) % 5))
    assert brute_solutions(eqs, 2, 5) == [s]
    assert solve_linear_mod(eqs, 5).coords == s


def test_solve_inconsistent():
    with pytest.raises(Inconsistent):
        solve_linear_mod([([2], 1)], 4)
    with pytest.raises(Inconsistent):
        solve_linear_mod([([1], 1), ([1], 2)], 6)


def test_solve_matches_exhaustive_search():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 3))
        q = int(rng.integers(2, 10))
        s = [int(c) for c in rng.integers(0, q, n)]
        eqs = []
        for _ in range(int(rng.integers(1, 5))):
            y = [int(c) for c in rng.integers(0, q, n)]
            eqs.append((y, sum(a * b for a, b in zip(y, s)) % q))
        if rng.random() < 0.2:
            y, v = eqs[0]
            eqs[0] = (y, (v + 1) % q)
        sols = brute_solutions(eqs, n, q)
        if not sols:
            with pytest.raises(Inconsistent):
                solve_linear_mod(eqs, q)
        elif len(sols) > 1:
            with pytest.raises(Underdetermined):
                solve_linear_mod(eqs, q)
        else:
            assert solve_linear_mod(eqs, q).coords == sols[0]


# ---------------------------------------------------------------- Gaussians


@given(st.floats(0.3, 20), st.integers(-50, 50))
def test_gaussian_peak_and_symmetry(sigma, x):
    assert discrete_gaussian_pmf(sigma, x) == discrete_gaussian_pmf(sigma, -x)
    assert discrete_gaussian_pmf(sigma, 0) >= discrete_gaussian_pmf(sigma, x)


@pytest.mark.parametrize("sigma, kappa", [(2.0, 100.0), (0.7, 40.0), (9.0, 40.0)])
def test_gaussian_sums_to_one(sigma, kappa):
    total = math.fsum(discrete_gaussian_pmf(sigma, x, kappa) for x in gaussian_support(sigma, kappa))
    assert abs(total - 1) < 1e-12


def test_gaussian_zero_outside_support():
    sup = gaussian_support(2.0, 4.0)
    assert discrete_gaussian_pmf(2.0, sup.stop, 4.0) == 0.0


def test_wrapped_gaussian_folds_the_line():
    sigma, q = 3.0, 7
    wrapped = wrapped_gaussian_pmf(sigma, q)
    assert abs(sum(wrapped) - 1) < 1e-12
    for k in range(q):
        direct = math.fsum(discrete_gaussian_pmf(sigma, x) for x in gaussian_support(sigma) if x % q == k)
        assert abs(wrapped[k] - direct) < 1e-12
