"""Exact arithmetic over Z_q and Z_q^n.

Factorization, CRT, linear systems modulo composite q, truncated discrete
Gaussians and roots of unity. Everything here is a pure function over
immutable values.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

from .errors import Inconsistent, NonCoprimeModuli, PrimeBoundExceeded, Underdetermined

#: Largest prime factor accepted by :func:`factorize` unless overridden.
DEFAULT_PRIME_BOUND = 2**20

#: Default Gaussian truncation parameter: support is |x| <= sqrt(kappa) * sigma.
DEFAULT_KAPPA = 40.0


def factorize(q: int, prime_bound: int = DEFAULT_PRIME_BOUND) -> list[tuple[int, int]]:
    """Return the sorted prime factorization ``[(p, e), ...]`` of ``q``.

    Raises PrimeBoundExceeded as soon as a prime factor above ``prime_bound``
    is found.
    """
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    out = []
    rest = q
    p = 2
    while p * p <= rest:
        if rest % p == 0:
            if p > prime_bound:
                raise PrimeBoundExceeded(f"prime factor {p} of {q} exceeds bound {prime_bound}")
            e = 0
            while rest % p == 0:
                rest //= p
                e += 1
            out.append((p, e))
        p += 1 if p == 2 else 2
    if rest > 1:
        if rest > prime_bound:
            raise PrimeBoundExceeded(f"prime factor {rest} of {q} exceeds bound {prime_bound}")
        out.append((rest, 1))
    return out


def is_prime(n: int) -> bool:
    return n >= 2 and factorize(n, prime_bound=n) == [(n, 1)]


@dataclass(frozen=True)
class Modulus:
    """A modulus q together with its prime factorization."""

    value: int
    factors: tuple[tuple[int, int], ...]

    @classmethod
    def of(cls, q: int, prime_bound: int = DEFAULT_PRIME_BOUND) -> "Modulus":
        return cls(q, tuple(factorize(q, prime_bound)))

    def __post_init__(self):
        if math.prod(p**e for p, e in self.factors) != self.value:
            raise ValueError(f"factors {self.factors} do not multiply to {self.value}")
        primes = [p for p, _ in self.factors]
        if primes != sorted(set(primes)):
            raise ValueError("prime factors must be strictly increasing")

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]

    @property
    def prime_powers(self) -> list[int]:
        return [p**e for p, e in self.factors]

    def __int__(self) -> int:
        return self.value


@dataclass(frozen=True)
class ZqVector:
    """An element of Z_q^n; coordinates are always reduced into [0, q)."""

    q: int
    coords: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) % self.q for c in self.coords))

    @classmethod
    def zeros(cls, n: int, q: int) -> "ZqVector":
        return cls(q, (0,) * n)

    @classmethod
    def random(cls, n: int, q: int, rng) -> "ZqVector":
        return cls(q, tuple(int(v) for v in rng.integers(0, q, size=n)))

    @property
    def n(self) -> int:
        return len(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def _check(self, other: "ZqVector"):
        if other.q != self.q or other.n != self.n:
            raise ValueError("ZqVector shape/modulus mismatch")

    def __add__(self, other: "ZqVector") -> "ZqVector":
        self._check(other)
        return ZqVector(self.q, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "ZqVector") -> "ZqVector":
        self._check(other)
        return ZqVector(self.q, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "ZqVector":
        return ZqVector(self.q, tuple(-a for a in self.coords))

    def scale(self, k: int) -> "ZqVector":
        return ZqVector(self.q, tuple(k * a for a in self.coords))

    def dot(self, other: Sequence[int]) -> int:
        return sum(a * int(b) for a, b in zip(self.coords, other)) % self.q

    def reduce(self, m: int) -> "ZqVector":
        """Reduce modulo a divisor ``m`` of q."""
        if self.q % m:
            raise ValueError(f"{m} does not divide {self.q}")
        return ZqVector(m, self.coords)

    def to_list(self) -> list[int]:
        return list(self.coords)


@dataclass(frozen=True)
class RootOfUnity:
    """exp(2 pi i k / M), kept exact as the pair (M, k mod M)."""

    modulus: int
    k: int

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be positive")
        object.__setattr__(self, "k", self.k % self.modulus)

    def evaluate(self) -> complex:
        return cmath.exp(2j * math.pi * self.k / self.modulus)

    def __mul__(self, other: "RootOfUnity") -> "RootOfUnity":
        m = math.lcm(self.modulus, other.modulus)
        return RootOfUnity(m, self.k * (m // self.modulus) + other.k * (m // other.modulus))

    def canonical(self) -> "RootOfUnity":
        """Lowest-terms form; the trivial root becomes (1, 0)."""
        g = math.gcd(self.k, self.modulus)
        return RootOfUnity(self.modulus // g, self.k // g)


def crt_reconstruct(residues: Sequence[tuple[int, ZqVector | Sequence[int]]]) -> ZqVector:
    """Combine ``[(m_i, v_i), ...]`` into the unique vector mod prod(m_i)."""
    if not residues:
        raise ValueError("need at least one residue")
    moduli = [int(m) for m, _ in residues]
    for i, a in enumerate(moduli):
        for b in moduli[i + 1:]:
            if math.gcd(a, b) != 1:
                raise NonCoprimeModuli(f"moduli {a} and {b} share a factor")
    vecs = [tuple(v.coords) if isinstance(v, ZqVector) else tuple(int(c) for c in v) for _, v in residues]
    n = len(vecs[0])
    if any(len(v) != n for v in vecs):
        raise ValueError("residue vectors differ in dimension")
    big = math.prod(moduli)
    out = [0] * n
    for m, v in zip(moduli, vecs):
        rest = big // m
        coeff = rest * pow(rest, -1, m) if m > 1 else 0
        for k in range(n):
            out[k] += v[k] * coeff
    return ZqVector(big, tuple(out))


def _valuation(x: int, p: int, cap: int) -> int:
    if x == 0:
        return cap
    v = 0
    while x % p == 0 and v < cap:
        x //= p
        v += 1
    return v


def _solve_prime_power(rows: list[list[int]], rhs: list[int], p: int, e: int) -> list[int]:
    """Unique solution of ``rows @ s = rhs`` over Z_{p^e}.

    Elimination picks, at every step, the remaining entry of smallest p-adic
    valuation (a unit whenever one exists), so every other entry of the
    active block is a multiple of the pivot's p-power part.
    """
    mod = p**e
    a = [[c % mod for c in row] for row in rows]
    b = [v % mod for v in rhs]
    n = len(a[0]) if a else 0
    cols = list(range(n))
    pivots = []  # (row, column, valuation)
    top = 0
    for step in range(n):
        best = None
        for i in range(top, len(a)):
            for jj in range(step, n):
                v = _valuation(a[i][cols[jj]], p, e)
                if v < e and (best is None or v < best[0]):
                    best = (v, i, jj)
                    if v == 0:
                        break
            if best is not None and best[0] == 0:
                break
        if best is None:
            break
        v, i, jj = best
        a[top], a[i] = a[i], a[top]
        b[top], b[i] = b[i], b[top]
        cols[step], cols[jj] = cols[jj], cols[step]
        col = cols[step]
        unit_part = a[top][col] // p**v
        inv = pow(unit_part, -1, mod)
        for i2 in range(top + 1, len(a)):
            entry = a[i2][col]
            if entry == 0:
                continue
            factor = (entry // p**v) * inv % mod
            a[i2] = [(x - factor * y) % mod for x, y in zip(a[i2], a[top])]
            b[i2] = (b[i2] - factor * b[top]) % mod
        pivots.append((top, col, v))
        top += 1
    for i in range(top, len(a)):
        if b[i] % mod:
            raise Inconsistent(f"zero row with nonzero value mod {mod}")
    for row, _, v in pivots:
        if b[row] % p**v:
            raise Inconsistent(f"pivot p^{v} does not divide value mod {mod}")
    if len(pivots) < n or any(v > 0 for _, _, v in pivots):
        raise Underdetermined(f"system does not determine s mod {mod}")
    s = [0] * n
    for row, col, _ in reversed(pivots):
        acc = b[row] - sum(a[row][c] * s[c] for c in range(n) if c != col)
        s[col] = acc * pow(a[row][col], -1, mod) % mod
    return s


def solve_linear_mod(equations: Iterable[tuple[ZqVector | Sequence[int], int]], q: Modulus | int) -> ZqVector:
    """Solve ``<y_i, s> = v_i (mod q)`` for the unique s in Z_q^n.

    Each prime-power factor is eliminated separately and the pieces are
    recombined by CRT. Raises Underdetermined if s is not pinned down and
    Inconsistent if no s fits.
    """
    mod = q if isinstance(q, Modulus) else Modulus.of(int(q))
    eqs = [(tuple(int(c) for c in y), int(v)) for y, v in equations]
    if not eqs:
        raise Underdetermined("no equations")
    n = len(eqs[0][0])
    if any(len(y) != n for y, _ in eqs):
        raise ValueError("equations differ in dimension")
    rows = [list(y) for y, _ in eqs]
    rhs = [v for _, v in eqs]
    parts = []
    # Check every prime first so Inconsistent wins over Underdetermined.
    errors = []
    for p, e in mod.factors:
        try:
            parts.append((p**e, _solve_prime_power(rows, rhs, p, e)))
        except Inconsistent:
            raise
        except Underdetermined as exc:
            errors.append(exc)
    if errors:
        raise errors[0]
    return crt_reconstruct(parts)


def gaussian_weight(x: float, sigma: float) -> float:
    """g_sigma(x) = exp(-pi x^2 / sigma^2)."""
    return math.exp(-math.pi * x * x / (sigma * sigma))


def gaussian_support(sigma: float, kappa: float = DEFAULT_KAPPA) -> range:
    bound = math.floor(math.sqrt(kappa) * sigma)
    return range(-bound, bound + 1)


def discrete_gaussian_pmf(sigma: float, x: int, kappa: float = DEFAULT_KAPPA) -> float:
    """Truncated discrete Gaussian pmf with parameter ``sigma``.

    Normalized over Z intersected with [-sqrt(kappa) sigma, sqrt(kappa) sigma];
    zero outside that window.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    support = gaussian_support(sigma, kappa)
    if x not in support:
        return 0.0
    total = math.fsum(gaussian_weight(k, sigma) for k in support)
    return gaussian_weight(x, sigma) / total


def wrapped_gaussian_pmf(sigma: float, q: int, kappa: float = DEFAULT_KAPPA) -> list[float]:
    """The truncated discrete Gaussian folded onto Z_q, indexed by residue."""
    support = gaussian_support(sigma, kappa)
    total = math.fsum(gaussian_weight(k, sigma) for k in support)
    out = [0.0] * q
    for k in support:
        out[k % q] += gaussian_weight(k, sigma) / total
    return out


def centered(v: int, q: int) -> int:
    """Representative of v mod q in (-q/2, q/2]."""
    v %= q
    return v - q if v > q // 2 else v


def order_mod(v: int, q: int) -> int:
    """Additive order of v in Z_q."""
    return q // math.gcd(v % q, q)


def vector_order(v: Sequence[int], q: int) -> int:
    """Additive order of a vector in Z_q^n (lcm of coordinate orders)."""
    return reduce(math.lcm, (order_mod(c, q) for c in v), 1)
