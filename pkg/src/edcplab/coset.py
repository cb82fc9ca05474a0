"""Symbolic coset states and the secret-holding challenger.

A :class:`CosetState` stands for the pure state

    (1/sqrt m) sum_{i<m} w_M^{alpha j} |j> |x + j s'>,   j = c0 + d i,

where s' = s + shift is the challenger's secret adjusted by any public
multiply-add operations applied so far. Every structured state the
reductions, the cryptosystem and the attacks need is of this form, so all
operations are exact and cost O(n) regardless of r and q.

The phase is stored as a slope per unit of j (not per unit of i); the
intercept is always a global phase and is dropped.

States are single-use: every operation consumes its input and returns a new
state, so the only way to get another copy is a fresh challenger sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadParams, IncompatiblePhaseModulus, StateAlreadyConsumed
from .modmath import DEFAULT_PRIME_BOUND, Modulus, ZqVector, vector_order
from .statevec import IndexSpace, StateVector


@dataclass(frozen=True)
class EdcpParams:
    """Problem parameters: dimension n, modulus q, superposition length r, prime p | q.

    r = 1 is accepted (it is the degenerate case of the information bounds);
    everything that needs a real superposition checks r >= 2 itself.
    """

    n: int
    q: int
    r: int
    p: int
    prime_bound: int = DEFAULT_PRIME_BOUND
    modulus: Modulus = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise BadParams(f"n must be >= 1, got {self.n}")
        if self.q < 2:
            raise BadParams(f"q must be >= 2, got {self.q}")
        if not 1 <= self.r <= self.q:
            raise BadParams(f"need 1 <= r <= q, got r={self.r}, q={self.q}")
        mod = Modulus.of(self.q, self.prime_bound)
        if self.p not in mod.primes:
            raise BadParams(f"p={self.p} is not a prime divisor of q={self.q}")
        object.__setattr__(self, "modulus", mod)

    @classmethod
    def make(cls, n: int, q: int, r: int, p: int | None = None) -> "EdcpParams":
        """Build params, defaulting p to the smallest prime factor of q."""
        if p is None:
            p = Modulus.of(q).primes[0]
        return cls(n, q, r, p)

    def exponent(self, p: int | None = None) -> int:
        p = self.p if p is None else p
        return dict(self.modulus.factors).get(p, 0)

    @property
    def dense_dim(self) -> int:
        return self.r * self.q**self.n


@dataclass(frozen=True)
class HybridLevel:
    """The residue c = j mod p^k fixed by a measurement."""

    p: int
    k: int
    c: int

    def __post_init__(self):
        if self.k < 0 or not 0 <= self.c < self.p**self.k:
            raise ValueError(f"bad hybrid level k={self.k}, c={self.c}")


class Challenger:
    """Holds the hidden secret and issues fresh samples.

    Adversary-facing code only ever receives CosetStates; the secret is
    reachable through :meth:`reveal`, which exists for verification.
    """

    def __init__(self, params: EdcpParams, rng: np.random.Generator, secret: Sequence[int] | None = None):
        self.params = params
        self._rng = rng
        if secret is None:
            self._secret = ZqVector.random(params.n, params.q, rng)
        else:
            self._secret = ZqVector(params.q, tuple(secret))
            if self._secret.n != params.n:
                raise BadParams(f"secret has dimension {self._secret.n}, expected {params.n}")
        self.samples_issued = 0

    @classmethod
    def from_seed(cls, params: EdcpParams, seed: int, secret: Sequence[int] | None = None) -> "Challenger":
        return cls(params, np.random.default_rng(seed), secret)

    def reveal(self) -> ZqVector:
        """The hidden secret. Simulation-only: used to check answers."""
        return self._secret

    def sample(self, t: int | None = None) -> "CosetState":
        return sample(self, t)

    def __repr__(self) -> str:
        return f"Challenger({self.params!r}, issued={self.samples_issued})"


@dataclass(eq=False)
class CosetState:
    params: EdcpParams
    size: int
    offset: ZqVector
    shift: tuple[int, ...]
    stride: int
    base: int
    count: int
    phase_mod: int = 1
    phase_slope: int = 0
    level: HybridLevel | None = None
    _challenger: Challenger | None = field(default=None, repr=False)
    _live: bool = field(default=True, repr=False)

    @property
    def support(self) -> tuple[int, int, int]:
        return (self.stride, self.base, self.count)

    @property
    def phase(self) -> tuple[int, int]:
        return (self.phase_mod, self.phase_slope)

    @property
    def consumed(self) -> bool:
        return not self._live

    def js(self) -> np.ndarray:
        return self.base + self.stride * np.arange(self.count)

    def phase_is_trivial(self) -> bool:
        """True when the phase is constant on the support (a global phase)."""
        return self.count == 1 or (self.phase_slope * self.stride) % self.phase_mod == 0

    def describe(self) -> dict:
        """Public description, excluding the challenger handle."""
        return {
            "size": self.size,
            "offset": self.offset.to_list(),
            "shift": list(self.shift),
            "support": list(self.support),
            "phase": list(self.phase),
            "level": None if self.level is None else [self.level.p, self.level.k, self.level.c],
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, CosetState):
            return NotImplemented
        return self.params == other.params and self.describe() == other.describe()


@dataclass(eq=False)
class RegisterState:
    """The first register on its own, after the second one has been measured.

    Amplitudes (1/sqrt m) w_M^{alpha j} on j = c0 + d i, i < m.
    """

    size: int
    stride: int
    base: int
    count: int
    phase_mod: int = 1
    phase_slope: int = 0
    _live: bool = field(default=True, repr=False)

    def js(self) -> np.ndarray:
        return self.base + self.stride * np.arange(self.count)

    def amplitudes(self) -> np.ndarray:
        amps = np.zeros(self.size, dtype=complex)
        j = self.js()
        amps[j] = np.exp(2j * np.pi * ((self.phase_slope * j) % self.phase_mod) / self.phase_mod) / math.sqrt(self.count)
        return amps

    def to_dense(self) -> StateVector:
        return StateVector(IndexSpace((self.size,)), self.amplitudes())

    def phase_is_trivial(self) -> bool:
        return self.count == 1 or (self.phase_slope * self.stride) % self.phase_mod == 0


def _take(state) -> None:
    if not state._live:
        raise StateAlreadyConsumed(f"{type(state).__name__} was already used")
    state._live = False


def _replace(state: CosetState, **changes) -> CosetState:
    fields = dict(
        params=state.params, size=state.size, offset=state.offset, shift=state.shift,
        stride=state.stride, base=state.base, count=state.count,
        phase_mod=state.phase_mod, phase_slope=state.phase_slope, level=state.level,
        _challenger=state._challenger,
    )
    fields.update(changes)
    return CosetState(**fields)


def _secret(state: CosetState) -> tuple[int, ...]:
    """The effective secret s + shift seen by this state."""
    s = state._challenger._secret.coords
    q = state.params.q
    return tuple((a + b) % q for a, b in zip(s, state.shift))


def compose_phase(mod_a: int, slope_a: int, mod_b: int, slope_b: int, cap: int) -> tuple[int, int]:
    """Add two linear phases w_A^{a j} w_B^{b j}; result in lowest terms."""
    m = math.lcm(mod_a, mod_b)
    slope = (slope_a * (m // mod_a) + slope_b * (m // mod_b)) % m
    g = math.gcd(slope, m)
    m, slope = m // g, slope // g
    if m > cap:
        raise IncompatiblePhaseModulus(f"phase modulus {m} exceeds cap {cap}")
    return m, slope


def _phase_cap(params: EdcpParams) -> int:
    return params.q * params.r


def sample(challenger: Challenger, t: int | None = None) -> CosetState:
    """A fresh sample from mu_{s,r}, or from the phased distribution when t is given."""
    params = challenger.params
    if t is not None and not 0 <= t < params.p:
        raise ValueError(f"phase t must lie in [0, {params.p}), got {t}")
    x = ZqVector.random(params.n, params.q, challenger._rng)
    challenger.samples_issued += 1
    mod, slope = compose_phase(1, 0, params.p, t or 0, _phase_cap(params))
    return CosetState(
        params, params.r, x, (0,) * params.n, 1, 0, params.r, mod, slope,
        _challenger=challenger,
    )


def to_dense(state: CosetState | RegisterState) -> StateVector:
    """Dense image of a symbolic state (simulation bridge; uses the secret)."""
    if isinstance(state, RegisterState):
        return state.to_dense()
    params = state.params
    space = IndexSpace((state.size,) + (params.q,) * params.n)
    q = params.q
    s = np.array(_secret(state), dtype=np.int64)
    x = np.array(state.offset.coords, dtype=np.int64)
    amps = np.zeros(space.factors, dtype=complex)
    for j in state.js():
        y = tuple((x + int(j) * s) % q)
        ang = 2 * np.pi * ((state.phase_slope * int(j)) % state.phase_mod) / state.phase_mod
        amps[(int(j),) + y] = np.exp(1j * ang)
    return StateVector.from_tensor(space, amps / math.sqrt(state.count))


# ---------------------------------------------------------------- measurements


def _class_count(count: int, period: int, i0: int) -> int:
    return (count - i0 + period - 1) // period


def _split(state: CosetState, period: int, i0: int, **changes) -> CosetState:
    return _replace(
        state,
        base=state.base + state.stride * i0,
        stride=state.stride * period,
        count=_class_count(state.count, period, i0),
        **changes,
    )


def _affine_setup(state: CosetState, u: int, w: Sequence[int] | None, b: int, modulus: int) -> tuple[int, int, int]:
    """f(j) = u j + <w, x + j s'> + b mod P along the support: (f(c0), step, period)."""
    params = state.params
    q = params.q
    w = tuple(w) if w is not None else (0,) * params.n
    if len(w) != params.n:
        raise ValueError(f"weights have length {len(w)}, expected {params.n}")
    if any((q * wk) % modulus for wk in w):
        raise ValueError(f"<w, y> mod {modulus} is not well defined on Z_{q}")
    s = _secret(state)
    ws = sum(a * c for a, c in zip(w, s))
    f0 = (u * state.base + sum(a * (xk + state.base * sk) for a, xk, sk in zip(w, state.offset.coords, s)) + b) % modulus
    step = state.stride * (u + ws) % modulus
    period = modulus // math.gcd(step, modulus)
    return f0, step, period


def affine_distribution(state: CosetState, u: int, w: Sequence[int] | None, b: int, modulus: int) -> dict[int, float]:
    """Exact outcome distribution of :func:`measure_affine` (does not consume)."""
    f0, step, period = _affine_setup(state, u, w, b, modulus)
    m = state.count
    return {(f0 + i0 * step) % modulus: _class_count(m, period, i0) / m for i0 in range(min(period, m))}


def _pick_class(m: int, period: int, rng, value_of, outcome) -> int:
    if outcome is None:
        return int(rng.integers(m)) % period
    for i0 in range(min(period, m)):
        if value_of(i0) == outcome:
            return i0
    raise ValueError(f"outcome {outcome} has probability zero")


def measure_affine(state: CosetState, u: int, w: Sequence[int] | None, b: int, modulus: int, rng, outcome: int | None = None) -> tuple[int, CosetState]:
    """Compute f(j, y) = u j + <w, y> + b mod P into an ancilla and measure it.

    Requires P | q w_k for every k so the function is well defined on Z_q^n.
    The surviving branch is the sub-progression i = i0 mod period.
    """
    f0, step, period = _affine_setup(state, u, w, b, modulus)
    _take(state)
    i0 = _pick_class(state.count, period, rng, lambda i: (f0 + i * step) % modulus, outcome)
    return (f0 + i0 * step) % modulus, _split(state, period, i0)


def project_j_mod(state: CosetState, p: int, k: int, rng, outcome: int | None = None) -> CosetState:
    """Measure j mod p^k, landing on hybrid level k."""
    c, out = measure_affine(state, 1, None, 0, p**k, rng, outcome)
    out.level = HybridLevel(p, k, c)
    return out


def _second_value(state: CosetState, i0: int) -> tuple[int, ...]:
    j = state.base + state.stride * i0
    q = state.params.q
    return tuple((xk + j * sk) % q for xk, sk in zip(state.offset.coords, _secret(state)))


def second_distribution(state: CosetState) -> dict[tuple[int, ...], float]:
    s = _secret(state)
    period = vector_order([state.stride * c for c in s], state.params.q)
    m = state.count
    return {_second_value(state, i0): _class_count(m, period, i0) / m for i0 in range(min(period, m))}


def measure_second(state: CosetState, rng, outcome: Sequence[int] | None = None) -> tuple[ZqVector, CosetState]:
    """Computational-basis measurement of the second register."""
    s = _secret(state)
    period = vector_order([state.stride * c for c in s], state.params.q)
    _take(state)
    want = None if outcome is None else tuple(int(v) % state.params.q for v in outcome)
    i0 = _pick_class(state.count, period, rng, lambda i: _second_value(state, i), want)
    y = ZqVector(state.params.q, _second_value(state, i0))
    return y, _split(state, period, i0)


def discard_second(state: CosetState, rng, outcome: Sequence[int] | None = None) -> tuple[ZqVector, RegisterState]:
    """Measure the second register and keep only the first."""
    y, rest = measure_second(state, rng, outcome)
    return y, RegisterState(rest.size, rest.stride, rest.base, rest.count, rest.phase_mod, rest.phase_slope)


def fourier_measure_second(state: CosetState, rng, outcome: Sequence[int] | None = None) -> tuple[ZqVector, RegisterState]:
    """Apply QFT_{q^n} to the second register and measure it.

    The outcome u is uniform over Z_q^n and the first register picks up the
    phase w_q^{j <u, s'>}.
    """
    params = state.params
    _take(state)
    if outcome is None:
        u = ZqVector.random(params.n, params.q, rng)
    else:
        u = ZqVector(params.q, tuple(outcome))
    slope = sum(a * b for a, b in zip(u.coords, _secret(state)))
    mod, slope = compose_phase(state.phase_mod, state.phase_slope, params.q, slope, _phase_cap(params))
    return u, RegisterState(state.size, state.stride, state.base, state.count, mod, slope)


def full_distribution(state: CosetState) -> dict[tuple[int, tuple[int, ...]], float]:
    return {(state.base + state.stride * i, _second_value(state, i)): 1 / state.count for i in range(state.count)}


def measure_full(state: CosetState, rng, outcome: int | None = None) -> tuple[int, ZqVector]:
    """Measure both registers: j uniform on the support, then x + j s'."""
    _take(state)
    if outcome is None:
        i = int(rng.integers(state.count))
    else:
        i, rem = divmod(outcome - state.base, state.stride)
        if rem or not 0 <= i < state.count:
            raise ValueError(f"j={outcome} is not in the support")
    return state.base + state.stride * i, ZqVector(state.params.q, _second_value(state, i))


# ---------------------------------------------------------------- unitaries


def adversary_phase(state: CosetState, modulus: int, slope: int, intercept: int = 0, weights: Sequence[int] | None = None) -> CosetState:
    """Apply |j>|y> -> w_M^{a j + <w, y> + b} |j>|y>.

    On the coset support <w, y> = <w, x> + j <w, s'>, so the result is again a
    linear phase in j; the challenger supplies <w, s'> without revealing it.
    ``intercept`` and <w, x> only contribute a global phase.
    """
    params = state.params
    q = params.q
    induced = slope
    if weights is not None:
        if len(weights) != params.n:
            raise ValueError(f"weights have length {len(weights)}, expected {params.n}")
        if any((q * wk) % modulus for wk in weights):
            raise ValueError(f"<w, y> mod {modulus} is not well defined on Z_{q}")
        induced += sum(a * c for a, c in zip(weights, _secret(state)))
    mod, new_slope = compose_phase(state.phase_mod, state.phase_slope, modulus, induced % modulus, _phase_cap(params))
    _take(state)
    return _replace(state, phase_mod=mod, phase_slope=new_slope)


def apply_multiply_add(state: CosetState, v: Sequence[int] | ZqVector, sign: int = 1) -> CosetState:
    """|j>|y> -> |j>|y + sign j v>; sign=-1 is the secret-removal map S_v."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    q = state.params.q
    v = tuple(v)
    if len(v) != state.params.n:
        raise ValueError(f"vector has length {len(v)}, expected {state.params.n}")
    _take(state)
    return _replace(state, shift=tuple((a + sign * b) % q for a, b in zip(state.shift, v)))


# ---------------------------------------------------------------- self-reduction


def reduce_r_distribution(state: CosetState, target: int) -> dict[int, float]:
    """Outcome distribution of the reduce_r measurement.

    Keys are the block index a (block branch) or 1/0 for in/out of [0, r')
    (indicator branch). Empty when r' = r, since nothing is measured.
    """
    r = state.size
    if target == r:
        return {}
    if 2 * target > r:
        return {1: target / r, 0: 1 - target / r}
    return {a: (min(r, (a + 1) * target) - a * target) / r for a in range(-(-r // target))}


def reduce_r_detailed(state: CosetState, target: int, rng, outcome: int | None = None) -> tuple[bool, CosetState | None, int | None]:
    """reduce_r that also reports the measured value (see reduce_r_distribution)."""
    r = state.size
    if not 1 <= target <= r:
        raise ValueError(f"target {target} must lie in [1, {r}]")
    if state.stride != 1 or state.base != 0 or state.count != r:
        raise ValueError("reduce_r needs a state with full support")
    _take(state)
    if target == r:
        return True, _replace(state), None
    if outcome is None:
        j = int(rng.integers(r))
    if 2 * target > r:
        hit = int(j < target) if outcome is None else int(outcome)
        if not hit:
            return False, None, 0
        return True, _replace(state, size=target, count=target), 1
    a = j // target if outcome is None else int(outcome)
    if a >= r // target:
        return False, None, a
    q = state.params.q
    shift = a * target
    s = _secret(state)
    offset = ZqVector(q, tuple(xk + shift * sk for xk, sk in zip(state.offset.coords, s)))
    return True, _replace(state, size=target, count=target, offset=offset), a


def reduce_r(state: CosetState, target: int, rng) -> tuple[bool, CosetState | None]:
    """Turn a mu_{s,r} sample into a mu_{s,r'} sample, or fail.

    For r' > r/2 this projects onto j < r'; otherwise it measures the block
    a = floor(j / r') and succeeds when the block is complete, subtracting a r'
    from j. Either way the success probability is at least 1/2.
    """
    ok, out, _ = reduce_r_detailed(state, target, rng)
    return ok, out


def reduce_r_retry(challenger: Challenger, target: int, rng, t: int | None = None, max_attempts: int = 10_000) -> tuple[CosetState, int]:
    """Draw fresh samples until reduce_r succeeds; returns (state, samples used)."""
    for attempt in range(1, max_attempts + 1):
        ok, out = reduce_r(sample(challenger, t), target, rng)
        if ok:
            return out, attempt
    raise RuntimeError(f"reduce_r failed {max_attempts} times in a row")


def register_fourier_distribution(state: RegisterState, direction: str = "inverse") -> np.ndarray:
    """Outcome probabilities of a QFT_size (or its inverse) followed by measurement."""
    amps = state.amplitudes()
    out = np.fft.fft(amps, norm="ortho") if direction == "inverse" else np.fft.ifft(amps, norm="ortho")
    probs = np.abs(out) ** 2
    probs[probs < 1e-14] = 0.0
    return probs / probs.sum()


def register_fourier_measure(state: RegisterState, rng, direction: str = "inverse", outcome: int | None = None) -> int:
    _take(state)
    if outcome is not None:
        return int(outcome)
    probs = register_fourier_distribution(state, direction)
    return int(rng.choice(state.size, p=probs))


def register_measure(state: RegisterState, rng) -> int:
    _take(state)
    return int(state.base + state.stride * rng.integers(state.count))
