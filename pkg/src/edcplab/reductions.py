"""Search-to-decision reductions, the shifted-LWE extractor and amplification.

Two reductions recover the challenger's secret from a decision oracle:

* :func:`search_via_hybrid` walks the hybrid levels mu^k (j mod p^k measured)
  and tests base-p digits with the measurement y_i - j s~ - j p^{k-1} a.
* :func:`search_via_phase` tests digits by multiplying in
  w_{p^{k+1}}^{(y_i - j s~ - j p^k a) c} and asking whether a phase appeared.

Oracles return 1 for "looks like a plain mu_{s,r} sample".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import coset
from .coset import Challenger, CosetState, EdcpParams
from .errors import (
    LevelOverflow,
    NoGapFound,
    ReductionFailed,
    SampleBudgetExhausted,
    Underdetermined,
)
from .modmath import ZqVector, crt_reconstruct, gaussian_weight, is_prime, solve_linear_mod


# ---------------------------------------------------------------- oracles


@dataclass
class DecisionOracle:
    """A decision procedure on single samples, with a query counter.

    ``advantage`` is the promised gap between the acceptance rates of the two
    distributions it separates; the reductions size their sample counts by it.
    """

    kind: str
    decide: Callable[[CosetState, np.random.Generator], int]
    advantage: float = 1.0
    budget: int | None = None
    queries: int = 0

    def __call__(self, state: CosetState, rng) -> int:
        if self.budget is not None and self.queries >= self.budget:
            raise SampleBudgetExhausted(f"oracle budget of {self.budget} queries used up")
        self.queries += 1
        return int(self.decide(state, rng))


def _count_decider(state: CosetState, rng) -> int:
    coset._take(state)
    return int(state.count >= 2)


def _phase_decider(state: CosetState, rng) -> int:
    coset._take(state)
    return int(state.phase_is_trivial())


def perfect_coset_oracle(budget: int | None = None) -> DecisionOracle:
    """Separates mu_{s,r'} (a genuine superposition) from gamma (a single |j>|x>).

    Reads the support size off the symbolic description.
    """
    return DecisionOracle("perfect", _count_decider, 1.0, budget)


def perfect_phase_oracle(budget: int | None = None) -> DecisionOracle:
    """Separates mu_{s,r} from the phased distributions mu_{s,r,p}."""
    return DecisionOracle("perfect", _phase_decider, 1.0, budget)


def statistical_coset_oracle(params: EdcpParams, budget: int | None = None) -> DecisionOracle:
    """A measurement-only distinguisher for mu_{s,r'} against gamma.

    QFT the second register; if u = 0 the first register is a uniform
    superposition for mu and a basis state for gamma, so an inverse QFT
    followed by "outcome is 0" separates them. Other u give a coin flip.
    Its acceptance gap q^{-n} (1 - 1/r) is tiny, so it is only useful at desk
    sizes. ``advantage`` stores half the gap, the margin on each side of the
    midpoint.
    """

    def decide(state: CosetState, rng) -> int:
        u, reg = coset.fourier_measure_second(state, rng)
        if any(u.coords):
            coset._take(reg)
            return int(rng.random() < 0.5)
        return int(coset.register_fourier_measure(reg, rng, "inverse") == 0)

    adv = (1 - 1 / params.r) / params.q**params.n / 2
    return DecisionOracle("statistical", decide, adv, budget)


def amplify(base: Callable[[object], int], p_n: float, n: int, source: Callable[[], object], threshold: float = 0.5, budget: int | None = None) -> bool:
    """Majority vote over m = 2 n p_n^2 independent runs of ``base``.

    Returns True when the mean output exceeds ``threshold``. With advantage
    at least 1/p_n around the threshold the verdict is wrong with
    probability at most e^{-n} by Hoeffding.
    """
    m = math.ceil(2 * n * p_n**2)
    if budget is not None and m > budget:
        raise SampleBudgetExhausted(f"need {m} samples, budget is {budget}")
    hits = sum(int(base(source())) for _ in range(m))
    return hits / m > threshold


def amplification_count(gap: float, confidence: float) -> int:
    """Samples for a midpoint test to err with probability <= e^{-confidence}."""
    return math.ceil(2 * confidence / gap**2)


# ---------------------------------------------------------------- hybrid reduction


def choose_r_prime(params: EdcpParams) -> int:
    """Largest r' <= r with r'^k <= r and r' <= p_i^{e_i} for every i.

    k counts the prime factors of q below r.
    """
    k = sum(1 for p in params.modulus.primes if p < params.r)
    cap = min([params.r] + params.modulus.prime_powers)
    for rp in range(cap, 0, -1):
        if rp**k <= params.r:
            return rp
    return 1


def check_r_prime(params: EdcpParams, rp: int) -> None:
    k = sum(1 for p in params.modulus.primes if p < params.r)
    if not 2 <= rp <= params.r:
        raise ValueError(f"r'={rp} must lie in [2, r={params.r}]")
    if rp**k > params.r:
        raise ValueError(f"r'^k = {rp}^{k} exceeds r = {params.r}")
    if any(rp > pe for pe in params.modulus.prime_powers):
        raise ValueError(f"r'={rp} exceeds a prime-power factor of q={params.q}")


def level_sample(challenger: Challenger, rp: int, p: int, k: int, rng) -> CosetState:
    """A sample from mu^k: reduce to r', then measure j mod p^k."""
    state, _ = coset.reduce_r_retry(challenger, rp, rng)
    return coset.project_j_mod(state, p, k, rng) if k else state


def acceptance_rate(oracle: DecisionOracle, source: Callable[[], CosetState], count: int, rng) -> float:
    return sum(oracle(source(), rng) for _ in range(count)) / count


@dataclass
class CriticalLevel:
    t: int
    rates: list[float]

    @property
    def gap(self) -> float:
        return abs(self.rates[self.t - 1] - self.rates[self.t])

    @property
    def midpoint(self) -> float:
        return (self.rates[self.t - 1] + self.rates[self.t]) / 2

    @property
    def upper_is_plain(self) -> bool:
        """Whether level t-1 is the side with the higher acceptance rate."""
        return self.rates[self.t - 1] > self.rates[self.t]


def find_critical_t(oracle: DecisionOracle, source: Callable[[int], CosetState], h: int, rng, confidence: float = 8.0) -> CriticalLevel:
    """Smallest t in (0, h] where the oracle separates level t-1 from level t.

    Rates are estimated to within eps/(4h), so a true gap of eps/h (which the
    hybrid argument guarantees somewhere) shows up above the eps/(2h) cut.
    """
    if h < 1:
        raise ValueError("need h >= 1")
    eps = oracle.advantage
    margin = eps / (4 * h)
    count = math.ceil((confidence + math.log(2 * (h + 1))) / (2 * margin**2))
    rates = [acceptance_rate(oracle, lambda: source(k), count, rng) for k in range(h + 1)]
    if abs(rates[0] - rates[h]) < eps / 2:
        raise NoGapFound(f"endpoint rates {rates[0]:.3f} and {rates[h]:.3f} do not differ")
    for t in range(1, h + 1):
        if abs(rates[t - 1] - rates[t]) >= eps / (2 * h):
            return CriticalLevel(t, rates)
    raise NoGapFound(f"no adjacent gap of {eps / (2 * h):.3f} among rates {rates}")


def digit_measurement(state: CosetState, i: int, k: int, a: int, s_tilde: int, t: int, p: int, e: int, rng) -> tuple[int, CosetState]:
    """Measure y_i - j s~ - j p^{k-1} a mod p^{t+k-1} (the ancilla of U_k)."""
    if t + k - 1 > e:
        raise LevelOverflow(f"t + k - 1 = {t + k - 1} exceeds the exponent {e} of p={p}")
    n = state.params.n
    w = [0] * n
    w[i] = 1
    return coset.measure_affine(state, -(s_tilde + p ** (k - 1) * a), w, 0, p ** (t + k - 1), rng)


def hybrid_digit_test(state: CosetState, i: int, k: int, a: int, oracle: DecisionOracle, rng, *, t: int, s_tilde: int = 0, p: int | None = None) -> bool:
    """Apply U_k for candidate digit a to a level-(t-1) sample and ask the oracle.

    When a is the k-th base-p digit of s_i the sample is untouched (still
    level t-1); otherwise the measurement thins it to level t. Returns the
    oracle's verdict as a bool (True = "level t-1" for the coset oracle).
    """
    params = state.params
    p = params.p if p is None else p
    e = params.exponent(p)
    _, post = digit_measurement(state, i, k, a, s_tilde, t, p, e, rng)
    return bool(oracle(post, rng))


def _recover_digits_hybrid(challenger, oracle, rp, p, e, crit: CriticalLevel, rng, confidence) -> list[int]:
    n = challenger.params.n
    m = amplification_count(crit.gap, confidence)
    digits = e - crit.t + 1
    out = []
    for i in range(n):
        s_tilde = 0
        for k in range(1, digits + 1):
            found = None
            for a in range(p):
                hits = sum(
                    hybrid_digit_test(level_sample(challenger, rp, p, crit.t - 1, rng), i, k, a, oracle, rng, t=crit.t, s_tilde=s_tilde, p=p)
                    for _ in range(m)
                )
                rate = hits / m
                if (rate > crit.midpoint) == crit.upper_is_plain:
                    found = a
                    break
            if found is None:
                raise ReductionFailed(f"no candidate accepted for digit {k} of coordinate {i} mod {p}")
            s_tilde += found * p ** (k - 1)
        out.append(s_tilde)
    return out


@dataclass
class ReductionResult:
    secret: ZqVector
    samples_used: int
    oracle_queries: int
    details: dict = field(default_factory=dict)


def verify_candidate(challenger: Challenger, candidate: ZqVector, rng, checks: int = 16) -> bool:
    """Accept iff S_c leaves every fresh sample with a flat first register.

    For the right candidate the second register no longer depends on j, so
    the inverse QFT_r always returns 0; a wrong one makes it 0 with
    probability at most 1/2 per sample.
    """
    for _ in range(checks):
        state = coset.apply_multiply_add(coset.sample(challenger), candidate.coords, -1)
        _, reg = coset.discard_second(state, rng)
        if coset.register_fourier_measure(reg, rng, "inverse") != 0:
            return False
    return True


def fourier_completion(challenger: Challenger, s_partial: ZqVector, v: int, rng, rounds: int = 8) -> ZqVector:
    """Recover s from s mod v using QFTs on states reduced to q' = q/v."""
    params = challenger.params
    q = params.q
    qp = q // v
    if qp > params.r:
        raise ReductionFailed(f"q' = {qp} exceeds r = {params.r}")
    lift = tuple(c % v for c in s_partial.coords)
    equations = []
    for _ in range(rounds):
        for _ in range(4 * params.n):
            while True:
                st = coset.apply_multiply_add(coset.sample(challenger), lift, -1)
                ok, st = coset.reduce_r(st, qp, rng)
                if ok:
                    break
            u, reg = coset.fourier_measure_second(st, rng)
            value = coset.register_fourier_measure(reg, rng, "inverse")
            equations.append(([c % qp for c in u.coords], value))
        try:
            z = solve_linear_mod(equations, qp)
        except Underdetermined:
            continue
        return ZqVector(q, tuple(a + v * b for a, b in zip(lift, z.coords)))
    raise ReductionFailed(f"equations mod {qp} stayed underdetermined after {rounds} rounds")


def search_via_hybrid(oracle: DecisionOracle, challenger: Challenger, rng, r_prime: int | None = None, confidence: float = 8.0) -> ReductionResult:
    """Recover s from a decision oracle for mu_{s,r'} against gamma."""
    params = challenger.params
    rp = choose_r_prime(params) if r_prime is None else r_prime
    check_r_prime(params, rp)
    start_samples, start_queries = challenger.samples_issued, oracle.queries
    residues = []
    levels = {}
    for p, e in params.modulus.factors:
        h = 0
        while p**h < rp:
            h += 1
        crit = find_critical_t(oracle, lambda k: level_sample(challenger, rp, p, k, rng), h, rng, confidence)
        levels[p] = crit.t
        digits = _recover_digits_hybrid(challenger, oracle, rp, p, e, crit, rng, confidence)
        residues.append((p ** (e - crit.t + 1), digits))
    partial = crt_reconstruct(residues)
    v = partial.q
    candidate = ZqVector(params.q, partial.coords) if v == params.q else fourier_completion(challenger, partial, v, rng)
    if not verify_candidate(challenger, candidate, rng):
        raise ReductionFailed("recovered candidate failed verification")
    return ReductionResult(
        candidate,
        challenger.samples_issued - start_samples,
        oracle.queries - start_queries,
        {"r_prime": rp, "t": levels, "v": v},
    )


# ---------------------------------------------------------------- phase reduction


def phase_digit_transform(state: CosetState, i: int, k: int, y: int, c: int, s_tilde: int, p: int) -> CosetState:
    """U_{c,y,k}: multiply by w_{p^{k+1}}^{(y_i - j s~ - j p^k y) c}."""
    n = state.params.n
    w = [0] * n
    w[i] = c
    return coset.adversary_phase(state, p ** (k + 1), -(s_tilde + p**k * y) * c, 0, w)


def _phased_sample(challenger: Challenger, p: int, rng) -> CosetState:
    t = int(rng.integers(1, p))
    return coset.adversary_phase(coset.sample(challenger), p, t)


def search_via_phase(oracle: DecisionOracle, challenger: Challenger, rng, confidence: float = 8.0) -> ReductionResult:
    """Recover s from an oracle separating mu_{s,r} from the phased mu_{s,r,p}."""
    params = challenger.params
    start_samples, start_queries = challenger.samples_issued, oracle.queries
    eps = oracle.advantage
    calib = math.ceil((confidence + math.log(4)) / (2 * (eps / 4) ** 2))
    residues = []
    rates = {}
    for p, e in params.modulus.factors:
        plain = acceptance_rate(oracle, lambda: coset.sample(challenger), calib, rng)
        phased = acceptance_rate(oracle, lambda: _phased_sample(challenger, p, rng), calib, rng)
        gap = abs(plain - phased)
        if gap < eps / 2:
            raise NoGapFound(f"plain rate {plain:.3f} and phased rate {phased:.3f} do not differ for p={p}")
        rates[p] = (plain, phased)
        mid = (plain + phased) / 2
        m = amplification_count(gap, confidence)
        coords = []
        for i in range(params.n):
            s_tilde = 0
            for k in range(e):
                found = None
                for y in range(p):
                    hits = 0
                    for _ in range(m):
                        c = int(rng.integers(1, p))
                        hits += oracle(phase_digit_transform(coset.sample(challenger), i, k, y, c, s_tilde, p), rng)
                    if (hits / m > mid) == (plain > phased):
                        found = y
                        break
                if found is None:
                    raise ReductionFailed(f"no candidate accepted for digit {k} of coordinate {i} mod {p}")
                s_tilde += found * p**k
            coords.append(s_tilde)
        residues.append((p**e, coords))
    candidate = ZqVector(params.q, crt_reconstruct(residues).coords)
    if not verify_candidate(challenger, candidate, rng):
        raise ReductionFailed("recovered candidate failed verification")
    return ReductionResult(
        candidate,
        challenger.samples_issued - start_samples,
        oracle.queries - start_queries,
        {"rates": rates},
    )


# ---------------------------------------------------------------- LWE extraction


@dataclass(frozen=True)
class LweSample:
    a: ZqVector
    b: int


@dataclass(frozen=True)
class ShiftedLweSample:
    """(a, <a, s> + e - t mod q); ``shifted`` records whether a phase was present."""

    a: ZqVector
    b: int
    shifted: bool


def extraction_weights(size: int, lam: float) -> np.ndarray:
    """eps_j = g_lambda(j) / sqrt(size) on the centered range of j."""
    h = (size - 1) // 2
    jc = np.arange(size) - h
    return np.array([gaussian_weight(j, lam) for j in jc]) / math.sqrt(size)


def extraction_success_probability(size: int, lam: float) -> float:
    """||eps||_2^2, the per-attempt rejection-sampling success probability."""
    return float(np.sum(extraction_weights(size, lam) ** 2))


def _extract_checks(state: CosetState, mode: str) -> int:
    params = state.params
    if state.stride != 1 or state.base != 0 or state.count != state.size:
        raise ValueError("extraction needs a state with full support")
    if mode == "prime":
        if not is_prime(params.q):
            raise ValueError(f"prime mode needs prime q, got {params.q}")
        return params.q
    if mode == "mod_p":
        if state.size > params.p:
            raise ValueError(f"mod_p mode needs r <= p, got r={state.size}, p={params.p}")
        return params.p
    raise ValueError(f"unknown extraction mode {mode!r}")


def _y_distribution(state: CosetState, lam: float, inner: int, modulus: int) -> np.ndarray:
    """P(y) after reshaping, QFT_modulus on the first register, and measuring.

    ``inner`` is <a, s'> reduced mod ``modulus``.
    """
    h = (state.size - 1) // 2
    jc = np.arange(state.size) - h
    eps = extraction_weights(state.size, lam)
    frac = (state.phase_slope * jc % state.phase_mod) / state.phase_mod
    y = np.arange(modulus)
    ang = 2 * np.pi * (frac[None, :] + np.outer(y + inner, jc) % modulus / modulus)
    amps = (eps[None, :] * np.exp(1j * ang)).sum(axis=1)
    probs = np.abs(amps) ** 2
    return probs / probs.sum()


def extraction_distribution(state: CosetState, lam: float, mode: str = "prime") -> dict[tuple[tuple[int, ...], int], float]:
    """Exact joint law of the output (a, b) given success (does not consume)."""
    modulus = _extract_checks(state, mode)
    params = state.params
    s = coset._secret(state)
    out = {}
    for a in np.ndindex(*(modulus,) * params.n):
        inner = sum(x * y for x, y in zip(a, s)) % modulus
        probs = _y_distribution(state, lam, inner, modulus)
        neg = tuple((-x) % modulus for x in a)
        for y, pr in enumerate(probs):
            out[(neg, y)] = pr / modulus**params.n
    return out


def extract_shifted_lwe(state: CosetState, lam: float, rng, mode: str = "prime") -> tuple[bool, ShiftedLweSample | None]:
    """Turn a (possibly phased) coset state into a shifted LWE sample.

    Center j, reshape the uniform profile into g_lambda by quantum rejection
    sampling, QFT both registers and measure. The output is
    (-a, <-a, s> + e - t) with e close to a wrapped discrete Gaussian.

    mode="mod_p" handles composite q: only u = (q/p) a' outcomes are kept and
    the sample lives mod p.
    """
    modulus = _extract_checks(state, mode)
    params = state.params
    coset._take(state)
    if rng.random() >= extraction_success_probability(state.size, lam):
        return False, None
    u = ZqVector.random(params.n, params.q, rng)
    if mode == "mod_p":
        scale = params.q // modulus
        if any(c % scale for c in u.coords):
            return False, None
        a = tuple(c // scale for c in u.coords)
    else:
        a = u.coords
    s = coset._secret(state)
    inner = sum(x * y for x, y in zip(a, s)) % modulus
    y = int(rng.choice(modulus, p=_y_distribution(state, lam, inner, modulus)))
    neg = ZqVector(modulus, tuple(-x for x in a))
    return True, ShiftedLweSample(neg, y, not state.phase_is_trivial())
