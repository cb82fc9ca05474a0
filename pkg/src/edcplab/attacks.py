"""Sample-rich attacks: phase states, the Kuperberg-style sieve, PGM, and the r = q Fourier attack."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import coset
from .coset import Challenger
from .errors import DimensionCap, PoolExhausted, Underdetermined
from .modmath import ZqVector, solve_linear_mod
from .statevec import IndexSpace, StateVector

PGM_MAX_QUBITS = 14
PGM_FLOOR = 1e-10


@dataclass(eq=False)
class PhaseState:
    """(|0> + w_q^{<y, s>}|1>)/sqrt 2 with public label y."""

    q: int
    label: ZqVector
    _challenger: Challenger = field(repr=False)
    _live: bool = field(default=True, repr=False)

    def phase_exponent(self) -> int:
        """<y, s> mod q. Simulation-only."""
        return self.label.dot(self._challenger._secret.coords)

    def to_dense(self) -> StateVector:
        amps = np.array([1.0, np.exp(2j * np.pi * self.phase_exponent() / self.q)]) / math.sqrt(2)
        return StateVector(IndexSpace((2,)), amps)


@dataclass
class AttackResult:
    value: int | ZqVector
    samples: int
    extras: dict = field(default_factory=dict)


def edcp_to_phase(challenger: Challenger, rng) -> PhaseState:
    """Reduce a sample to r = 2, QFT the second register and measure it."""
    state, _ = coset.reduce_r_retry(challenger, 2, rng)
    u, reg = coset.fourier_measure_second(state, rng)
    coset._take(reg)
    return PhaseState(challenger.params.q, u, challenger)


def sieve_combine(a: PhaseState, b: PhaseState, rng, outcome: int | None = None) -> tuple[bool, PhaseState | None]:
    """CNOT from a onto b, then measure b.

    Outcome 1 (probability exactly 1/2) leaves (|0> + w^{<y_a - y_b, s>}|1>)/sqrt 2,
    the wanted difference state. Outcome 0 is the sum branch and is dropped.
    """
    if a.q != b.q or a._challenger is not b._challenger:
        raise ValueError("phase states come from different challengers")
    coset._take(a)
    coset._take(b)
    bit = int(rng.random() < 0.5) if outcome is None else int(outcome)
    if bit == 0:
        return False, None
    return True, PhaseState(a.q, a.label - b.label, a._challenger)


def _pair_bucket(states: list[PhaseState], rng) -> list[PhaseState]:
    out = []
    for x, y in zip(states[0::2], states[1::2]):
        ok, new = sieve_combine(x, y, rng)
        if ok:
            out.append(new)
    return out


def sieve_stage(states: list[PhaseState], coords: Sequence[int], seed: np.random.SeedSequence) -> list[PhaseState]:
    """Zero the given label coordinates: bucket on them, pair inside buckets.

    Odd leftovers are discarded. Each bucket gets its own child generator so
    the result does not depend on bucket processing order.
    """
    buckets: dict[tuple[int, ...], list[PhaseState]] = defaultdict(list)
    for st in states:
        buckets[tuple(st.label[c] for c in coords)].append(st)
    keys = sorted(buckets)
    children = seed.spawn(len(keys))
    survivors = []
    for key, child in zip(keys, children):
        survivors.extend(_pair_bucket(buckets[key], np.random.default_rng(child)))
    return survivors


def _candidate_matrix(q: int, labels: Sequence[int]) -> np.ndarray:
    """Columns psi_v = 2^{-t/2} sum_x w_q^{alpha(x) v} |x>, alpha(x) = sum x_j y_j."""
    t = len(labels)
    bits = (np.arange(2**t)[:, None] >> np.arange(t - 1, -1, -1)[None, :]) & 1
    alpha = bits @ np.asarray(labels, dtype=np.int64) % q
    v = np.arange(q)
    return np.exp(2j * np.pi * (np.outer(alpha, v) % q) / q) / 2 ** (t / 2)


@dataclass
class PrettyGoodMeasurement:
    """PGM for {psi_v} with a uniform prior.

    S = (1/q) sum_v psi_v psi_v^*; elements E_v = b_v b_v^* with
    b_v = S^{-1/2} psi_v / sqrt q, computed on the range of S from a thin SVD
    (singular values squared below PGM_FLOOR are dropped). The projector onto
    the complement of that range completes the POVM.
    """

    vectors: np.ndarray  # columns b_v
    range_basis: np.ndarray

    @classmethod
    def build(cls, q: int, labels: Sequence[int]) -> "PrettyGoodMeasurement":
        if len(labels) > PGM_MAX_QUBITS:
            raise DimensionCap(f"{len(labels)} phase states exceed the PGM cap of {PGM_MAX_QUBITS}")
        psi = _candidate_matrix(q, labels) / math.sqrt(q)
        u, sv, vh = np.linalg.svd(psi, full_matrices=False)
        keep = sv**2 > PGM_FLOOR
        u, vh = u[:, keep], vh[keep, :]
        return cls(u @ vh, u)

    def probabilities(self, state: np.ndarray) -> np.ndarray:
        """Outcome probabilities for v = 0..q-1, then the completion outcome."""
        p = np.abs(self.vectors.conj().T @ state) ** 2
        rest = max(0.0, 1.0 - float(p.sum()))
        return np.append(p, rest)

    def completeness_error(self) -> float:
        dim = self.vectors.shape[0]
        total = self.vectors @ self.vectors.conj().T + np.eye(dim) - self.range_basis @ self.range_basis.conj().T
        return float(np.abs(total - np.eye(dim)).max())


def pgm_success_probability(q: int, labels: Sequence[int]) -> float:
    """Average PGM success over a uniform secret, from the measurement itself."""
    pgm = PrettyGoodMeasurement.build(q, labels)
    psi = _candidate_matrix(q, labels)
    return float(np.mean([abs(np.vdot(pgm.vectors[:, v], psi[:, v])) ** 2 for v in range(q)]))


def pgm_recover(states: Sequence[PhaseState], rng, coordinate: int | None = None) -> int:
    """Guess the secret coordinate from phase states labelled (0,...,0,y_j,0,...)."""
    if not states:
        raise ValueError("need at least one phase state")
    q = states[0].q
    n = states[0].label.n
    i = n - 1 if coordinate is None else coordinate
    for st in states:
        if any(c for k, c in enumerate(st.label.coords) if k != i):
            raise ValueError(f"label {st.label.to_list()} is not zero outside coordinate {i}")
    labels = [st.label[i] for st in states]
    pgm = PrettyGoodMeasurement.build(q, labels)
    joint = np.array([1.0 + 0j])
    for st in states:
        joint = np.kron(joint, st.to_dense().amps)
        coset._take(st)
    probs = pgm.probabilities(joint)
    k = int(rng.choice(q + 1, p=probs / probs.sum()))
    return int(rng.integers(q)) if k == q else k


def default_pool_size(n: int, q: int, k: int) -> int:
    """q^l with l = k + 3n / (k log2 q)."""
    ell = k + 3 * n / (k * math.log2(q))
    return math.ceil(q**ell)


def kuperberg_recover(challenger: Challenger, coordinate: int, block: int, rng, pool: int | None = None, pgm_states: int | None = None) -> AttackResult:
    """Sieve phase states until only ``coordinate`` of the label is nonzero, then run the PGM."""
    params = challenger.params
    q, n = params.q, params.n
    if not 0 <= coordinate < n:
        raise ValueError(f"coordinate {coordinate} out of range for n={n}")
    size = default_pool_size(n, q, block) if pool is None else pool
    need = math.ceil(math.log2(q)) + 1 if pgm_states is None else pgm_states
    start = challenger.samples_issued
    states = [edcp_to_phase(challenger, rng) for _ in range(size)]
    seed = np.random.SeedSequence(int(rng.integers(2**63)))
    others = [c for c in range(n) if c != coordinate]
    stages = [others[i:i + block] for i in range(0, len(others), block)]
    survival = []
    for coords, child in zip(stages, seed.spawn(len(stages))):
        before = len(states)
        states = sieve_stage(states, coords, child)
        survival.append(len(states) / before)
        if len(states) < 2:
            raise PoolExhausted(f"only {len(states)} states survived a sieve stage")
    useful = [st for st in states if st.label[coordinate] % q]
    if len(useful) < need:
        raise PoolExhausted(f"{len(useful)} usable states left, the PGM needs {need}")
    guess = pgm_recover(useful[:need], rng, coordinate)
    return AttackResult(
        guess,
        challenger.samples_issued - start,
        {"pool": size, "survival": survival, "final": len(states), "pgm_states": need},
    )


def fourier_attack_r_eq_q(challenger: Challenger, rng, max_samples: int | None = None) -> AttackResult:
    """For r = q: QFT both registers to read <y, s> exactly, then solve.

    Equations are added one sample at a time and the system is solved as
    soon as it pins s down.
    """
    params = challenger.params
    if params.r != params.q:
        raise ValueError(f"needs r = q, got r={params.r}, q={params.q}")
    limit = 4 * params.n * 8 if max_samples is None else max_samples
    start = challenger.samples_issued
    equations = []
    for _ in range(limit):
        u, reg = coset.fourier_measure_second(coset.sample(challenger), rng)
        equations.append((u.coords, coset.register_fourier_measure(reg, rng, "inverse")))
        if len(equations) < params.n:
            continue
        try:
            s = solve_linear_mod(equations, params.modulus)
        except Underdetermined:
            continue
        return AttackResult(s, challenger.samples_issued - start, {"equations": len(equations)})
    raise Underdetermined(f"s not determined after {limit} samples")
