"""Dense-simulator versions of every coset-state operation.

Each function here acts on a plain :class:`StateVector` over Z_size x Z_q^n
and is built only from the generic primitives in :mod:`edcplab.statevec`
(QFTs, basis permutations, diagonal phases, measurements of computed
functions). Tests run the same program through these and through
:mod:`edcplab.coset` and compare outcome distributions and post-states.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .modmath import RootOfUnity, ZqVector
from .statevec import (
    IndexSpace,
    StateVector,
    apply_diagonal_phase,
    apply_multiply_add,
    density_from_ensemble,
    function_distribution,
    function_values,
    measure_function,
    permute_basis,
    qft_apply,
    truncate_register,
)


def coset_space(size: int, n: int, q: int) -> IndexSpace:
    return IndexSpace((size,) + (q,) * n)


def gen_state(s: Sequence[int], x: Sequence[int], r: int, q: int, p: int | None = None, t: int = 0) -> StateVector:
    """|phi_{s,r}(x)> (with optional phase w_p^{jt}) built as a circuit.

    |0>|x>, then QFT_r on the first register, then A_s, then the phase.
    """
    n = len(s)
    space = coset_space(r, n, q)
    state = StateVector.basis(space, (0,) + tuple(int(v) % q for v in x))
    state = qft_apply(state, 0)
    state = apply_multiply_add(state, ZqVector(q, tuple(s)))
    if t:
        state = apply_diagonal_phase(state, lambda idx: RootOfUnity(p, idx[0] * t))
    return state


def _flat_second(idx: tuple[int, ...], q: int) -> int:
    v = 0
    for c in idx[1:]:
        v = v * q + c
    return v


def _unflat(v: int, n: int, q: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        v, c = divmod(v, q)
        out.append(c)
    return tuple(reversed(out))


def affine_values(space: IndexSpace, u: int, w: Sequence[int] | None, b: int, modulus: int) -> np.ndarray:
    n = len(space) - 1
    w = tuple(w) if w is not None else (0,) * n
    return function_values(space, lambda idx: (u * idx[0] + sum(a * c for a, c in zip(w, idx[1:])) + b) % modulus)


def affine_distribution(state: StateVector, u: int, w, b: int, modulus: int) -> dict[int, float]:
    return function_distribution(state, affine_values(state.space, u, w, b, modulus))


def measure_affine(state: StateVector, u: int, w, b: int, modulus: int, rng, outcome: int | None = None):
    return measure_function(state, affine_values(state.space, u, w, b, modulus), rng, outcome)


def project_j_mod(state: StateVector, p: int, k: int, rng, outcome: int | None = None):
    return measure_affine(state, 1, None, 0, p**k, rng, outcome)


def second_values(space: IndexSpace) -> np.ndarray:
    q = space.factors[1]
    return function_values(space, lambda idx: _flat_second(idx, q))


def second_distribution(state: StateVector) -> dict[tuple[int, ...], float]:
    n = len(state.space) - 1
    q = state.space.factors[1]
    dist = function_distribution(state, second_values(state.space))
    return {_unflat(k, n, q): v for k, v in dist.items()}


def measure_second(state: StateVector, rng, outcome: Sequence[int] | None = None):
    n = len(state.space) - 1
    q = state.space.factors[1]
    forced = None if outcome is None else _flat_second((0,) + tuple(outcome), q)
    v, out = measure_function(state, second_values(state.space), rng, forced)
    return _unflat(v, n, q), out


def first_register(state: StateVector) -> StateVector:
    """Drop a second register that is in a basis state."""
    t = state.tensor().reshape(state.space.factors[0], -1)
    col = int(np.argmax(np.abs(t).sum(axis=0)))
    rest = np.delete(t, col, axis=1)
    if rest.size and np.abs(rest).max() > 1e-9:
        raise ValueError("second register is not in a basis state")
    return StateVector(IndexSpace((state.space.factors[0],)), t[:, col])


def fourier_second_distribution(state: StateVector) -> dict[tuple[int, ...], float]:
    out = state
    for reg in range(1, len(state.space)):
        out = qft_apply(out, reg)
    return second_distribution(out)


def fourier_measure_second(state: StateVector, rng, outcome: Sequence[int] | None = None):
    """QFT_q on every second-register coordinate, measure them, keep register 0."""
    out = state
    for reg in range(1, len(state.space)):
        out = qft_apply(out, reg)
    u, collapsed = measure_second(out, rng, outcome)
    return u, first_register(collapsed)


def adversary_phase(state: StateVector, modulus: int, slope: int, intercept: int = 0, weights: Sequence[int] | None = None) -> StateVector:
    n = len(state.space) - 1
    w = tuple(weights) if weights is not None else (0,) * n
    return apply_diagonal_phase(
        state,
        lambda idx: RootOfUnity(modulus, slope * idx[0] + intercept + sum(a * c for a, c in zip(w, idx[1:]))),
    )


def multiply_add(state: StateVector, v: Sequence[int], sign: int = 1) -> StateVector:
    q = state.space.factors[1]
    return apply_multiply_add(state, ZqVector(q, tuple(v)), sign)


def reduce_r_values(size: int, target: int) -> np.ndarray:
    j = np.arange(size)
    return (j < target).astype(np.int64) if 2 * target > size else j // target


def reduce_r(state: StateVector, target: int, rng, outcome: int | None = None):
    """Dense self-reduction: measure the block (or indicator), shift, truncate.

    Returns (ok, state or None, measured value).
    """
    size = state.space.factors[0]
    if target == size:
        return True, state, None
    vals = reduce_r_values(size, target)
    shape = (size,) + (1,) * (len(state.space) - 1)
    full = np.broadcast_to(vals.reshape(shape), state.space.factors)
    a, collapsed = measure_function(state, full, rng, outcome)
    if 2 * target > size:
        return (True, truncate_register(collapsed, 0, target), 1) if a == 1 else (False, None, 0)
    if a >= size // target:
        return False, None, a
    shift = a * target
    moved = permute_basis(collapsed, lambda idx: ((idx[0] - shift) % size,) + tuple(idx[1:]))
    return True, truncate_register(moved, 0, target), a


def measure_full(state: StateVector, rng) -> tuple[int, tuple[int, ...]]:
    probs = state.probabilities()
    k = int(rng.choice(probs.size, p=probs / probs.sum()))
    idx = np.unravel_index(k, state.space.factors)
    return int(idx[0]), tuple(int(v) for v in idx[1:])


def full_distribution(state: StateVector) -> dict[tuple[int, ...], float]:
    out = {}
    for idx in np.ndindex(*state.space.factors):
        w = abs(state.tensor()[idx]) ** 2
        if w > 1e-15:
            out[(int(idx[0]), tuple(int(v) for v in idx[1:]))] = w
    return out


def register_fourier_distribution(state: StateVector, direction: str = "inverse") -> np.ndarray:
    return np.abs(qft_apply(state, 0, direction).amps) ** 2


def ensemble_density(s: Sequence[int], r: int, q: int, p: int | None = None, t: int = 0):
    """rho_{s,r} (or its phased version) averaged over every offset x."""
    n = len(s)
    members = []
    weight = 1 / q**n
    for x in np.ndindex(*(q,) * n):
        members.append((weight, gen_state(s, x, r, q, p, t)))
    return density_from_ensemble(members)


def total_variation(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * math.fsum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)
