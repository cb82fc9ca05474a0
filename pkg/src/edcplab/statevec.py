"""Dense statevector / density-operator simulator over composite index spaces.

This is the brute-force reference the symbolic engine in :mod:`edcplab.coset`
is tested against. States are stored as flat complex arrays whose C-order
reshape follows ``IndexSpace.factors`` (register 0 is the slowest axis).

Trace-norm convention: :func:`trace_distance` returns ``||a - b||_1`` with no
factor 1/2, so orthogonal pure states are at distance 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadDistribution,
    DimensionCap,
    SpaceMismatch,
    WeightExceedsAmplitude,
    ZeroProbabilityBranch,
)
from .modmath import RootOfUnity, ZqVector

DEFAULT_DIM_CAP = 2**22
NORM_TOL = 1e-9


@dataclass(frozen=True)
class IndexSpace:
    factors: tuple[int, ...]
    cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(int(f) for f in self.factors))
        if not self.factors or any(f < 1 for f in self.factors):
            raise ValueError(f"bad register sizes {self.factors}")
        if self.dim > self.cap:
            raise DimensionCap(f"dimension {self.dim} exceeds cap {self.cap}")

    @property
    def dim(self) -> int:
        return math.prod(self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def without(self, register: int) -> "IndexSpace":
        rest = self.factors[:register] + self.factors[register + 1:]
        return IndexSpace(rest or (1,), self.cap)

    def replace(self, register: int, size: int) -> "IndexSpace":
        f = list(self.factors)
        f[register] = size
        return IndexSpace(tuple(f), self.cap)


@dataclass(frozen=True, eq=False)
class StateVector:
    space: IndexSpace
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.size != self.space.dim:
            raise SpaceMismatch(f"{amps.size} amplitudes for dimension {self.space.dim}")
        if abs(np.linalg.norm(amps) - 1) > NORM_TOL:
            raise ValueError(f"state has norm {np.linalg.norm(amps)}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis(cls, space: IndexSpace, index: Sequence[int]) -> "StateVector":
        amps = np.zeros(space.factors, dtype=complex)
        amps[tuple(index)] = 1.0
        return cls(space, amps)

    @classmethod
    def from_tensor(cls, space: IndexSpace, tensor: np.ndarray) -> "StateVector":
        return cls(space, tensor.reshape(-1))

    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.space.factors)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def density(self) -> "DensityOperator":
        return DensityOperator(self.space, np.outer(self.amps, self.amps.conj()))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


@dataclass(frozen=True, eq=False)
class DensityOperator:
    space: IndexSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise SpaceMismatch(f"matrix shape {m.shape} for dimension {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=tol):
            return False
        if abs(np.trace(m).real - 1) > tol:
            return False
        return bool(np.linalg.eigvalsh(m).min() >= -tol)


def qft_matrix(size: int, direction: str = "forward") -> np.ndarray:
    """(1/sqrt N) sum_{x,y} w^{+-xy} |y><x| with w = exp(2 pi i / N)."""
    sign = {"forward": 1, "inverse": -1}[direction]
    k = np.arange(size)
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / size) / math.sqrt(size)


def qft_apply(state: StateVector, register: int, direction: str = "forward") -> StateVector:
    """Fourier transform over Z_N on one register, N being that register's size.

    Forward maps |x> to N^{-1/2} sum_y w_N^{xy} |y>.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    t = state.tensor()
    # numpy's ifft carries the +i sign convention
    out = np.fft.ifft(t, axis=register, norm="ortho") if direction == "forward" else np.fft.fft(t, axis=register, norm="ortho")
    return StateVector.from_tensor(state.space, out)


def _coset_layout(space: IndexSpace, s: ZqVector) -> None:
    f = space.factors
    if len(f) != s.n + 1 or any(x != s.q for x in f[1:]):
        raise SpaceMismatch(f"space {f} is not Z_r x Z_{s.q}^{s.n}")


def apply_multiply_add(state: StateVector, s: ZqVector, sign: int = 1) -> StateVector:
    """|j>|y> -> |j>|y + sign * j s> on the space Z_r x Z_q^n."""
    _coset_layout(state.space, s)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    t = state.tensor()
    out = np.empty_like(t)
    axes = tuple(range(s.n))
    for j in range(t.shape[0]):
        shift = tuple(sign * j * c for c in s.coords)
        out[j] = np.roll(t[j], shift, axis=axes)
    return StateVector.from_tensor(state.space, out)


def permute_basis(state: StateVector, target: Callable[[tuple[int, ...]], tuple[int, ...]]) -> StateVector:
    """Apply the basis permutation |i> -> |target(i)>; target must be a bijection."""
    t = state.tensor()
    out = np.zeros_like(t)
    hit = np.zeros(t.shape, dtype=bool)
    for idx in np.ndindex(*t.shape):
        dst = tuple(target(idx))
        if hit[dst]:
            raise ValueError("target is not a bijection")
        hit[dst] = True
        out[dst] = t[idx]
    return StateVector.from_tensor(state.space, out)


def apply_diagonal_phase(state: StateVector, phase: Callable[[tuple[int, ...]], RootOfUnity] | np.ndarray) -> StateVector:
    """Multiply each amplitude by a unit scalar given per basis index.

    ``phase`` is either a callable returning a RootOfUnity or an array of
    unit complex numbers shaped like the space.
    """
    if callable(phase):
        t = state.tensor()
        vals = np.empty(t.shape, dtype=complex)
        for idx in np.ndindex(*t.shape):
            vals[idx] = phase(idx).evaluate()
    else:
        vals = np.asarray(phase, dtype=complex).reshape(state.space.factors)
    if not np.allclose(np.abs(vals), 1.0, atol=1e-12):
        raise ValueError("phases must have unit modulus")
    return StateVector.from_tensor(state.space, state.tensor() * vals)


def register_probabilities(state: StateVector, register: int) -> np.ndarray:
    p = np.abs(state.tensor()) ** 2
    axes = tuple(i for i in range(len(state.space)) if i != register)
    return p.sum(axis=axes) if axes else p


def _draw(probs: np.ndarray, rng) -> int:
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total <= 0:
        raise ZeroProbabilityBranch("all outcomes have zero probability")
    return int(rng.choice(probs.size, p=probs / total))


def _collapse(state: StateVector, mask: np.ndarray) -> StateVector:
    t = np.where(mask, state.tensor(), 0)
    norm = np.linalg.norm(t)
    if norm < 1e-12:
        raise ZeroProbabilityBranch("selected branch has zero weight")
    return StateVector.from_tensor(state.space, t / norm)


def measure_register(state: StateVector, register: int, rng, outcome: int | None = None) -> tuple[int, StateVector]:
    """Computational-basis measurement of one register.

    ``outcome`` forces a branch (used when comparing against another engine);
    otherwise it is drawn from the Born distribution with ``rng``.
    """
    probs = register_probabilities(state, register)
    k = _draw(probs, rng) if outcome is None else int(outcome)
    shape = [1] * len(state.space)
    shape[register] = state.space.factors[register]
    mask = (np.arange(state.space.factors[register]) == k).reshape(shape)
    return k, _collapse(state, np.broadcast_to(mask, state.space.factors))


def function_values(space: IndexSpace, f: Callable[[tuple[int, ...]], int]) -> np.ndarray:
    vals = np.empty(space.factors, dtype=np.int64)
    for idx in np.ndindex(*space.factors):
        vals[idx] = f(idx)
    return vals


def function_distribution(state: StateVector, f: Callable[[tuple[int, ...]], int] | np.ndarray) -> dict[int, float]:
    vals = function_values(state.space, f) if callable(f) else np.asarray(f)
    p = np.abs(state.tensor()) ** 2
    out: dict[int, float] = {}
    for v, w in zip(vals.reshape(-1), p.reshape(-1)):
        if w > 0:
            out[int(v)] = out.get(int(v), 0.0) + float(w)
    return out


def measure_function(state: StateVector, f: Callable[[tuple[int, ...]], int] | np.ndarray, rng, outcome: int | None = None) -> tuple[int, StateVector]:
    """Compute f(basis index) into a fresh register and measure it.

    Equivalent to ``|i>|0> -> |i>|f(i)>`` followed by a measurement of the
    auxiliary register; the auxiliary is dropped afterwards since it is left
    in a basis state.
    """
    vals = function_values(state.space, f) if callable(f) else np.asarray(f)
    if outcome is None:
        dist = function_distribution(state, vals)
        keys = sorted(dist)
        outcome = keys[_draw(np.array([dist[k] for k in keys]), rng)]
    return int(outcome), _collapse(state, vals == outcome)


def discard_register(state: StateVector, register: int, rng, outcome: int | None = None) -> tuple[int, StateVector]:
    """Measure a register and remove it from the space."""
    k, collapsed = measure_register(state, register, rng, outcome)
    t = np.take(collapsed.tensor(), k, axis=register)
    return k, StateVector.from_tensor(state.space.without(register), t)


def truncate_register(state: StateVector, register: int, size: int) -> StateVector:
    """Shrink a register to ``size``; the dropped values must carry no weight."""
    t = state.tensor()
    dropped = np.take(t, range(size, t.shape[register]), axis=register)
    if np.abs(dropped).max(initial=0) > 1e-12:
        raise ValueError("truncation would discard amplitude")
    kept = np.take(t, range(size), axis=register)
    return StateVector.from_tensor(state.space.replace(register, size), kept)


def append_register(state: StateVector, size: int, value: int = 0) -> StateVector:
    """Tensor on a new last register prepared in |value>."""
    anc = np.zeros(size, dtype=complex)
    anc[value] = 1.0
    space = IndexSpace(state.space.factors + (size,), state.space.cap)
    return StateVector(space, np.kron(state.amps, anc))


def tensor_product(*states: StateVector) -> StateVector:
    amps = states[0].amps
    factors = states[0].space.factors
    for st in states[1:]:
        amps = np.kron(amps, st.amps)
        factors = factors + st.space.factors
    return StateVector(IndexSpace(factors), amps)


def equal_up_to_phase(a: StateVector | np.ndarray, b: StateVector | np.ndarray, tol: float = 1e-9) -> bool:
    u = a.amps if isinstance(a, StateVector) else np.asarray(a).reshape(-1)
    v = b.amps if isinstance(b, StateVector) else np.asarray(b).reshape(-1)
    if u.shape != v.shape:
        return False
    k = int(np.argmax(np.abs(u)))
    if abs(v[k]) < 1e-12:
        return False
    phase = (u[k] / v[k]) / abs(u[k] / v[k])
    return bool(np.max(np.abs(u - phase * v)) <= tol)


def density_from_ensemble(members: Sequence[tuple[float, StateVector]]) -> DensityOperator:
    """rho = sum_x p_x |psi_x><psi_x|."""
    if not members:
        raise BadDistribution("empty ensemble")
    probs = np.array([p for p, _ in members], dtype=float)
    if probs.min() < 0 or abs(probs.sum() - 1) > NORM_TOL:
        raise BadDistribution(f"probabilities sum to {probs.sum()}")
    space = members[0][1].space
    if any(st.space.factors != space.factors for _, st in members):
        raise SpaceMismatch("ensemble members live in different spaces")
    vecs = np.stack([st.amps for _, st in members])
    weighted = vecs * probs[:, None]
    return DensityOperator(space, weighted.T @ vecs.conj())


def eigen_spectrum(rho: DensityOperator, tol: float = 1e-7) -> list[tuple[float, int]]:
    """Eigenvalues clustered within ``tol``, as (value, multiplicity), descending."""
    vals = np.sort(np.linalg.eigvalsh(rho.matrix))[::-1]
    out: list[list] = []
    for v in vals:
        if out and abs(out[-1][2] - v) <= tol:
            out[-1][1] += 1
            out[-1][3] += v
        else:
            out.append([v, 1, v, v])
        out[-1][2] = v
    spectrum = [(float(total / mult), mult) for _, mult, _, total in out]
    return [(0.0 if abs(v) <= tol else v, m) for v, m in spectrum]


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    """||a - b||_1, the full trace norm (no 1/2)."""
    if a.space.factors != b.space.factors:
        raise SpaceMismatch("operands live in different spaces")
    return float(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix)).sum())


def rejection_resample(state: StateVector, target: Sequence[float], rng, force: bool | None = None) -> tuple[bool, StateVector | None]:
    """Quantum rejection sampling on the first register.

    With pi_k the amplitude weight of first-register value k, each branch is
    rescaled by eps_k / pi_k using an ancilla rotation that is then measured.
    Success happens with probability ||eps||_2^2 and leaves a first-register
    profile proportional to eps with all phases intact.
    """
    eps = np.asarray(target, dtype=float)
    pi = np.sqrt(register_probabilities(state, 0))
    if eps.shape != pi.shape:
        raise SpaceMismatch(f"{eps.size} weights for register of size {pi.size}")
    if eps.min() < 0 or np.any(eps > pi + 1e-12):
        raise WeightExceedsAmplitude("target weights must satisfy 0 <= eps <= pi")
    p_success = float(np.sum(eps**2))
    ok = bool(rng.random() < p_success) if force is None else force
    if not ok:
        return False, None
    ratio = np.divide(eps, pi, out=np.zeros_like(eps), where=pi > 0)
    shape = (-1,) + (1,) * (len(state.space) - 1)
    t = state.tensor() * ratio.reshape(shape)
    return True, StateVector.from_tensor(state.space, t / np.linalg.norm(t))
