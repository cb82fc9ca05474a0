"""Single-bit quantum public-key encryption from coset states.

Key generation draws a secret s and hands out coset states |phi_{s,r}(x)>.
Encryption multiplies in the phase w_p^{b t j}; decryption removes the
secret with S_s, discards the second register and reads the phase with an
inverse QFT_r, which lands exactly on b t r / p.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coset
from .coset import Challenger, CosetState, EdcpParams
from .errors import BadParams, ParamMismatch
from .modmath import ZqVector
from .statevec import (
    StateVector,
    append_register,
    apply_multiply_add,
    discard_register,
    measure_register,
    permute_basis,
    qft_apply,
)


def check_params(params: EdcpParams) -> tuple[int, int]:
    """Require q = p^e and r = p^e' with 1 <= e' < e; returns (e, e')."""
    if len(params.modulus.factors) != 1:
        raise BadParams(f"q={params.q} must be a prime power")
    p, e = params.modulus.factors[0]
    ep, rest = 0, params.r
    while rest % p == 0:
        rest //= p
        ep += 1
    if rest != 1 or ep < 1:
        raise BadParams(f"r={params.r} must be a positive power of p={p}")
    if ep >= e:
        raise BadParams(f"r={params.r} must be smaller than q={params.q}")
    return e, ep


@dataclass
class KeyPair:
    secret: ZqVector
    public: CosetState
    params: EdcpParams
    challenger: Challenger

    def fresh_public(self) -> CosetState:
        """Another public-key copy, prepared by the key holder."""
        return self.challenger.sample()


@dataclass
class Ciphertext:
    state: CosetState
    params: EdcpParams


def keygen(params: EdcpParams, rng: np.random.Generator) -> KeyPair:
    check_params(params)
    ch = Challenger(params, rng)
    return KeyPair(ch.reveal(), ch.sample(), params, ch)


def sample_t(params: EdcpParams, rng) -> int:
    """t uniform on Z_r minus {0}, redrawn while p | t (so the phase is never trivial)."""
    while True:
        t = int(rng.integers(1, params.r))
        if t % params.p:
            return t


def encrypt(pk: CosetState, b: int, rng) -> Ciphertext:
    """Apply |j>|y> -> w_p^{b t j} |j>|y>; t is not kept."""
    if b not in (0, 1):
        raise ValueError(f"message bit must be 0 or 1, got {b}")
    params = pk.params
    t = sample_t(params, rng)
    return Ciphertext(coset.adversary_phase(pk, params.p, b * t), params)


def decrypt_outcome(sk: ZqVector, c: Ciphertext, rng) -> int:
    """Run decryption and return the raw inverse-QFT_r measurement outcome."""
    params = c.params
    if sk.q != params.q or sk.n != params.n:
        raise ParamMismatch(f"key lives in Z_{sk.q}^{sk.n}, ciphertext in Z_{params.q}^{params.n}")
    state = coset.apply_multiply_add(c.state, sk.coords, sign=-1)
    _, first = coset.discard_second(state, rng)
    return coset.register_fourier_measure(first, rng, "inverse")


def decrypt(sk: ZqVector, c: Ciphertext, rng) -> int:
    return int(decrypt_outcome(sk, c, rng) != 0)


def roundtrip_trial(params: EdcpParams, b: int, rng) -> bool:
    keys = keygen(params, rng)
    return decrypt(keys.secret, encrypt(keys.public, b, rng), rng) == b


def encrypt_bits(keys: KeyPair, bits, rng) -> list[Ciphertext]:
    """Bitwise encryption; each bit consumes its own public-key copy."""
    return [encrypt(keys.fresh_public(), int(b), rng) for b in bits]


# ---------------------------------------------------------------- dense circuits


def dense_encrypt_circuit(state: StateVector, p: int, b: int, t: int, rng) -> StateVector:
    """Encryption as an ancilla circuit on a dense Z_r x Z_q^n state.

    An ancilla in |1> goes through QFT_p^{-1}, giving sum_k w_p^{-k}|k>; adding
    b t j into it kicks back w_p^{b t j}; the ancilla is then measured away.
    """
    work = append_register(state, p, 1)
    work = qft_apply(work, len(work.space) - 1, "inverse")
    last = len(work.space) - 1
    work = permute_basis(work, lambda idx: idx[:last] + ((idx[last] + b * t * idx[0]) % p,))
    _, out = discard_register(work, last, rng)
    return out


def dense_decrypt_state(state: StateVector, sk: ZqVector, rng) -> StateVector:
    """S_s, discard the second register, inverse QFT_r; returns the pre-measurement state."""
    work = apply_multiply_add(state, sk, -1)
    for reg in range(len(work.space) - 1, 0, -1):
        _, work = discard_register(work, reg, rng)
    return qft_apply(work, 0, "inverse")


def dense_decrypt(state: StateVector, sk: ZqVector, rng) -> int:
    k, _ = measure_register(dense_decrypt_state(state, sk, rng), 0, rng)
    return int(k != 0)


def expected_outcome(params: EdcpParams, b: int, t: int) -> int:
    """b t r / p mod r, the basis state honest decryption lands on."""
    return (b * t * params.r // params.p) % params.r

