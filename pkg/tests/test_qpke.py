import math

import numpy as np
import pytest

from edcplab import coset, denseref, qpke
from edcplab.coset import Challenger, EdcpParams
from edcplab.errors import BadParams, ParamMismatch, StateAlreadyConsumed
from edcplab.modmath import ZqVector
from edcplab.statevec import equal_up_to_phase, register_probabilities


def keys_with(params, secret, seed=0):
    ch = Challenger(params, np.random.default_rng(seed), secret)
    return qpke.KeyPair(ch.reveal(), ch.sample(), params, ch)


@pytest.mark.parametrize("args", [(1, 12, 2, 2), (1, 8, 8, 2), (1, 9, 6, 3), (1, 8, 3, 2)])
def test_check_params_rejects(args):
    with pytest.raises(BadParams):
        qpke.check_params(EdcpParams(*args))


def test_keygen_examples():
    rng = np.random.default_rng(0)
    keys = qpke.keygen(EdcpParams(2, 8, 2, 2), rng)
    assert keys.public.count == 2 and keys.public.phase_is_trivial()
    keys = qpke.keygen(EdcpParams(1, 9, 3, 3), rng)
    assert keys.public.count == 3
    amps = np.abs(coset.to_dense(keys.public).amps)
    nonzero = amps[amps > 1e-12]
    assert nonzero.size == 3
    np.testing.assert_allclose(nonzero, 1 / math.sqrt(3), atol=1e-12)


def test_public_copies_have_independent_offsets():
    keys = qpke.keygen(EdcpParams(1, 27, 9, 3), np.random.default_rng(1))
    offsets = {keys.fresh_public().offset.coords for _ in range(20)}
    assert len(offsets) > 1


def test_encrypt_zero_leaves_the_state_alone():
    keys = keys_with(EdcpParams(1, 9, 3, 3), [4])
    ref = keys.fresh_public()
    same = coset.CosetState(**{k: getattr(ref, k) for k in ("params", "size", "offset", "shift", "stride", "base", "count")}, _challenger=keys.challenger)
    ct = qpke.encrypt(ref, 0, np.random.default_rng(0))
    assert ct.state == same


def test_p2_instantiation_uses_odd_t():
    params = EdcpParams(2, 8, 2, 2)
    rng = np.random.default_rng(2)
    assert {qpke.sample_t(params, rng) for _ in range(50)} == {1}
    ct = qpke.encrypt(keys_with(params, [1, 6]).public, 1, rng)
    assert ct.state.phase == (2, 1)
    params = EdcpParams(1, 16, 4, 2)
    assert {qpke.sample_t(params, rng) for _ in range(200)} == {1, 3}


def test_p3_phase_slope_is_t():
    params = EdcpParams(1, 9, 3, 3)
    rng = np.random.default_rng(3)
    seen = set()
    for _ in range(40):
        ct = qpke.encrypt(keys_with(params, [5]).public, 1, rng)
        seen.add(ct.state.phase)
    assert seen == {(3, 1), (3, 2)}


def test_public_key_is_single_use():
    keys = keys_with(EdcpParams(1, 8, 2, 2), [3])
    rng = np.random.default_rng(0)
    qpke.encrypt(keys.public, 1, rng)
    with pytest.raises(StateAlreadyConsumed):
        qpke.encrypt(keys.public, 0, rng)


def test_encrypt_bits_uses_one_copy_per_bit():
    keys = keys_with(EdcpParams(1, 8, 2, 2), [3])
    issued = keys.challenger.samples_issued
    cts = qpke.encrypt_bits(keys, [1, 0, 1], np.random.default_rng(0))
    assert keys.challenger.samples_issued - issued == 3
    assert [qpke.decrypt(keys.secret, c, np.random.default_rng(1)) for c in cts] == [1, 0, 1]


def test_ancilla_circuit_matches_symbolic_encryption():
    params = EdcpParams(1, 27, 9, 3)
    for t in (1, 2, 4, 5):
        dense = denseref.gen_state([5], [2], 9, 27)
        circuit = qpke.dense_encrypt_circuit(dense, 3, 1, t, np.random.default_rng(0))
        state = coset.adversary_phase(coset.CosetState(params, 9, ZqVector(27, (2,)), (0,), 1, 0, 9, _challenger=Challenger(params, np.random.default_rng(0), [5])), 3, t)
        assert equal_up_to_phase(coset.to_dense(state), circuit)


@pytest.mark.parametrize("args, t", [((1, 9, 3, 3), 2), ((1, 8, 4, 2), 1), ((1, 8, 4, 2), 3), ((1, 27, 9, 3), 4)])
def test_decryption_lands_on_btr_over_p(args, t):
    params = EdcpParams(*args)
    rng = np.random.default_rng(0)
    for b in (0, 1):
        dense = denseref.gen_state([5], [1], params.r, params.q, params.p, b * t)
        pre = qpke.dense_decrypt_state(dense, ZqVector(params.q, (5,)), rng)
        probs = register_probabilities(pre, 0)
        want = qpke.expected_outcome(params, b, t)
        assert probs[want] >= 1 - 1e-9
        assert (want != 0) == bool(b)


def test_examples_of_decryption_outcomes():
    assert qpke.expected_outcome(EdcpParams(1, 9, 3, 3), 1, 2) == 2
    assert all(qpke.expected_outcome(EdcpParams(1, 8, 4, 2), 1, t) == 2 for t in (1, 3))


def test_symbolic_and_dense_decryption_agree():
    rng = np.random.default_rng(4)
    params = EdcpParams(2, 8, 4, 2)
    for _ in range(20):
        keys = qpke.keygen(params, rng)
        b = int(rng.integers(2))
        ct = qpke.encrypt(keys.public, b, rng)
        dense = coset.to_dense(ct.state)
        assert qpke.dense_decrypt(dense, keys.secret, rng) == b
        assert qpke.decrypt(keys.secret, ct, rng) == b


@pytest.mark.parametrize("args", [(2, 8, 2, 2), (1, 27, 9, 3), (1, 9, 3, 3), (3, 16, 4, 2)])
def test_roundtrip_never_fails(args):
    params = EdcpParams(*args)
    rng = np.random.default_rng(5)
    assert all(qpke.roundtrip_trial(params, b, rng) for b in (0, 1) for _ in range(500))


def test_wrong_key_statistics():
    # S_{s'} leaves |j>|x + j(s - s')>; with s - s' a unit the j branches
    # decohere, so the outcome is uniform and decrypt returns 1 w.p. 1 - 1/r
    # for either bit.
    params = EdcpParams(1, 27, 9, 3)
    rng = np.random.default_rng(6)
    trials = 4000
    for b in (0, 1):
        ones = 0
        for _ in range(trials):
            keys = qpke.keygen(params, rng)
            wrong = ZqVector(27, (keys.secret[0] + 1,))
            ones += qpke.decrypt(wrong, qpke.encrypt(keys.public, b, rng), rng)
        assert abs(ones / trials - (1 - 1 / 9)) < 4 / math.sqrt(trials)


def test_ciphertexts_look_alike_in_the_computational_basis():
    params = EdcpParams(1, 27, 9, 3)
    keys = keys_with(params, [5])
    x = ZqVector(27, (3,))
    sa = coset.CosetState(params, 9, x, (0,), 1, 0, 9, _challenger=keys.challenger)
    sb = coset.CosetState(params, 9, x, (0,), 1, 0, 9, _challenger=keys.challenger)
    ca = qpke.encrypt(sa, 0, np.random.default_rng(1))
    cb = qpke.encrypt(sb, 1, np.random.default_rng(1))
    np.testing.assert_allclose(coset.to_dense(ca.state).probabilities(), coset.to_dense(cb.state).probabilities(), atol=1e-12)
    assert coset.full_distribution(ca.state) == pytest.approx(coset.full_distribution(cb.state))


def test_ciphertext_measurement_frequencies_match():
    params = EdcpParams(1, 8, 4, 2)
    keys = keys_with(params, [3])
    rng = np.random.default_rng(7)
    trials = 10_000
    counts = {0: np.zeros(4), 1: np.zeros(4)}
    for b in (0, 1):
        for _ in range(trials):
            ct = qpke.encrypt(keys.fresh_public(), b, rng)
            counts[b][coset.measure_full(ct.state, rng)[0]] += 1
    tv = 0.5 * np.abs(counts[0] - counts[1]).sum() / trials
    assert tv < 4 / math.sqrt(trials)


def test_decrypt_rejects_mismatched_key():
    keys = keys_with(EdcpParams(1, 8, 2, 2), [3])
    ct = qpke.encrypt(keys.public, 1, np.random.default_rng(0))
    with pytest.raises(ParamMismatch):
        qpke.decrypt(ZqVector(9, (3,)), ct, np.random.default_rng(0))
