import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edcplab import coset, denseref
from edcplab.acceptance import reduction_ensemble, run_random_program
from edcplab.coset import Challenger, CosetState, EdcpParams, compose_phase
from edcplab.errors import BadParams, IncompatiblePhaseModulus, StateAlreadyConsumed
from edcplab.modmath import ZqVector
from edcplab.statevec import density_from_ensemble, equal_up_to_phase, trace_distance


def fixed_state(params, s, x, t=None):
    ch = Challenger(params, np.random.default_rng(0), s)
    state = CosetState(params, params.r, ZqVector(params.q, tuple(x)), (0,) * params.n, 1, 0, params.r, _challenger=ch)
    if t:
        state = coset.adversary_phase(state, params.p, t)
    return state


# ---------------------------------------------------------------- params and sampling


def test_params_validation():
    with pytest.raises(BadParams):
        EdcpParams(1, 4, 5, 2)
    with pytest.raises(BadParams):
        EdcpParams(1, 12, 2, 5)
    assert EdcpParams.make(1, 12, 2).p == 2
    assert EdcpParams.make(2, 8, 4).dense_dim == 4 * 64


def test_sample_without_phase_is_the_same_as_t_zero():
    params = EdcpParams.make(1, 9, 3)
    a = Challenger(params, np.random.default_rng(5), [4]).sample()
    b = Challenger(params, np.random.default_rng(5), [4]).sample(0)
    assert a == b
    assert a.phase_is_trivial() and a.support == (1, 0, 3)


def test_sample_rejects_bad_phase():
    ch = Challenger(EdcpParams.make(1, 9, 3), np.random.default_rng(0))
    with pytest.raises(ValueError):
        coset.sample(ch, 3)


def test_dense_image_of_a_fresh_sample():
    params = EdcpParams(1, 4, 2, 2)
    dense = coset.to_dense(fixed_state(params, [3], [1]))
    amps = np.zeros((2, 4))
    amps[0, 1] = amps[1, 0] = 2**-0.5
    np.testing.assert_allclose(dense.tensor(), amps, atol=1e-12)


def test_dense_image_with_phase():
    params = EdcpParams(1, 4, 2, 2)
    dense = coset.to_dense(fixed_state(params, [3], [1], t=1))
    assert dense.tensor()[0, 1] == pytest.approx(2**-0.5)
    assert dense.tensor()[1, 0] == pytest.approx(-(2**-0.5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_sample_matches_gen_circuit(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.choice([4, 6, 8, 9]))
    n = int(rng.integers(1, 3))
    r = int(rng.integers(1, q + 1))
    params = EdcpParams.make(n, q, r)
    ch = Challenger(params, rng)
    t = int(rng.integers(params.p))
    state = coset.sample(ch, t)
    dense = coset.to_dense(state)
    assert abs(dense.norm() - 1) < 1e-12
    want = denseref.gen_state(ch.reveal().coords, state.offset.coords, r, q, params.p, t)
    assert equal_up_to_phase(dense, want)


def test_fresh_ensemble_matches_dense_rho():
    params = EdcpParams.make(1, 8, 4)
    ch = Challenger(params, np.random.default_rng(0), [5])
    members = [(1 / 8, coset.to_dense(fixed_state(params, [5], [x]))) for x in range(8)]
    rho = density_from_ensemble(members)
    assert trace_distance(rho, denseref.ensemble_density([5], 4, 8)) < 1e-9
    assert ch.samples_issued == 0


# ---------------------------------------------------------------- single use


def test_states_are_single_use():
    ch = Challenger(EdcpParams.make(1, 9, 3), np.random.default_rng(0))
    state = coset.sample(ch)
    coset.measure_full(state, np.random.default_rng(1))
    assert state.consumed
    with pytest.raises(StateAlreadyConsumed):
        coset.measure_second(state, np.random.default_rng(1))
    with pytest.raises(StateAlreadyConsumed):
        coset.adversary_phase(state, 3, 1)


# ---------------------------------------------------------------- phases


def test_compose_phase_normalizes():
    assert compose_phase(1, 0, 2, 1, 64) == (2, 1)
    assert compose_phase(4, 2, 2, 1, 64) == (1, 0)
    assert compose_phase(3, 1, 4, 1, 64) == (12, 7)
    with pytest.raises(IncompatiblePhaseModulus):
        compose_phase(5, 1, 7, 1, 20)


def test_phase_examples():
    params = EdcpParams(1, 8, 4, 2)
    base = fixed_state(params, [3], [1])
    same = coset.adversary_phase(base, 8, 0, intercept=5)
    assert same.phase_is_trivial()
    enc = coset.adversary_phase(fixed_state(params, [3], [1]), 2, 1)
    assert enc.phase == (2, 1)
    # a phase w_8^{a j} after w_2^{j}: slope 4 + a over modulus 8
    both = coset.adversary_phase(enc, 8, 3)
    assert both.phase == (8, 7)


def test_register_dependent_phase_with_matching_guess_is_global():
    # U_{c,y}: w_p^{(y_1 - j g) c}; on |j>|x + j s> this is w_p^{(x_1 + j(s_1 - g)) c}
    p, q, r = 3, 9, 3
    params = EdcpParams(1, q, r, p)
    s = [7]
    for c in range(1, p):
        guessed = coset.adversary_phase(fixed_state(params, s, [2]), p, -(s[0] % p) * c, 0, [c])
        assert guessed.phase_is_trivial()
        wrong = coset.adversary_phase(fixed_state(params, s, [2]), p, -((s[0] + 1) % p) * c, 0, [c])
        assert not wrong.phase_is_trivial()


# ---------------------------------------------------------------- reduction


def test_reduce_r_examples():
    params = EdcpParams(1, 8, 4, 2)
    rng = np.random.default_rng(0)
    ok, out = coset.reduce_r(fixed_state(params, [3], [1]), 4, rng)
    assert ok and out == fixed_state(params, [3], [1])
    dist = coset.reduce_r_distribution(fixed_state(params, [3], [1]), 2)
    assert sum(w for a, w in dist.items() if a < 2) == pytest.approx(1.0)
    dist = coset.reduce_r_distribution(fixed_state(params, [3], [1]), 3)
    assert dist[1] == pytest.approx(0.75)


@pytest.mark.parametrize("r", range(2, 9))
def test_reduce_r_ensemble_is_the_smaller_problem(r):
    params = EdcpParams.make(1, 8, r)
    ch = Challenger(params, np.random.default_rng(0), [3])
    for target in range(1, r + 1):
        got = reduction_ensemble(ch, target)
        assert trace_distance(got, denseref.ensemble_density([3], target, 8)) < 1e-9


def test_reduce_r_matches_dense_per_outcome():
    params = EdcpParams.make(2, 4, 4)
    for target in (1, 2, 3):
        for a in coset.reduce_r_distribution(fixed_state(params, [1, 2], [3, 0]), target):
            ok, sym, _ = coset.reduce_r_detailed(fixed_state(params, [1, 2], [3, 0]), target, None, a)
            dense = denseref.gen_state([1, 2], [3, 0], 4, 4)
            ok_d, out_d, _ = denseref.reduce_r(dense, target, None, a)
            assert ok == ok_d
            if ok:
                assert equal_up_to_phase(coset.to_dense(sym), out_d)


def test_reduce_r_sample_cost():
    rng = np.random.default_rng(1)
    ch = Challenger(EdcpParams.make(1, 16, 16), rng)
    for target in (3, 5, 9, 11):
        runs = 2000
        attempts = [coset.reduce_r_retry(ch, target, rng)[1] for _ in range(runs)]
        mean, sd = float(np.mean(attempts)), float(np.std(attempts))
        assert mean <= 2 + 3 * sd / math.sqrt(runs)


# ---------------------------------------------------------------- measurements


def test_project_j_mod_examples():
    params = EdcpParams(1, 8, 4, 2)
    rng = np.random.default_rng(0)
    same = coset.project_j_mod(fixed_state(params, [3], [1]), 2, 0, rng)
    assert same.support == (1, 0, 4)
    dist = coset.affine_distribution(fixed_state(params, [3], [1]), 1, None, 0, 2)
    assert dist == {0: pytest.approx(0.5), 1: pytest.approx(0.5)}
    out = coset.project_j_mod(fixed_state(params, [3], [1]), 2, 1, rng, 1)
    assert out.support == (2, 1, 2) and out.level.c == 1
    single = coset.project_j_mod(fixed_state(params, [3], [1]), 2, 2, rng, 3)
    assert single.count == 1
    dense = coset.to_dense(single)
    assert np.count_nonzero(np.abs(dense.amps) > 1e-12) == 1


def test_strided_support_has_m_amplitudes():
    params = EdcpParams(1, 9, 9, 3)
    out = coset.project_j_mod(fixed_state(params, [4], [0]), 3, 1, np.random.default_rng(0), 2)
    assert np.count_nonzero(np.abs(coset.to_dense(out).amps) > 1e-12) == out.count == 3


def test_measure_full_examples():
    params = EdcpParams(1, 4, 2, 2)
    assert coset.full_distribution(fixed_state(params, [3], [1])) == {(0, (1,)): pytest.approx(0.5), (1, (0,)): pytest.approx(0.5)}
    state = fixed_state(params, [3], [1])
    out = coset.project_j_mod(state, 2, 1, np.random.default_rng(0), 1)
    assert coset.measure_full(out, np.random.default_rng(2))[0] == 1


def test_measure_full_uniform_over_support():
    ch = Challenger(EdcpParams.make(1, 16, 7), np.random.default_rng(3))
    rng = np.random.default_rng(4)
    trials = 10_000
    counts = np.bincount([coset.measure_full(coset.sample(ch), rng)[0] for _ in range(trials)], minlength=7)
    assert np.abs(counts / trials - 1 / 7).max() < 4 / math.sqrt(trials)


def test_second_register_measurement_leaves_one_j_when_s_is_a_unit():
    params = EdcpParams.make(1, 9, 3)
    y, out = coset.measure_second(fixed_state(params, [4], [2]), np.random.default_rng(0))
    assert out.count == 1


def test_fourier_measure_second_matches_dense():
    params = EdcpParams.make(2, 4, 4)
    rng = np.random.default_rng(0)
    state = fixed_state(params, [1, 2], [3, 0])
    dense = coset.to_dense(state)
    u, reg = coset.fourier_measure_second(state, rng)
    _, dreg = denseref.fourier_measure_second(dense, rng, u.coords)
    assert equal_up_to_phase(reg.to_dense(), dreg)
    for direction in ("forward", "inverse"):
        np.testing.assert_allclose(
            coset.register_fourier_distribution(reg, direction), denseref.register_fourier_distribution(dreg, direction), atol=1e-12
        )


def test_random_programs_agree_with_dense_engine():
    rng = np.random.default_rng(123)
    for _ in range(40):
        tv, mismatch, names = run_random_program(rng)
        assert tv < 1e-9, names
        assert mismatch == 0, names
