import math

import numpy as np
import pytest

from edcplab import coset, reductions
from edcplab.coset import Challenger, CosetState, EdcpParams
from edcplab.errors import LevelOverflow, NoGapFound, SampleBudgetExhausted
from edcplab.modmath import ZqVector
from edcplab.reductions import DecisionOracle


def fixed_state(params, s, x, ch=None):
    ch = ch or Challenger(params, np.random.default_rng(0), s)
    return CosetState(params, params.r, ZqVector(params.q, tuple(x)), (0,) * params.n, 1, 0, params.r, _challenger=ch)


# ---------------------------------------------------------------- amplification


def test_amplify_sample_count():
    calls = []
    verdict = reductions.amplify(lambda v: v, 2, 4, lambda: calls.append(1) or 1)
    assert len(calls) == 32 and verdict
    assert reductions.amplification_count(0.5, 8) == 64


def test_amplify_perfect_base_is_always_right():
    rng = np.random.default_rng(0)
    for _ in range(50):
        truth = bool(rng.integers(2))
        assert reductions.amplify(lambda v: v, 2, 3, lambda: int(truth)) == truth


def test_amplify_error_rate_with_weak_base():
    rng = np.random.default_rng(1)
    p_n, n, meta = 4, 16, 1000
    wrong = 0
    for _ in range(meta):
        truth = bool(rng.integers(2))
        bias = 0.5 + (0.5 if truth else -0.5) / p_n
        wrong += reductions.amplify(lambda v: v, p_n, n, lambda: int(rng.random() < bias)) != truth
    bound = math.exp(-n / 4)
    assert wrong / meta <= bound + 3 * math.sqrt(bound * (1 - bound) / meta)


def test_amplify_budget():
    with pytest.raises(SampleBudgetExhausted):
        reductions.amplify(lambda v: v, 4, 4, lambda: 1, budget=10)
    oracle = reductions.perfect_coset_oracle(budget=1)
    ch = Challenger(EdcpParams.make(1, 9, 3), np.random.default_rng(0))
    oracle(coset.sample(ch), None)
    with pytest.raises(SampleBudgetExhausted):
        oracle(coset.sample(ch), None)


# ---------------------------------------------------------------- hybrid levels


def test_r_prime_choice():
    assert reductions.choose_r_prime(EdcpParams.make(1, 9, 3)) == 3
    assert reductions.choose_r_prime(EdcpParams.make(1, 36, 2)) == 2
    assert reductions.choose_r_prime(EdcpParams.make(1, 36, 9)) == 3
    with pytest.raises(ValueError):
        reductions.check_r_prime(EdcpParams.make(1, 36, 9), 4)


def test_critical_level_with_perfect_oracle():
    rng = np.random.default_rng(2)
    ch = Challenger(EdcpParams.make(1, 9, 3), rng)
    crit = reductions.find_critical_t(
        reductions.perfect_coset_oracle(), lambda k: reductions.level_sample(ch, 3, 3, k, rng), 1, rng
    )
    assert crit.t == 1 and crit.rates == [1.0, 0.0]


def test_critical_level_with_synthetic_oracle():
    # "states" are the level numbers; the oracle only sees past level 2
    oracle = DecisionOracle("synthetic", lambda level, rng: int(level < 2))
    rng = np.random.default_rng(3)
    assert reductions.find_critical_t(oracle, lambda k: k, 3, rng).t == 2
    assert reductions.find_critical_t(oracle, lambda k: k + 1, 1, rng).t == 1


def test_critical_level_needs_a_gap():
    oracle = DecisionOracle("blind", lambda level, rng: 1)
    with pytest.raises(NoGapFound):
        reductions.find_critical_t(oracle, lambda k: k, 2, np.random.default_rng(0))


@pytest.mark.parametrize("a, accept", [(0, False), (1, False), (2, True)])
def test_digit_test_examples(a, accept):
    params = EdcpParams.make(1, 9, 3)
    rng = np.random.default_rng(4)
    oracle = reductions.perfect_coset_oracle()
    for x in range(9):
        state = fixed_state(params, [5], [x])
        assert reductions.hybrid_digit_test(state, 0, 1, a, oracle, rng, t=1) == accept


def test_digit_test_branches_give_the_neighbouring_levels():
    params = EdcpParams.make(1, 9, 3)
    rng = np.random.default_rng(5)
    state = fixed_state(params, [5], [4])
    _, same = reductions.digit_measurement(state, 0, 1, 2, 0, 1, 3, 2, rng)
    assert same.support == (1, 0, 3)
    state = fixed_state(params, [5], [4])
    _, thin = reductions.digit_measurement(state, 0, 1, 0, 0, 1, 3, 2, rng)
    assert thin.count == 1
    # second digit: 5 = 2 + 1*3
    ch = Challenger(EdcpParams.make(1, 27, 9), rng, [5])
    lvl = coset.project_j_mod(fixed_state(ch.params, [5], [0], ch), 3, 1, rng, 0)
    _, out = reductions.digit_measurement(lvl, 0, 2, 1, 2, 2, 3, 3, rng)
    assert out.count == lvl.count


def test_digit_test_level_overflow():
    params = EdcpParams.make(1, 9, 3)
    with pytest.raises(LevelOverflow):
        reductions.hybrid_digit_test(fixed_state(params, [5], [0]), 0, 2, 0, reductions.perfect_coset_oracle(), np.random.default_rng(0), t=2)


# ---------------------------------------------------------------- search


@pytest.mark.parametrize("args", [(1, 9, 3), (1, 36, 2), (2, 8, 2), (1, 27, 9), (1, 8, 5), (2, 4, 2)])
def test_hybrid_search_recovers_secret(args):
    rng = np.random.default_rng(6)
    for _ in range(10):
        ch = Challenger(EdcpParams.make(*args), rng)
        res = reductions.search_via_hybrid(reductions.perfect_coset_oracle(), ch, rng)
        assert res.secret == ch.reveal()
        assert res.samples_used == ch.samples_issued


def test_hybrid_search_example_secret():
    rng = np.random.default_rng(7)
    ch = Challenger(EdcpParams.make(1, 9, 3), rng, [5])
    assert reductions.search_via_hybrid(reductions.perfect_coset_oracle(), ch, rng).secret.coords == (5,)


def test_hybrid_search_with_statistical_oracle():
    rng = np.random.default_rng(8)
    params = EdcpParams.make(1, 4, 2)
    ch = Challenger(params, rng)
    res = reductions.search_via_hybrid(reductions.statistical_coset_oracle(params), ch, rng)
    assert res.secret == ch.reveal()


def test_fourier_completion_from_partial_secret():
    rng = np.random.default_rng(9)
    ch = Challenger(EdcpParams.make(2, 8, 4), rng)
    s = ch.reveal()
    partial = ZqVector(2, tuple(c % 2 for c in s.coords))
    assert reductions.fourier_completion(ch, partial, 2, rng) == s


def test_verify_candidate():
    rng = np.random.default_rng(10)
    ch = Challenger(EdcpParams.make(2, 9, 3), rng)
    s = ch.reveal()
    assert reductions.verify_candidate(ch, s, rng)
    assert not reductions.verify_candidate(ch, s + ZqVector(9, (1, 0)), rng)


def test_phase_transform_with_right_guess_is_global():
    params = EdcpParams(1, 9, 3, 3)
    for y in range(3):
        for c in (1, 2):
            out = reductions.phase_digit_transform(fixed_state(params, [7], [2]), 0, 0, y, c, 0, 3)
            assert out.phase_is_trivial() == (y == 7 % 3)


@pytest.mark.parametrize("args", [(1, 4, 2), (1, 6, 2), (2, 12, 3), (1, 9, 3)])
def test_phase_search_recovers_secret(args):
    rng = np.random.default_rng(11)
    for _ in range(10):
        ch = Challenger(EdcpParams.make(*args), rng)
        assert reductions.search_via_phase(reductions.perfect_phase_oracle(), ch, rng).secret == ch.reveal()


# ---------------------------------------------------------------- LWE extraction


def dense_extraction_law(q, r, lam, s, x, t):
    """P(-u, y) from the reshaped state and a forward QFT on both registers (n = 1)."""
    h = (r - 1) // 2
    j = np.arange(r)
    eps = np.array([math.exp(-math.pi * (v - h) ** 2 / lam**2) for v in j]) / math.sqrt(r)
    w = np.exp(2j * np.pi / q)
    out = {}
    total = 0.0
    for y in range(q):
        for u in range(q):
            amp = np.sum(eps * w ** ((t * j) % q) * w ** (((j - h) * y) % q) * w ** ((u * (x + j * s)) % q)) / q
            out[((-u) % q,), y] = abs(amp) ** 2
            total += abs(amp) ** 2
    return {k: v / total for k, v in out.items()}, float(np.sum(eps**2))


@pytest.mark.parametrize("t", [0, 3])
def test_extraction_law_matches_dense_pipeline(t):
    q, r, lam, s, x = 11, 5, 3.0, 4, 7
    params = EdcpParams(1, q, r, q)
    ch = Challenger(params, np.random.default_rng(0), [s])
    state = coset.adversary_phase(fixed_state(params, [s], [x], ch), q, t) if t else fixed_state(params, [s], [x], ch)
    want, norm = dense_extraction_law(q, r, lam, s, x, t)
    got = reductions.extraction_distribution(state, lam)
    assert max(abs(got[k] - want[k]) for k in want) < 1e-12
    assert reductions.extraction_success_probability(r, lam) == pytest.approx(norm)


def test_extraction_samples_follow_the_law():
    q, r, lam = 11, 5, 3.0
    params = EdcpParams(1, q, r, q)
    rng = np.random.default_rng(12)
    ch = Challenger(params, rng, [4])
    law = reductions.extraction_distribution(fixed_state(params, [4], [0], ch), lam)
    counts = {}
    wins, attempts = 0, 10_000
    for _ in range(attempts):
        ok, smp = reductions.extract_shifted_lwe(coset.sample(ch), lam, rng)
        if ok:
            wins += 1
            key = (smp.a.coords, smp.b)
            counts[key] = counts.get(key, 0) + 1
            assert not smp.shifted
    tv = 0.5 * sum(abs(counts.get(k, 0) / wins - v) for k, v in law.items())
    assert tv < 4 / math.sqrt(wins) * 3
    norm = reductions.extraction_success_probability(r, lam)
    assert abs(wins / attempts - norm) <= 3 * math.sqrt(norm * (1 - norm) / attempts)


def test_unshifted_extraction_gives_plain_lwe():
    q = 97
    params = EdcpParams(1, q, 9, q)
    rng = np.random.default_rng(13)
    ch = Challenger(params, rng)
    s = ch.reveal()
    errors = []
    while len(errors) < 300:
        ok, smp = reductions.extract_shifted_lwe(coset.sample(ch), 9.0, rng)
        if ok:
            e = (smp.b - smp.a.dot(s.coords)) % q
            errors.append(e if e <= q // 2 else e - q)
    # sigma = q / lambda ~ 10.8; a plain sample has its error centred at 0
    assert abs(np.mean(errors)) < 3
    assert np.max(np.abs(errors)) < 48


def test_shifted_extraction_carries_the_shift():
    q = 97
    params = EdcpParams(1, q, 9, q)
    rng = np.random.default_rng(14)
    ch = Challenger(params, rng)
    s = ch.reveal()
    errors = []
    while len(errors) < 300:
        ok, smp = reductions.extract_shifted_lwe(coset.sample(ch, 40), 9.0, rng)
        if ok:
            assert smp.shifted
            e = (smp.b - smp.a.dot(s.coords) + 40) % q
            errors.append(e if e <= q // 2 else e - q)
    assert abs(np.mean(errors)) < 3


def test_extraction_mode_checks():
    rng = np.random.default_rng(15)
    ch = Challenger(EdcpParams.make(1, 12, 4), rng)
    with pytest.raises(ValueError):
        reductions.extract_shifted_lwe(coset.sample(ch), 2.0, rng)
    with pytest.raises(ValueError):
        reductions.extract_shifted_lwe(coset.sample(ch), 2.0, rng, mode="mod_p")


def test_mod_p_extraction_errors_are_small():
    params = EdcpParams(1, 21, 7, 7)
    rng = np.random.default_rng(16)
    ch = Challenger(params, rng)
    s = ch.reveal()[0] % 7
    law = None
    errors = []
    for _ in range(4000):
        t = int(rng.integers(7))
        ok, smp = reductions.extract_shifted_lwe(coset.sample(ch, t), 5.0, rng, mode="mod_p")
        if ok:
            assert smp.a.q == 7
            e = (smp.b - smp.a[0] * s + t) % 7
            errors.append(e if e <= 3 else e - 7)
    hist = np.bincount(np.array(errors) % 7, minlength=7) / len(errors)
    assert hist[0] == hist.max()
