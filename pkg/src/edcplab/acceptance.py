"""The acceptance checks, shared by the test suite and ``edcplab selftest``.

Each check takes a ``scale`` factor for its trial counts (1.0 reproduces the
stated counts) and a seed. Tolerances that are binomial 3-sigma bounds are
recomputed from the actual trial count, so they coincide with the stated
values at scale 1.0; fixed thresholds stay fixed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import attacks, coset, denseref, infotheory, qpke, reductions
from .coset import Challenger, CosetState, EdcpParams
from .errors import IncompatiblePhaseModulus
from .modmath import ZqVector, wrapped_gaussian_pmf
from .statevec import DensityOperator, density_from_ensemble, equal_up_to_phase, trace_distance


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self, timing: bool = False) -> str:
        mark = "PASS" if self.passed else "FAIL"
        tail = f" ({self.seconds:.1f}s)" if timing else ""
        return f"[{mark}] {self.number:2d} {self.name}: {self.detail}{tail}"


def _count(full: int, scale: float, floor: int = 1) -> int:
    return max(floor, int(round(full * scale)))


# ---------------------------------------------------------------- 1 correctness


def check_correctness(scale: float = 1.0, seed: int = 1) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    trials = _count(10_000, scale, 100)
    start = time.perf_counter()
    parts = []
    failures = 0
    for args in [(2, 8, 2, 2), (1, 27, 9, 3)]:
        params = EdcpParams(*args)
        for b in (0, 1):
            bad = sum(not qpke.roundtrip_trial(params, b, rng) for _ in range(trials))
            failures += bad
            parts.append(f"{args} b={b}: {bad}/{trials} failures")
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed <= 30.0
    return ok, "; ".join(parts) + ("; within" if elapsed <= 30.0 else "; OVER") + " the 30s limit"


# ---------------------------------------------------------------- 2, 3 spectra and chi

INFO_PARAMS = [(1, 4, 2), (1, 9, 3), (2, 4, 2)]


def check_spectrum(scale: float = 1.0, seed: int = 2) -> tuple[bool, str]:
    parts = []
    ok = True
    for n, q, r in INFO_PARAMS:
        good = infotheory.spectrum_check(EdcpParams.make(n, q, r), 1e-7)
        ok &= good
        parts.append(f"(n={n},q={q},r={r}) {'ok' if good else 'mismatch'}")
    return ok, "; ".join(parts)


def check_holevo(scale: float = 1.0, seed: int = 3) -> tuple[bool, str]:
    parts = []
    ok = True
    for n, q, r in INFO_PARAMS:
        rep = infotheory.holevo_chi(EdcpParams.make(n, q, r), 1)
        err = abs(rep.chi_numeric - rep.chi_closed_form)
        ok &= err <= 1e-8
        parts.append(f"(n={n},q={q},r={r}) chi={rep.chi_numeric:.10f} closed={rep.chi_closed_form:.10f}")
    return ok, "; ".join(parts)


# ---------------------------------------------------------------- 4 self-reduction


def _fresh(ch: Challenger, x) -> CosetState:
    p = ch.params
    return CosetState(p, p.r, ZqVector(p.q, tuple(x)), (0,) * p.n, 1, 0, p.r, _challenger=ch)


def reduction_ensemble(ch: Challenger, target: int) -> DensityOperator:
    """Exact post-selected output ensemble of reduce_r, enumerating x and outcomes."""
    params = ch.params
    members = []
    offsets = list(np.ndindex(*(params.q,) * params.n))
    dist = coset.reduce_r_distribution(_fresh(ch, offsets[0]), target)
    wins = {a: w for a, w in dist.items() if (a == 1 if 2 * target > params.r else a < params.r // target)} or {None: 1.0}
    total = sum(wins.values())
    for x in offsets:
        for a, w in wins.items():
            ok, out, _ = coset.reduce_r_detailed(_fresh(ch, x), target, None, a)
            members.append((w / total / len(offsets), coset.to_dense(out)))
    return density_from_ensemble(members)


def check_self_reduction(scale: float = 1.0, seed: int = 4) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    trials = _count(10_000, scale, 400)
    sigma = math.sqrt(0.25 / trials)
    worst = (1.0, None)
    for r in range(2, 17):
        ch = Challenger(EdcpParams.make(1, 16, r), rng)
        for rp in range(1, r + 1):
            hits = sum(coset.reduce_r(coset.sample(ch), rp, rng)[0] for _ in range(trials))
            freq = hits / trials
            if freq < worst[0]:
                worst = (freq, (r, rp))
    freq_ok = worst[0] >= 0.5 - 3 * sigma
    max_td = 0.0
    for r in range(2, 9):
        params = EdcpParams.make(1, 8, r)
        for s in (3, 6):
            ch = Challenger(params, rng, [s])
            for rp in range(1, r + 1):
                got = reduction_ensemble(ch, rp)
                want = denseref.ensemble_density([s], rp, 8)
                max_td = max(max_td, trace_distance(got, want))
    ok = freq_ok and max_td < 1e-9
    return ok, (
        f"min success frequency {worst[0]:.4f} at (r,r')={worst[1]} vs bound {0.5 - 3 * sigma:.4f} "
        f"over {trials} trials; max ensemble trace distance {max_td:.2e}"
    )


# ---------------------------------------------------------------- 5, 6 reductions


def _recovery_rate(params_list, search, oracle_factory, instances, rng) -> tuple[int, int, list[str]]:
    hits = total = 0
    parts = []
    for args in params_list:
        params = EdcpParams.make(*args)
        good = 0
        for _ in range(instances):
            ch = Challenger(params, rng)
            try:
                good += search(oracle_factory(), ch, rng).secret == ch.reveal()
            except Exception:  # a failed run counts as a miss
                pass
        hits += good
        total += instances
        parts.append(f"(n={args[0]},q={args[1]},r={args[2]}) {good}/{instances}")
    return hits, total, parts


def check_hybrid_search(scale: float = 1.0, seed: int = 5) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    hits, total, parts = _recovery_rate(
        [(1, 9, 3), (1, 36, 2), (2, 8, 2)], reductions.search_via_hybrid, reductions.perfect_coset_oracle, _count(50, scale, 5), rng
    )
    elapsed = time.perf_counter() - start
    return hits == total and elapsed <= 120, "; ".join(parts) + ("; within" if elapsed <= 120 else "; OVER") + " the 120s limit"


def check_phase_search(scale: float = 1.0, seed: int = 6) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    hits, total, parts = _recovery_rate(
        [(1, 4, 2), (1, 6, 2)], reductions.search_via_phase, reductions.perfect_phase_oracle, _count(50, scale, 5), rng
    )
    return hits == total, "; ".join(parts)


# ---------------------------------------------------------------- 7 LWE extraction


def lwe_error_histogram(attempts: int, rng, n=1, q=97, r=9, lam=9.0) -> tuple[float, np.ndarray]:
    """Run the extractor on phased samples; returns (success rate, error histogram).

    e = b - <a, s> + t is recomputed with the known s and t.
    """
    ch = Challenger(EdcpParams(n, q, r, q), rng)
    s = ch.reveal()
    counts = np.zeros(q)
    wins = 0
    for _ in range(attempts):
        t = int(rng.integers(q))
        ok, smp = reductions.extract_shifted_lwe(coset.sample(ch, t), lam, rng)
        if ok:
            wins += 1
            e = (smp.b - smp.a.dot(s.coords) + t) % q
            counts[e] += 1
    return wins / attempts, counts / max(1, counts.sum())


def check_lwe_extraction(scale: float = 1.0, seed: int = 7) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    attempts = _count(10_000, scale, 10_000)
    rate, hist = lwe_error_histogram(attempts, rng)
    bound = 0.5 * reductions.extraction_success_probability(9, 9.0)
    tv = 0.5 * float(np.abs(hist - np.array(wrapped_gaussian_pmf(97 / 9.0, 97))).sum())
    return rate >= bound and tv <= 0.1, f"success rate {rate:.4f} vs bound {bound:.4f}; error TV {tv:.4f} (limit 0.1) over {attempts} attempts"


# ---------------------------------------------------------------- 8 sieve


def check_sieve(scale: float = 1.0, seed: int = 8) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    trials = _count(10_000, scale, 400)
    ch = Challenger(EdcpParams.make(2, 8, 2), rng)
    hits = 0
    labels_ok = True
    for _ in range(trials):
        a, b = attacks.edcp_to_phase(ch, rng), attacks.edcp_to_phase(ch, rng)
        want = a.label - b.label
        ok, out = attacks.sieve_combine(a, b, rng)
        if ok:
            hits += 1
            labels_ok &= out.label == want
    freq = hits / trials
    tol = 1.5 / math.sqrt(trials)
    return abs(freq - 0.5) <= tol and labels_ok, f"success frequency {freq:.4f} (0.5 +- {tol:.4f}); difference labels {'exact' if labels_ok else 'WRONG'}"


# ---------------------------------------------------------------- 9 attacks


def check_attacks(scale: float = 1.0, seed: int = 9) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    runs = _count(1000, scale, 100)
    params = EdcpParams.make(2, 5, 5)
    good = 0
    for _ in range(runs):
        ch = Challenger(params, rng)
        try:
            good += attacks.fourier_attack_r_eq_q(ch, rng, max_samples=8).value == ch.reveal()
        except Exception:
            pass
    fourier_rate = good / runs
    kruns = _count(50, scale, 10)
    params = EdcpParams.make(2, 16, 2)
    kgood = 0
    for _ in range(kruns):
        ch = Challenger(params, rng)
        try:
            kgood += attacks.kuperberg_recover(ch, 1, 1, rng).value == ch.reveal()[1]
        except Exception:
            pass
    sieve_rate = kgood / kruns
    completeness = max(
        attacks.PrettyGoodMeasurement.build(16, [int(v) for v in rng.integers(0, 16, 5)]).completeness_error()
        for _ in range(10)
    )
    ok = fourier_rate >= 0.99 and sieve_rate >= 0.5 and completeness <= 1e-8
    return ok, (
        f"fourier (n=2,q=r=5, <=8 samples) {fourier_rate:.3f} over {runs}; "
        f"sieve+PGM s_2 (n=2,q=16) {sieve_rate:.2f} over {kruns}; PGM completeness error {completeness:.1e}"
    )


# ---------------------------------------------------------------- 10 equivalence


def _tv(a, b) -> float:
    if isinstance(a, np.ndarray):
        return 0.5 * float(np.abs(a - b).sum())
    return denseref.total_variation(a, b)


def _divisors(v: int) -> list[int]:
    return [d for d in range(2, v + 1) if v % d == 0]


def run_random_program(rng, ops: int = 5) -> tuple[float, float, list[str]]:
    """Run one random program in both engines.

    Returns (largest outcome TV, largest post-state mismatch, op names).
    Every measurement outcome is drawn by the symbolic engine and forced in
    the dense one so the post-states can be compared branch by branch.
    """
    q = int(rng.choice([4, 5, 6, 7, 8, 9]))
    n = 1 if q > 6 else int(rng.integers(1, 3))
    r = int(rng.integers(2, q + 1))
    p = int(rng.choice(EdcpParams.make(n, q, r).modulus.primes))
    params = EdcpParams(n, q, r, p)
    ch = Challenger(params, rng)
    s = ch.reveal().coords
    t = int(rng.integers(p))
    sym = coset.sample(ch, t)
    dense = denseref.gen_state(s, sym.offset.coords, r, q, p, t)
    worst_tv = 0.0
    worst_state = 0.0 if equal_up_to_phase(coset.to_dense(sym), dense) else 1.0
    names = []

    def compare(sym_state, dense_state):
        nonlocal worst_state
        if not equal_up_to_phase(coset.to_dense(sym_state), dense_state):
            worst_state = max(worst_state, 1.0)

    for _ in range(ops):
        choices = ["phase", "multiply_add", "affine", "project", "second", "full", "fourier_second"]
        if sym.stride == 1 and sym.base == 0 and sym.count == sym.size:
            choices.append("reduce")
        op = str(rng.choice(choices))
        names.append(op)
        if op == "phase":
            modulus = int(rng.choice(_divisors(q) + _divisors(sym.size) if sym.size > 1 else _divisors(q)))
            slope, b = int(rng.integers(modulus)), int(rng.integers(modulus))
            w = [int(v) for v in rng.integers(0, q, n)] if q % modulus == 0 else None
            try:
                sym = coset.adversary_phase(sym, modulus, slope, b, w)
            except IncompatiblePhaseModulus:
                names[-1] += "(cap)"
                continue
            dense = denseref.adversary_phase(dense, modulus, slope, b, w)
        elif op == "multiply_add":
            v = [int(c) for c in rng.integers(0, q, n)]
            sign = int(rng.choice([1, -1]))
            sym = coset.apply_multiply_add(sym, v, sign)
            dense = denseref.multiply_add(dense, v, sign)
        elif op in ("affine", "project"):
            if op == "affine":
                modulus = int(rng.choice(_divisors(q)))
                u, b = int(rng.integers(modulus)), int(rng.integers(modulus))
                w = [int(c) for c in rng.integers(0, q, n)]
            else:
                k = int(rng.integers(1, 3))
                modulus, u, b, w = p**k, 1, 0, None
            worst_tv = max(worst_tv, _tv(coset.affine_distribution(sym, u, w, b, modulus), denseref.affine_distribution(dense, u, w, b, modulus)))
            if op == "affine":
                value, sym = coset.measure_affine(sym, u, w, b, modulus, rng)
            else:
                sym = coset.project_j_mod(sym, p, k, rng)
                value = sym.level.c
            _, dense = denseref.measure_affine(dense, u, w, b, modulus, rng, value)
        elif op == "second":
            worst_tv = max(worst_tv, _tv(coset.second_distribution(sym), denseref.second_distribution(dense)))
            y, sym = coset.measure_second(sym, rng)
            _, dense = denseref.measure_second(dense, rng, y.coords)
        elif op == "reduce":
            target = int(rng.integers(1, sym.size + 1))
            sym_dist = coset.reduce_r_distribution(sym, target)
            size = sym.size
            if sym_dist:
                vals = denseref.reduce_r_values(size, target)
                dense_dist = {}
                for j in range(size):
                    dense_dist[int(vals[j])] = dense_dist.get(int(vals[j]), 0.0) + float(np.sum(np.abs(dense.tensor()[j]) ** 2))
                worst_tv = max(worst_tv, _tv(sym_dist, dense_dist))
            ok, sym, a = coset.reduce_r_detailed(sym, target, rng)
            ok_d, dense, _ = denseref.reduce_r(dense, target, rng, a)
            if ok != ok_d:
                worst_state = max(worst_state, 1.0)
            if not ok:
                break
        elif op == "full":
            worst_tv = max(worst_tv, _tv(coset.full_distribution(sym), denseref.full_distribution(dense)))
            break
        elif op == "fourier_second":
            uniform = {tuple(u): q ** (-n) for u in np.ndindex(*(q,) * n)}
            worst_tv = max(worst_tv, _tv(uniform, denseref.fourier_second_distribution(dense)))
            u, reg = coset.fourier_measure_second(sym, rng)
            _, dreg = denseref.fourier_measure_second(dense, rng, u.coords)
            if not equal_up_to_phase(reg.to_dense(), dreg):
                worst_state = max(worst_state, 1.0)
            direction = str(rng.choice(["forward", "inverse"]))
            worst_tv = max(worst_tv, _tv(coset.register_fourier_distribution(reg, direction), denseref.register_fourier_distribution(dreg, direction)))
            break
        compare(sym, dense)
    return worst_tv, worst_state, names


def check_equivalence(scale: float = 1.0, seed: int = 10) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    programs = _count(200, scale, 20)
    bound = 4 / math.sqrt(10_000)
    worst_tv = worst_state = 0.0
    bad = 0
    for _ in range(programs):
        tv, mismatch, _ = run_random_program(rng)
        worst_tv, worst_state = max(worst_tv, tv), max(worst_state, mismatch)
        bad += tv >= bound or mismatch > 0
    return bad == 0, f"{programs - bad}/{programs} programs agree; largest outcome TV {worst_tv:.1e} (limit {bound}); post-states {'match' if worst_state == 0 else 'DIFFER'}"


# ---------------------------------------------------------------- 11 substitutes


def fano_monotone() -> bool:
    ok = True
    for n in (1, 2, 4):
        for q in (4, 16, 256):
            for r in (2, 3, 4):
                if r > q:
                    continue
                ps = [0.1, 0.3, 0.5, 0.9, 0.99, 1.0]
                vals = [infotheory.fano_min_samples(EdcpParams.make(n, q, r), pr) for pr in ps]
                ok &= vals == sorted(vals)
    for pr in (0.5, 1.0):
        # nondecreasing in n log q, nonincreasing in log r
        grid = sorted(((n * math.log2(q), n, q) for n in (1, 2, 3, 4) for q in (4, 8, 16, 256)))
        vals = [infotheory.fano_min_samples(EdcpParams.make(n, q, 2), pr) for _, n, q in grid]
        ok &= all(a <= b for a, b in zip(vals, vals[1:]))
        byr = [infotheory.fano_min_samples(EdcpParams.make(2, 256, r), pr) for r in (2, 4, 16, 64, 256)]
        ok &= byr == sorted(byr, reverse=True)
    return ok


def check_substitutes(scale: float = 1.0, seed: int = 11) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    runs = _count(20, scale, 5)
    params = EdcpParams.make(2, 16, 2)
    ratios = []
    for _ in range(runs):
        ch = Challenger(params, rng)
        try:
            res = attacks.kuperberg_recover(ch, 1, 1, rng)
            ratios.extend(res.extras["survival"])
        except Exception:
            ratios.append(0.0)
    mean = float(np.mean(ratios))
    mono = fano_monotone()
    return mean >= 1 / 8 and mono, (
        f"mean stage survival {mean:.3f} (need >= 0.125) over {runs} sieve runs; "
        f"fano_min_samples monotone: {mono}; asymptotic sieve cost and LWE hardness not measured"
    )


CHECKS: list[tuple[int, str, Callable[..., tuple[bool, str]]]] = [
    (1, "correctness", check_correctness),
    (2, "spectrum", check_spectrum),
    (3, "holevo", check_holevo),
    (4, "self-reduction", check_self_reduction),
    (5, "hybrid search-to-decision", check_hybrid_search),
    (6, "phase search-to-decision", check_phase_search),
    (7, "lwe extraction", check_lwe_extraction),
    (8, "sieve probability", check_sieve),
    (9, "end-to-end attacks", check_attacks),
    (10, "symbolic/dense equivalence", check_equivalence),
    (11, "desk-scale substitutes", check_substitutes),
]


def run_check(number: int, scale: float = 1.0, seed: int | None = None) -> CheckResult:
    num, name, fn = next(c for c in CHECKS if c[0] == number)
    start = time.perf_counter()
    try:
        ok, detail = fn(scale) if seed is None else fn(scale, seed)
    except Exception as exc:  # report, don't crash the whole suite
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(num, name, bool(ok), detail, time.perf_counter() - start)


def run_all(scale: float = 1.0, seed: int | None = None) -> list[CheckResult]:
    out = []
    for num, _, _ in CHECKS:
        out.append(run_check(num, scale, None if seed is None else seed + num))
    return out
