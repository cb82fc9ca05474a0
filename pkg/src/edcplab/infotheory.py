"""Holevo and Fano bounds for the coset-state ensemble.

chi(eta^{(x)m}) <= m (1 - q^{-n}) log2 r, with equality at m = 1, and the
sample lower bound it implies through Fano's inequality.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .coset import EdcpParams
from .denseref import ensemble_density
from .statevec import DensityOperator, IndexSpace, eigen_spectrum

ENUMERATE_LIMIT = 2**12
SAMPLED_SECRETS = 256
SPECTRUM_TOL = 1e-7


def entropy_bits(rho: DensityOperator, tol: float = 1e-12) -> float:
    vals = np.linalg.eigvalsh(rho.matrix)
    vals = vals[vals > tol]
    return float(-np.sum(vals * np.log2(vals)))


def chi_closed_form(params: EdcpParams, m: int = 1) -> float:
    return m * (1 - params.q ** (-params.n)) * math.log2(params.r)


def rho_s(params: EdcpParams, s) -> DensityOperator:
    """rho_{s,r}: the Gen-circuit state averaged over x."""
    return ensemble_density(tuple(s), params.r, params.q)


def _secrets(params: EdcpParams, rng=None):
    total = params.q**params.n
    if total <= ENUMERATE_LIMIT:
        return list(itertools.product(range(params.q), repeat=params.n))
    rng = np.random.default_rng(0) if rng is None else rng
    return [tuple(int(v) for v in rng.integers(0, params.q, params.n)) for _ in range(SAMPLED_SECRETS)]


def _power(rho: DensityOperator, m: int) -> DensityOperator:
    mat = rho.matrix
    for _ in range(m - 1):
        mat = np.kron(mat, rho.matrix)
    return DensityOperator(IndexSpace(rho.space.factors * m), mat)


@dataclass
class EnsembleReport:
    params: EdcpParams
    m: int
    chi_numeric: float | None
    chi_closed_form: float
    spectra: dict

    def as_dict(self) -> dict:
        return {
            "n": self.params.n, "q": self.params.q, "r": self.params.r, "m": self.m,
            "chi_numeric": self.chi_numeric, "chi_closed_form": self.chi_closed_form,
            "spectra": {k: [[v, c] for v, c in spec] for k, spec in self.spectra.items()},
        }


def holevo_chi(params: EdcpParams, m: int = 1, numeric: bool = True, rng=None) -> EnsembleReport:
    """Closed-form chi and, when the dense space is small enough, the numeric one.

    chi = S(mean_s rho_s^{(x)m}) - mean_s S(rho_s^{(x)m}).
    Numeric m is limited to 1 and 2.
    """
    closed = chi_closed_form(params, m)
    if not numeric:
        return EnsembleReport(params, m, None, closed, {})
    if m not in (1, 2):
        raise ValueError("numeric chi is only computed for m = 1 or 2")
    secrets = _secrets(params, rng)
    states = [_power(rho_s(params, s), m) for s in secrets]
    avg = DensityOperator(states[0].space, sum(st.matrix for st in states) / len(states))
    chi = entropy_bits(avg) - float(np.mean([entropy_bits(st) for st in states]))
    spectra = {"rho_s": eigen_spectrum(states[0], SPECTRUM_TOL), "rho_avg": eigen_spectrum(avg, SPECTRUM_TOL)}
    return EnsembleReport(params, m, max(chi, 0.0), closed, spectra)


def expected_spectra(params: EdcpParams) -> dict:
    """Spectra of rho_{s,r} and of the s-average, as (value, multiplicity) lists.

    The averaged form needs every nonzero d < r to act invertibly on Z_q
    (smallest prime factor of q at least r); otherwise some y is killed by
    a d and extra structure appears.
    """
    n, q, r = params.n, params.q, params.r
    qn = q**n
    single = [(1 / qn, qn), (0.0, (r - 1) * qn)]
    avg = [(1 / qn, 1), (1 / (r * qn), (qn - 1) * r), (0.0, r - 1)]
    norm = lambda spec: sorted(((v, c) for v, c in spec if c), key=lambda vc: -vc[0])
    return {"rho_s": norm(single), "rho_avg": norm(avg)}


def _spectra_match(got, want, tol) -> bool:
    if len(got) != len(want):
        return False
    return all(abs(gv - wv) <= tol and gc == wc for (gv, gc), (wv, wc) in zip(got, want))


def spectrum_check(params: EdcpParams, tol: float = SPECTRUM_TOL) -> bool:
    report = holevo_chi(params, 1)
    want = expected_spectra(params)
    return all(_spectra_match(report.spectra[k], want[k], tol) for k in want)


def fano_min_samples(params: EdcpParams, success_p: float) -> int:
    """ceil((P n log2 q - 1) / ((1 - q^{-n}) log2 r)), floored at 0."""
    if not 0 < success_p <= 1:
        raise ValueError(f"success probability must lie in (0, 1], got {success_p}")
    if params.r < 2:
        raise ValueError("the bound is vacuous for r < 2 (no information per sample)")
    num = success_p * params.n * math.log2(params.q) - 1
    den = (1 - params.q ** (-params.n)) * math.log2(params.r)
    return max(0, math.ceil(num / den))
