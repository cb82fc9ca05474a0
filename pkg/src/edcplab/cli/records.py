"""JSON records for keys, ciphertexts, coset states and experiment runs.

Quantum states cannot be written to disk honestly. A full-role record stores
the symbolic state description together with the secret, so it can be
reloaded into a new simulation. It is labelled SIMULATION-ONLY. An
adversary-view record keeps only public fields: no secret, no offset x and
no phase. It stands in for the fact that a real state could not be copied
across processes, and it cannot be reloaded.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from ..coset import Challenger, CosetState, EdcpParams, HybridLevel
from ..errors import SchemaMismatch
from ..modmath import ZqVector, wrapped_gaussian_pmf
from ..qpke import Ciphertext, KeyPair

SCHEMA = "edcplab/1"
FULL = "full"
ADVERSARY = "adversary-view"
SIMULATION_LABEL = "SIMULATION-ONLY: contains the secret and secret-derived state"
CSV_COLUMNS = ["trial", "seed", "outcome", "samples_used", "elapsed_us"]


def header(kind: str, params: EdcpParams, role: str = FULL) -> dict:
    head = {"schema": SCHEMA, "kind": kind, "role": role, "n": params.n, "q": params.q, "r": params.r, "p": params.p}
    if role == FULL:
        head["label"] = SIMULATION_LABEL
    return head


def params_of(record: dict) -> EdcpParams:
    return EdcpParams(record["n"], record["q"], record["r"], record["p"])


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=1) + "\n"


def write(record: dict, path) -> None:
    Path(path).write_text(dumps(record))


def read(path, kind: str | None = None, role: str | None = None) -> dict:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path} is not a JSON record: {exc}") from None
    if not isinstance(record, dict) or record.get("schema") != SCHEMA:
        raise SchemaMismatch(f"{path} has schema {record.get('schema') if isinstance(record, dict) else None!r}, expected {SCHEMA!r}")
    if kind is not None and record.get("kind") != kind:
        raise SchemaMismatch(f"{path} holds a {record.get('kind')!r} record, expected {kind!r}")
    if role is not None and record.get("role") != role:
        raise SchemaMismatch(f"{path} has role {record.get('role')!r}, this needs {role!r}")
    return record


# ---------------------------------------------------------------- states and keys


def state_fields(state: CosetState, role: str) -> dict:
    desc = state.describe()
    if role == ADVERSARY:
        return {k: desc[k] for k in ("size", "shift", "support", "level")}
    return desc


def state_record(state: CosetState, role: str = FULL) -> dict:
    rec = header("coset_state", state.params, role)
    rec["state"] = state_fields(state, role)
    if role == FULL:
        rec["secret"] = state._challenger.reveal().to_list()
    return rec


def rebuild_state(desc: dict, params: EdcpParams, challenger: Challenger) -> CosetState:
    level = None if desc["level"] is None else HybridLevel(*desc["level"])
    stride, base, count = desc["support"]
    mod, slope = desc["phase"]
    return CosetState(
        params, desc["size"], ZqVector(params.q, tuple(desc["offset"])), tuple(desc["shift"]),
        stride, base, count, mod, slope, level, _challenger=challenger,
    )


def load_state(record: dict, rng) -> CosetState:
    if record.get("role") != FULL:
        raise SchemaMismatch("adversary-view records carry no state and cannot be reloaded")
    params = params_of(record)
    return rebuild_state(record["state"], params, Challenger(params, rng, record["secret"]))


def keypair_record(keys: KeyPair, role: str = FULL, consumed: bool = False) -> dict:
    rec = header("keypair", keys.params, role)
    rec["public"] = state_fields(keys.public, role)
    rec["public_consumed"] = consumed
    if role == FULL:
        rec["secret"] = keys.secret.to_list()
    return rec


def load_keypair(record: dict, rng) -> KeyPair:
    if record.get("role") != FULL:
        raise SchemaMismatch("an adversary-view key file has no secret and cannot be used")
    params = params_of(record)
    ch = Challenger(params, rng, record["secret"])
    return KeyPair(ch.reveal(), rebuild_state(record["public"], params, ch), params, ch)


def ciphertext_record(ct: Ciphertext, role: str = FULL) -> dict:
    rec = header("ciphertext", ct.params, role)
    rec["state"] = state_fields(ct.state, role)
    if role == FULL:
        rec["secret"] = ct.state._challenger.reveal().to_list()
    return rec


def load_ciphertext(record: dict, rng) -> Ciphertext:
    state = load_state(record, rng)
    return Ciphertext(state, state.params)


# ---------------------------------------------------------------- run records


def run_record(command: str, params: EdcpParams, config: dict, trials: list[dict], wall_clock: float | None = None) -> dict:
    rec = header("run", params)
    rec["command"] = command
    rec["config"] = config
    rec["trials"] = trials
    rec["aggregate"] = aggregate(rec)
    if wall_clock is not None:
        rec["wall_clock_s"] = wall_clock
    return rec


def _error_tv(errors: list[int], q: int, lam: float) -> float:
    hist = np.bincount(np.asarray(errors, dtype=np.int64) % q, minlength=q) / len(errors)
    return 0.5 * float(np.abs(hist - np.array(wrapped_gaussian_pmf(q / lam, q))).sum())


def aggregate(record: dict) -> dict:
    """Summary statistics computed only from the per-trial entries and config.

    Works the same on a freshly built record and on one read back from disk.
    """
    trials = record["trials"]
    count = len(trials)
    wins = sum(1 for t in trials if t["success"])
    samples = [t["samples_used"] for t in trials]
    out = {
        "trials": count,
        "successes": wins,
        "success_rate": wins / count if count else 0.0,
        "mean_samples_used": float(np.mean(samples)) if samples else 0.0,
        "max_samples_used": int(max(samples)) if samples else 0,
    }
    if record["command"] == "extract-lwe":
        errors = [t["error"] for t in trials if t["success"]]
        modulus = record["config"]["sample_modulus"]
        out["error_tv"] = _error_tv(errors, modulus, record["config"]["lam"]) if errors else None
    if record["command"] == "attack-sieve":
        ratios = [x for t in trials for x in t.get("survival", [])]
        out["mean_stage_survival"] = float(np.mean(ratios)) if ratios else None
    if record["command"] in ("reduce-hybrid", "reduce-phase"):
        out["mean_oracle_queries"] = float(np.mean([t["oracle_queries"] for t in trials])) if trials else 0.0
    return out


def trials_csv(trials: list[dict], timing: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for t in trials:
        outcome = t["outcome"] if isinstance(t["outcome"], str) else json.dumps(t["outcome"])
        writer.writerow([t["trial"], t["seed"], outcome, t["samples_used"], t.get("elapsed_us", "") if timing else ""])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and list(rows[0]) != CSV_COLUMNS:
        raise SchemaMismatch(f"{path} has columns {list(rows[0])}, expected {CSV_COLUMNS}")
    return rows
