"""Argument parsing, validation and the experiment runners.

Exit codes: 0 on success, 2 on a validation error (one line naming the flag,
nothing written), 1 on a runtime failure.
"""
from __future__ import annotations

import argparse
import functools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import acceptance, attacks, coset, infotheory, qpke, reductions
from ..coset import Challenger, EdcpParams
from ..errors import BadParams, EdcpError, ParamMismatch, PrimeBoundExceeded, SchemaMismatch
from ..modmath import Modulus, is_prime
from . import records

QPKE_COMMANDS = {"keygen", "encrypt", "decrypt", "roundtrip"}


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


class Parser(argparse.ArgumentParser):
    """argparse with a one-line diagnosis instead of the usage dump."""

    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- parser


def _params_parent(p_required: bool = False) -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--n", type=int, required=True, help="secret dimension")
    parent.add_argument("--q", type=int, required=True, help="modulus")
    parent.add_argument("--r", type=int, required=True, help="superposition length")
    parent.add_argument("--p", type=int, required=p_required, help="prime divisor of q (default: smallest)")
    return parent


def _run_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, required=True, help="master seed")
    parent.add_argument("--trials", type=int, default=1, help="number of independent trials")
    parent.add_argument("--out", help="write the JSON run record here")
    parent.add_argument("--csv", help="write per-trial rows here")
    parent.add_argument("--timing", action="store_true", help="record elapsed times (breaks byte-identical reruns)")
    parent.add_argument("--workers", type=int, default=1, help="worker processes")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="edcplab", description="Extrapolated dihedral coset simulator and experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    params, run = _params_parent(), _run_parent()

    p = sub.add_parser("keygen", parents=[params], help="generate a key pair file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="key file")
    p.add_argument("--role", choices=[records.FULL, records.ADVERSARY], default=records.FULL)

    p = sub.add_parser("encrypt", help="encrypt one bit with a key file")
    p.add_argument("--key", required=True)
    p.add_argument("--bit", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="ciphertext file")

    p = sub.add_parser("decrypt", help="decrypt a ciphertext file")
    p.add_argument("--key", required=True)
    p.add_argument("--ct", required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("roundtrip", parents=[params, run], help="keygen, encrypt, decrypt")
    p.add_argument("--bit", type=int, choices=[0, 1], help="fixed message bit (default: random per trial)")

    p = sub.add_parser("reduce-hybrid", parents=[params, run], help="search from a hybrid-level decision oracle")
    p.add_argument("--oracle", choices=["perfect", "statistical"], default="perfect")
    p.add_argument("--r-prime", type=int)

    p = sub.add_parser("reduce-phase", parents=[params, run], help="search from a phase decision oracle")

    p = sub.add_parser("extract-lwe", parents=[params, run], help="turn coset states into shifted LWE samples")
    p.add_argument("--lam", type=float, required=True, help="Gaussian width parameter")
    p.add_argument("--mode", choices=["prime", "mod_p"], default="prime")

    p = sub.add_parser("attack-sieve", parents=[params, run], help="sieve + PGM for one secret coordinate")
    p.add_argument("--coordinate", type=int, help="secret coordinate to recover (default: last)")
    p.add_argument("--block", type=int, default=1, help="coordinates zeroed per sieve stage")
    p.add_argument("--pool", type=int, help="initial phase-state pool size")

    p = sub.add_parser("attack-pgm", parents=[params, run], help="PGM on n=1 phase states")
    p.add_argument("--states", type=int, help="phase states per guess (default: ceil(log2 q)+1)")

    p = sub.add_parser("attack-fourier", parents=[params, run], help="QFT attack for r = q")
    p.add_argument("--max-samples", type=int)

    p = sub.add_parser("holevo", parents=[params], help="Holevo quantity and Fano sample bound")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--analytic", action="store_true", help="skip the numeric computation")
    p.add_argument("--success-p", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0, help="only used when secrets are sampled")
    p.add_argument("--out")

    p = sub.add_parser("selftest", help="run the acceptance checks at reduced scale")
    p.add_argument("--scale", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", type=int, nargs="*", help="check numbers to run")
    p.add_argument("--out")
    p.add_argument("--timing", action="store_true")
    return parser


# ---------------------------------------------------------------- validation


def _positive(args, name: str, flag: str, minimum: int = 1) -> None:
    value = getattr(args, name, None)
    if value is not None and value < minimum:
        raise UsageError(flag, f"must be >= {minimum}, got {value}")


def validate_params(args) -> EdcpParams:
    """Check n, q, r, p and build the parameters, naming the bad flag."""
    if args.n < 1:
        raise UsageError("--n", f"must be >= 1, got {args.n}")
    if args.q < 2:
        raise UsageError("--q", f"must be >= 2, got {args.q}")
    try:
        mod = Modulus.of(args.q)
    except PrimeBoundExceeded as exc:
        raise UsageError("--q", str(exc)) from None
    if args.r < 1:
        raise UsageError("--r", f"must be >= 1, got {args.r}")
    if args.r > args.q:
        raise UsageError("--r", f"r={args.r} exceeds q={args.q}")
    p = args.p
    if p is not None:
        if not is_prime(p):
            raise UsageError("--p", f"p={p} is not prime")
        if args.q % p:
            raise UsageError("--p", f"p={p} does not divide q={args.q}")
    params = EdcpParams.make(args.n, args.q, args.r, p)
    if args.command in QPKE_COMMANDS:
        if len(mod.factors) != 1:
            raise UsageError("--q", f"q={args.q} must be a prime power for the cryptosystem")
        try:
            qpke.check_params(params)
        except BadParams as exc:
            raise UsageError("--r", str(exc)) from None
    return params


def validate(args) -> EdcpParams | None:
    for name, flag in [("trials", "--trials"), ("workers", "--workers"), ("m", "--m"), ("block", "--block"),
                       ("states", "--states"), ("max_samples", "--max-samples"), ("pool", "--pool"), ("r_prime", "--r-prime")]:
        _positive(args, name, flag)
    if args.command in ("encrypt", "decrypt"):
        for flag, path in [("--key", args.key), ("--ct", getattr(args, "ct", None))]:
            if path is not None and not Path(path).is_file():
                raise UsageError(flag, f"no such file {path}")
        if args.command == "encrypt" and args.bit not in (0, 1):
            raise UsageError("--bit", f"must be 0 or 1, got {args.bit}")
        return None
    if args.command == "selftest":
        if not args.scale > 0:
            raise UsageError("--scale", f"must be positive, got {args.scale}")
        known = {num for num, _, _ in acceptance.CHECKS}
        for num in args.only or []:
            if num not in known:
                raise UsageError("--only", f"no check numbered {num}")
        return None
    params = validate_params(args)
    cmd = args.command
    if cmd in ("reduce-hybrid", "reduce-phase", "attack-sieve", "attack-pgm", "extract-lwe") and params.r < 2:
        raise UsageError("--r", f"{cmd} needs r >= 2")
    if cmd == "reduce-hybrid" and args.r_prime is not None:
        try:
            reductions.check_r_prime(params, args.r_prime)
        except (BadParams, ValueError) as exc:
            raise UsageError("--r-prime", str(exc)) from None
    if cmd == "extract-lwe":
        if not args.lam > 0:
            raise UsageError("--lam", f"must be positive, got {args.lam}")
        if args.mode == "prime" and not is_prime(params.q):
            raise UsageError("--q", f"prime mode needs prime q, got {params.q} (use --mode mod_p)")
        if args.mode == "mod_p" and params.r > params.p:
            raise UsageError("--r", f"mod_p mode needs r <= p, got r={params.r}, p={params.p}")
    if cmd == "attack-sieve":
        coord = params.n - 1 if args.coordinate is None else args.coordinate
        if not 0 <= coord < params.n:
            raise UsageError("--coordinate", f"must lie in [0, {params.n}), got {coord}")
        args.coordinate = coord
    if cmd == "attack-pgm" and params.n != 1:
        raise UsageError("--n", "attack-pgm works on n=1 phase states; use attack-sieve for n > 1")
    if cmd == "attack-pgm" and args.states is not None and args.states > attacks.PGM_MAX_QUBITS:
        raise UsageError("--states", f"at most {attacks.PGM_MAX_QUBITS} phase states fit the dense PGM")
    if cmd == "attack-fourier" and params.r != params.q:
        raise UsageError("--r", f"attack-fourier needs r = q, got r={params.r}, q={params.q}")
    if cmd == "holevo":
        if not 0 < args.success_p <= 1:
            raise UsageError("--success-p", f"must lie in (0, 1], got {args.success_p}")
        if not args.analytic and args.m > 2:
            raise UsageError("--m", "numeric chi is limited to m <= 2 (add --analytic)")
        if not args.analytic and params.dense_dim ** args.m > 4096:
            raise UsageError("--m", f"dense dimension {params.dense_dim ** args.m} is too large for numeric chi (add --analytic)")
    return params


# ---------------------------------------------------------------- trials


def _trial_roundtrip(cfg: dict, rng) -> dict:
    params = EdcpParams(**cfg["params"])
    b = int(rng.integers(2)) if cfg["bit"] is None else cfg["bit"]
    keys = qpke.keygen(params, rng)
    got = qpke.decrypt(keys.secret, qpke.encrypt(keys.public, b, rng), rng)
    return {"outcome": "ok" if got == b else "fail", "success": got == b, "samples_used": keys.challenger.samples_issued, "bit": b, "decrypted": got}


def _oracle(cfg: dict, params: EdcpParams):
    if cfg["command"] == "reduce-phase":
        return reductions.perfect_phase_oracle()
    if cfg["oracle"] == "statistical":
        return reductions.statistical_coset_oracle(params)
    return reductions.perfect_coset_oracle()


def _trial_reduce(cfg: dict, rng) -> dict:
    params = EdcpParams(**cfg["params"])
    ch = Challenger(params, rng)
    oracle = _oracle(cfg, params)
    try:
        if cfg["command"] == "reduce-phase":
            res = reductions.search_via_phase(oracle, ch, rng)
        else:
            res = reductions.search_via_hybrid(oracle, ch, rng, cfg["r_prime"])
        ok = res.secret == ch.reveal()
        outcome = res.secret.to_list()
    except EdcpError as exc:
        ok, outcome = False, f"error:{type(exc).__name__}"
    return {"outcome": outcome, "success": ok, "samples_used": ch.samples_issued, "oracle_queries": oracle.queries}


def _trial_extract(cfg: dict, rng) -> dict:
    params = EdcpParams(**cfg["params"])
    ch = Challenger(params, rng)
    t = int(rng.integers(params.p))
    ok, smp = reductions.extract_shifted_lwe(coset.sample(ch, t), cfg["lam"], rng, cfg["mode"])
    if not ok:
        return {"outcome": "reject", "success": False, "samples_used": 1}
    # b = <a, s> + e - t over the sample modulus
    m = cfg["sample_modulus"]
    s = [c % m for c in ch.reveal().coords]
    err = int((smp.b - sum(x * y for x, y in zip(smp.a.coords, s)) + t) % m)
    err = err if err <= m // 2 else err - m
    return {"outcome": err, "success": True, "samples_used": 1, "error": err}


def _trial_sieve(cfg: dict, rng) -> dict:
    params = EdcpParams(**cfg["params"])
    ch = Challenger(params, rng)
    target = ch.reveal()[cfg["coordinate"]]
    try:
        res = attacks.kuperberg_recover(ch, cfg["coordinate"], cfg["block"], rng, cfg["pool"])
        return {"outcome": res.value, "success": res.value == target, "samples_used": ch.samples_issued, "survival": res.extras["survival"]}
    except EdcpError as exc:
        return {"outcome": f"error:{type(exc).__name__}", "success": False, "samples_used": ch.samples_issued, "survival": []}


def _trial_pgm(cfg: dict, rng) -> dict:
    params = EdcpParams(**cfg["params"])
    ch = Challenger(params, rng)
    states = []
    while len(states) < cfg["states"]:
        st = attacks.edcp_to_phase(ch, rng)
        if st.label[0] % params.q:
            states.append(st)
        else:
            coset._take(st)
    labels = [st.label[0] for st in states]
    guess = attacks.pgm_recover(states, rng, 0)
    return {
        "outcome": guess, "success": guess == ch.reveal()[0], "samples_used": ch.samples_issued,
        "labels": labels, "predicted": attacks.pgm_success_probability(params.q, labels),
    }


def _trial_fourier(cfg: dict, rng) -> dict:
    params = EdcpParams(**cfg["params"])
    ch = Challenger(params, rng)
    try:
        res = attacks.fourier_attack_r_eq_q(ch, rng, cfg["max_samples"])
        return {"outcome": res.value.to_list(), "success": res.value == ch.reveal(), "samples_used": ch.samples_issued}
    except EdcpError as exc:
        return {"outcome": f"error:{type(exc).__name__}", "success": False, "samples_used": ch.samples_issued}


TRIALS = {
    "roundtrip": _trial_roundtrip,
    "reduce-hybrid": _trial_reduce,
    "reduce-phase": _trial_reduce,
    "extract-lwe": _trial_extract,
    "attack-sieve": _trial_sieve,
    "attack-pgm": _trial_pgm,
    "attack-fourier": _trial_fourier,
}


def trial_seeds(seed: int, trials: int) -> list[int]:
    """Per-trial seeds: a fixed split of the master seed, independent of worker count."""
    return [int(v) for v in np.random.SeedSequence(seed).generate_state(trials, np.uint32)]


def run_one(cfg: dict, index_seed: tuple[int, int]) -> dict:
    index, seed = index_seed
    start = time.perf_counter()
    row = TRIALS[cfg["command"]](cfg, np.random.default_rng(seed))
    row.update(trial=index, seed=seed, elapsed_us=int((time.perf_counter() - start) * 1e6))
    return row


def run_trials(cfg: dict, seed: int, trials: int, workers: int) -> list[dict]:
    jobs = list(enumerate(trial_seeds(seed, trials)))
    fn = functools.partial(run_one, cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(fn, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        rows = [fn(job) for job in jobs]
    return sorted(rows, key=lambda row: row["trial"])


# ---------------------------------------------------------------- output


def print_table(rows: list[tuple[str, object]], out=None) -> None:
    out = out or sys.stdout
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"{key:<{width}}  {value}", file=out)


def _config(args, params: EdcpParams, extra: dict) -> dict:
    cfg = {"command": args.command, "params": {"n": params.n, "q": params.q, "r": params.r, "p": params.p}}
    cfg.update(extra)
    return cfg


def cmd_experiment(args, params: EdcpParams) -> int:
    extra = {
        "roundtrip": lambda: {"bit": args.bit},
        "reduce-hybrid": lambda: {"oracle": args.oracle, "r_prime": args.r_prime},
        "reduce-phase": lambda: {},
        "extract-lwe": lambda: {"lam": args.lam, "mode": args.mode, "sample_modulus": params.q if args.mode == "prime" else params.p},
        "attack-sieve": lambda: {"coordinate": args.coordinate, "block": args.block, "pool": args.pool},
        "attack-pgm": lambda: {"states": args.states or math.ceil(math.log2(params.q)) + 1},
        "attack-fourier": lambda: {"max_samples": args.max_samples},
    }[args.command]()
    cfg = _config(args, params, extra)
    start = time.perf_counter()
    rows = run_trials(cfg, args.seed, args.trials, args.workers)
    wall = time.perf_counter() - start
    if not args.timing:
        for row in rows:
            row.pop("elapsed_us")
    config = dict(cfg, seed=args.seed, trials=args.trials)
    record = records.run_record(args.command, params, config, rows, wall if args.timing else None)
    table = [("command", args.command), ("n, q, r, p", f"{params.n}, {params.q}, {params.r}, {params.p}"), ("seed", args.seed)]
    table += [(k, v) for k, v in record["aggregate"].items() if v is not None]
    if args.command == "extract-lwe":
        keep = 1.0 if args.mode == "prime" else (params.p / params.q) ** params.n
        table.append(("success bound", 0.5 * keep * reductions.extraction_success_probability(params.r, args.lam)))
    if args.command == "attack-pgm":
        table.append(("mean predicted success", float(np.mean([row["predicted"] for row in rows]))))
    if args.timing:
        table.append(("wall clock s", wall))
    print_table(table)
    if args.out:
        records.write(record, args.out)
    if args.csv:
        Path(args.csv).write_text(records.trials_csv(rows, args.timing))
    return 0


def cmd_keygen(args, params: EdcpParams) -> int:
    keys = qpke.keygen(params, np.random.default_rng(args.seed))
    records.write(records.keypair_record(keys, args.role), args.out)
    print_table([("key file", args.out), ("role", args.role), ("n, q, r, p", f"{params.n}, {params.q}, {params.r}, {params.p}")])
    return 0


def cmd_encrypt(args) -> int:
    rng = np.random.default_rng(args.seed)
    key_rec = records.read(args.key, "keypair", records.FULL)
    if key_rec["public_consumed"]:
        print(f"edcplab: error: --key: public key in {args.key} was already used; run keygen again", file=sys.stderr)
        return 1
    keys = records.load_keypair(key_rec, rng)
    ct = qpke.encrypt(keys.public, args.bit, rng)
    records.write(records.ciphertext_record(ct), args.out)
    key_rec["public_consumed"] = True
    records.write(key_rec, args.key)
    print_table([("ciphertext file", args.out), ("bit", args.bit)])
    return 0


def cmd_decrypt(args) -> int:
    rng = np.random.default_rng(args.seed)
    keys = records.load_keypair(records.read(args.key, "keypair", records.FULL), rng)
    ct_rec = records.read(args.ct, "ciphertext", records.FULL)
    if records.params_of(ct_rec) != keys.params:
        raise ParamMismatch(f"key parameters {keys.params} differ from ciphertext parameters {records.params_of(ct_rec)}")
    bit = qpke.decrypt(keys.secret, records.load_ciphertext(ct_rec, rng), rng)
    print_table([("decrypted bit", bit)])
    return 0


def cmd_holevo(args, params: EdcpParams) -> int:
    rep = infotheory.holevo_chi(params, args.m, not args.analytic, np.random.default_rng(args.seed))
    rows = [("n, q, r", f"{params.n}, {params.q}, {params.r}"), ("m", args.m), ("chi closed form (bits)", rep.chi_closed_form)]
    if rep.chi_numeric is not None:
        rows.append(("chi numeric (bits)", rep.chi_numeric))
    if params.r >= 2:
        rows.append((f"fano min samples (P={args.success_p})", infotheory.fano_min_samples(params, args.success_p)))
    print_table(rows)
    if args.out:
        rec = records.header("holevo", params)
        rec.update(rep.as_dict())
        records.write(rec, args.out)
    return 0


def cmd_selftest(args) -> int:
    numbers = args.only or [num for num, _, _ in acceptance.CHECKS]
    results = [acceptance.run_check(num, args.scale, args.seed + num) for num in numbers]
    for res in results:
        print(res.line(args.timing))
    failed = [res for res in results if not res.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(r.name for r in failed)}" if failed else ""))
    if args.out:
        rec = {"schema": records.SCHEMA, "kind": "selftest", "scale": args.scale, "seed": args.seed,
               "results": [{"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail} for r in results]}
        Path(args.out).write_text(json.dumps(rec, sort_keys=True, indent=1) + "\n")
    return 1 if failed else 0


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        params = validate(args)
    except UsageError as exc:
        print(f"edcplab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "keygen":
            return cmd_keygen(args, params)
        if args.command == "encrypt":
            return cmd_encrypt(args)
        if args.command == "decrypt":
            return cmd_decrypt(args)
        if args.command == "holevo":
            return cmd_holevo(args, params)
        if args.command == "selftest":
            return cmd_selftest(args)
        return cmd_experiment(args, params)
    except (SchemaMismatch, ParamMismatch) as exc:
        print(f"edcplab {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (EdcpError, OSError, ValueError) as exc:
        print(f"edcplab {args.command}: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> None:
    sys.exit(dispatch(argv))
