"""Command-line entry points.

Each command prints ``key: value`` lines followed by one JSON object on the
last line with the same data.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import analysis
from .bloom import BloomFilter, ItemDictionary, intersect_classical, read_set_file
from .mbqc import compile_toffoli
from .protocol import (Behavior, RunConfig, expected_qubit_count, psi_run, run_blind_toffoli,
                       toffoli_session, verify_protocol2, verify_protocol3)
from .transport import Kind, ProtocolAbort

EXIT_OK, EXIT_FAIL, EXIT_ABORT, EXIT_REFUSED = 0, 1, 2, 3
MIN_BLINDNESS_SAMPLES = 200
INFIDELITY_TOL = 1e-9
BLINDNESS_INPUTS = ((0, 0), (1, 1))


def render(report: dict) -> str:
    lines = []
    for key, value in report.items():
        shown = json.dumps(value) if isinstance(value, (list, dict)) else value
        lines.append(f"{key}: {shown}")
    lines.append(json.dumps(report, sort_keys=True))
    return "\n".join(lines) + "\n"


def _emit(report: dict, out: str | None = None) -> None:
    text = render(report)
    sys.stdout.write(text)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_run(args) -> int:
    try:
        alice = read_set_file(args.alice)
        bob = read_set_file(args.bob)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    m = args.m if args.m is not None else max(len(alice), len(bob), 1)
    if max(len(alice), len(bob)) > m:
        print(f"error: a set has more than m={m} items", file=sys.stderr)
        return EXIT_FAIL
    config = RunConfig(lam=args.lam, m=m, seed=args.seed)
    behavior = Behavior(corrupt_decoys=args.corrupt)
    try:
        res = psi_run(alice, bob, config, behavior)
    except ProtocolAbort as exc:
        _emit({"status": "abort", "reason": str(exc), "detail": exc.payload}, args.out)
        return EXIT_ABORT
    blob = res.transcript.serialize()
    if args.out:
        with open(args.out + ".transcript", "wb") as fh:
            fh.write(blob)
    p = res.params
    fa, fb = BloomFilter.from_items(p, alice), BloomFilter.from_items(p, bob)
    consistent = (res.c1 == intersect_classical(fa, fb, ItemDictionary(p, alice), alice)
                  and res.c2 == intersect_classical(fb, fa, ItemDictionary(p, bob), bob))
    report = {
        "status": "ok" if consistent else "inconsistent",
        "intersection_c1": sorted(res.c1),
        "intersection_c2": sorted(res.c2),
        "lambda": args.lam, "m": m, "M": p.M, "K": p.K, "L": config.L,
        "layers": res.q + 1,
        "qubits": res.transcript.count_qubits(),
        "qubits_expected": expected_qubit_count(args.lam, m, config.L, res.q),
        "messages": res.transcript.kind_counts(),
        "peak_live_qubits": res.peak_live,
        "consistent": consistent,
        "transcript_sha256": hashlib.sha256(blob).hexdigest(),
    }
    _emit(report, args.out)
    return EXIT_OK if consistent else EXIT_FAIL


def cmd_verify_prep(args) -> int:
    n2, inf2 = verify_protocol2()
    n3, inf3 = verify_protocol3(mutate=args.mutate)
    worst = max(inf2, inf3)
    ok = worst <= INFIDELITY_TOL
    _emit({"protocol2_cases": n2, "protocol3_cases": n3, "cases": n2 + n3,
           "max_infidelity_protocol2": inf2, "max_infidelity_protocol3": inf3,
           "max_infidelity": worst, "mutated": bool(args.mutate), "pass": ok})
    return EXIT_OK if ok else EXIT_FAIL


def blindness_runs(samples: int, seed: int, sabotage: bool = False) -> tuple[dict, dict]:
    """Server-side delta samples for the two fixed input pairs."""
    runs = []
    for i, (a, b) in enumerate(BLINDNESS_INPUTS):
        s = toffoli_session(samples, RunConfig(seed=seed + i), Behavior(sabotage=sabotage),
                            retain=[Kind.DELTA])
        out = run_blind_toffoli(s, a, b, 0)
        if not np.all(out == (a & b)):
            raise RuntimeError("blind Toffoli produced a wrong AND bit")
        runs.append(analysis.deltas_by_position(s.transcript))
    return runs[0], runs[1]


def cmd_blindness(args) -> int:
    if args.samples < MIN_BLINDNESS_SAMPLES:
        print(f"error: --samples must be at least {MIN_BLINDNESS_SAMPLES} for the chi-square tests",
              file=sys.stderr)
        return EXIT_REFUSED
    ra, rb = blindness_runs(args.samples, args.seed, args.sabotage)
    rep = analysis.blindness_statistics(ra, rb)
    _emit({"samples": args.samples, "sabotage": bool(args.sabotage), "positions": rep.positions,
           "tests": rep.tests, "min_p_uniform": rep.min_p_uniform,
           "min_p_two_sample": rep.min_p_two_sample, "min_p_adjusted": rep.min_p_adjusted,
           "threshold": rep.threshold, "pass": rep.passed,
           "histograms": {k: v for k, v in rep.histograms.items()}})
    return EXIT_OK if rep.passed else EXIT_FAIL


TRUTH_INPUTS = np.array([[(b >> 2) & 1, (b >> 1) & 1, b & 1] for b in range(8)])


def toffoli_check(seeds: int) -> list[dict]:
    """Blind Toffoli on all 8 basis inputs for seeds ``0 .. seeds-1``; returns mismatches."""
    compile_toffoli()
    c1, c2, t = TRUTH_INPUTS.T
    want = t ^ (c1 & c2)
    bad = []
    for seed in range(seeds):
        got = run_blind_toffoli(toffoli_session(8, RunConfig(seed=seed)), c1, c2, t)
        for i in np.flatnonzero(got != want):
            bad.append({"seed": seed, "input": TRUTH_INPUTS[i].tolist(), "got": int(got[i])})
    return bad


def cmd_toffoli_check(args) -> int:
    bad = toffoli_check(args.seeds)
    _emit({"seeds": args.seeds, "runs": 8 * args.seeds, "mismatches": len(bad),
           "layers": compile_toffoli().meta["layers"], "examples": bad[:5], "pass": not bad})
    return EXIT_OK if not bad else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blindpsi", description="Blind quantum PSI simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run PSI end to end on two set files")
    run.add_argument("--alice", required=True)
    run.add_argument("--bob", required=True)
    run.add_argument("--lambda", dest="lam", type=int, default=8)
    run.add_argument("--m", type=int, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=None)
    run.add_argument("--corrupt", type=int, default=0, help=argparse.SUPPRESS)
    run.set_defaults(func=cmd_run)

    vp = sub.add_parser("verify-prep", help="exhaustive Protocol 2/3 statevector checks")
    vp.add_argument("--mutate", action="store_true", help=argparse.SUPPRESS)
    vp.set_defaults(func=cmd_verify_prep)

    bl = sub.add_parser("blindness", help="delta-distribution statistics")
    bl.add_argument("--samples", type=int, default=8000)
    bl.add_argument("--seed", type=int, default=0)
    bl.add_argument("--sabotage", action="store_true", help=argparse.SUPPRESS)
    bl.set_defaults(func=cmd_blindness)

    tc = sub.add_parser("toffoli-check", help="blind Toffoli truth table over many seeds")
    tc.add_argument("--seeds", type=int, default=100)
    tc.set_defaults(func=cmd_toffoli_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
