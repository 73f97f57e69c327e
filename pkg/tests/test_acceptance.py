"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import itertools
import time

import numpy as np
import pytest

from blindpsi import cli
from blindpsi.analysis import blindness_statistics, within_sigma
from blindpsi.bloom import BloomFilter, ItemDictionary, false_positive_rate, intersect_classical
from blindpsi.mbqc import compile_toffoli, run_pattern_plain, toffoli_matrix
from blindpsi.protocol import (Behavior, RunConfig, expected_qubit_count, protocol1_trials,
                               psi_run, qubits_per_instance, verify_protocol2, verify_protocol3)
from blindpsi.qsim import StateVector, infidelity
from blindpsi.secrets import delta_counts


@pytest.fixture
def verdict(capsys):
    def emit(n: int, ok: bool, detail: str, elapsed: float, limit: float | None = None):
        timed = limit is None or elapsed < limit
        line = f"criterion {n}: {'PASS' if ok and timed else 'FAIL'} {detail} ({elapsed:.1f}s"
        line += f" < {limit:.0f}s)" if limit is not None else ")"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert timed, line

    return emit


def test_c1_preparation_identities(verdict):
    t0 = time.perf_counter()
    n2, inf2 = verify_protocol2()
    n3, inf3 = verify_protocol3()
    ok = n2 == 256 and n3 == 128 and max(inf2, inf3) <= 1e-9
    verdict(1, ok, f"{n2}+{n3} cases, max infidelity {max(inf2, inf3):.1e}",
            time.perf_counter() - t0, 5)


def test_c2_mbqc_oracle(verdict):
    t0 = time.perf_counter()
    p = compile_toffoli()
    rng = np.random.default_rng(2024)
    probes = [np.eye(8)[i] for i in range(8)]
    probes.append(np.array([0, 0, 1, 0, 0, 0, 1, 0]) / np.sqrt(2))
    probes.append(np.full(8, 1 / np.sqrt(8)))
    z = rng.normal(size=8) + 1j * rng.normal(size=8)
    probes.append(z / np.linalg.norm(z))
    inputs = StateVector.from_vector(np.array(probes), list(p.inputs))
    want = StateVector.from_vector(np.array(probes) @ toffoli_matrix().T, list(p.outputs))
    worst = 0.0
    for seed in range(20):
        out = run_pattern_plain(p, inputs, np.random.default_rng(seed))
        worst = max(worst, float(infidelity(want, out).max()))
    verdict(2, worst <= 1e-9, f"11 probes x 20 seeds, max infidelity {worst:.1e}",
            time.perf_counter() - t0, 30)


def test_c3_blind_toffoli(verdict):
    t0 = time.perf_counter()
    bad = cli.toffoli_check(100)
    verdict(3, not bad, f"800 blind runs, {len(bad)} mismatches", time.perf_counter() - t0, 120)


def test_c4_psi_end_to_end(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    exact = True
    fp = 0
    estimate = 0.0
    for run in range(20):
        m = int(rng.choice([2, 4]))
        universe = [f"item{k}" for k in range(3 * m)]
        A = list(rng.choice(universe, int(rng.integers(1, m + 1)), replace=False))
        B = list(rng.choice(universe, int(rng.integers(1, m + 1)), replace=False))
        res = psi_run(A, B, RunConfig(lam=8, m=m, seed=run))
        p = res.params
        fa, fb = BloomFilter.from_items(p, A), BloomFilter.from_items(p, B)
        want1 = intersect_classical(fa, fb, ItemDictionary(p, A), A)
        want2 = intersect_classical(fb, fa, ItemDictionary(p, B), B)
        exact &= res.c1 == want1 and res.c2 == want2
        truth = set(A) & set(B)
        fp += len(res.c1 - truth) + len(res.c2 - truth)
        estimate += sum(false_positive_rate(p.M, len(B), p.K) for a in A if a not in truth)
        estimate += sum(false_positive_rate(p.M, len(A), p.K) for b in B if b not in truth)
    ok = exact and fp < 2 * estimate
    verdict(4, ok, f"20 runs, outputs match classical: {exact}; "
                   f"false positives {fp} vs 2x estimate {2 * estimate:.2f}",
            time.perf_counter() - t0, 600)


def test_c5_blindness(verdict):
    t0 = time.perf_counter()
    exact = all(delta_counts(*cfg).tolist() == [2] * 8
                for cfg in itertools.product(range(8), range(2), range(2), range(2), range(2)))
    honest = blindness_statistics(*cli.blindness_runs(8000, 0))
    sabotage = blindness_statistics(*cli.blindness_runs(8000, 0, sabotage=True))
    ok = exact and honest.passed and not sabotage.passed
    verdict(5, ok, f"exact 128/128: {exact}; default min p {min(honest.min_p_uniform, honest.min_p_two_sample):.2g}"
                   f" (Bonferroni-adjusted over {honest.tests} tests: {honest.min_p_adjusted:.3g});"
                   f" sabotage adjusted p {sabotage.min_p_adjusted:.2g}",
            time.perf_counter() - t0, 120)


def test_c6_linearity(verdict):
    t0 = time.perf_counter()
    counts = {}
    q = None
    for m in (1, 2, 4, 8):
        res = psi_run(["a"], ["b"], RunConfig(lam=8, m=m, seed=m))
        counts[m] = res.transcript.count_qubits()
        q = res.q
    per = {counts[m] / m for m in counts}
    closed = all(counts[m] == expected_qubit_count(8, m, 8, q) for m in counts)
    layers = q + 1
    ok = len(per) == 1 and closed and layers <= 65
    verdict(6, ok, f"qubits/m constant at {per.pop():.0f} = 8 x {qubits_per_instance(8, q)}"
                   f" (closed form holds: {closed}); L_tof = {layers} layers",
            time.perf_counter() - t0, 60)


def test_c7_protocol1_soundness(verdict):
    t0 = time.perf_counter()
    n = 10000
    passed = protocol1_trials(n, RunConfig(L=8, seed=7), Behavior(corrupt_decoys=1))
    caught = int((~passed).sum())
    ok = within_sigma(caught, n, 7 / 8)
    verdict(7, ok, f"detected {caught}/{n} = {caught / n:.4f} vs 0.875 +- {3 * np.sqrt(7 / 64 / n):.4f}",
            time.perf_counter() - t0, 60)


def test_c8_determinism(verdict, tmp_path):
    t0 = time.perf_counter()
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("x\ny\n", encoding="utf-8")
    b.write_text("y\nz\n", encoding="utf-8")
    blobs = []
    for i in range(2):
        out = tmp_path / f"run{i}.txt"
        cli.main(["run", "--alice", str(a), "--bob", str(b), "--seed", "3", "--out", str(out)])
        blobs.append((tmp_path / f"run{i}.txt.transcript").read_bytes())
    verdict(8, blobs[0] == blobs[1] and len(blobs[0]) > 0,
            f"transcripts byte-identical ({len(blobs[0])} bytes)", time.perf_counter() - t0)
