import numpy as np
import pytest

from blindpsi.mbqc import (Flow, MeasurementPattern, OpenGraph, brickwork, canonical_flow,
                           compile_toffoli, dependencies, dump_pattern, run_pattern_plain,
                           toffoli_matrix, validate_flow)
from blindpsi.qsim import StateVector, apply_gate, attach, equal_up_to_phase, prepare_plus


def chain():
    return OpenGraph.build([1, 2, 3], [(1, 2), (2, 3)], [1], [3])


def test_flow_on_chain():
    g = chain()
    assert validate_flow(g, Flow({1: 2, 2: 3}, {1: 0, 2: 1, 3: 2}))
    bad = validate_flow(g, Flow({1: 3, 2: 3}, {1: 0, 2: 1, 3: 2}))
    assert not bad and bad.vertex == 1 and bad.condition == "edge"


def test_flow_order_violation():
    g = chain()
    rep = validate_flow(g, Flow({1: 2, 2: 3}, {1: 0, 2: 0, 3: 2}))
    assert not rep


def test_open_graph_rejects_bad_input():
    with pytest.raises(ValueError):
        OpenGraph.build([1, 2], [(1, 1)], [1], [2])
    with pytest.raises(ValueError):
        OpenGraph.build([1, 2], [(1, 3)], [1], [2])


def test_brickwork_examples():
    g = brickwork(1, 2)
    assert len(g.vertices) == 3 and len(g.edges) == 2
    g = brickwork(2, 8)
    vertical = [e for e in g.edges if len({v[0] for v in e}) == 2]
    assert len(vertical) == 2
    for n, q in [(1, 1), (2, 8), (3, 20), (4, 38), (5, 17)]:
        assert len(brickwork(n, q).vertices) == n * (q + 1)


@pytest.mark.parametrize("n,q", [(2, 8), (3, 38), (4, 30), (5, 16)])
def test_canonical_flow_valid(n, q):
    g = brickwork(n, q)
    assert validate_flow(g, canonical_flow(g))


def test_dependencies_precede():
    p = compile_toffoli()
    for v in p.graph.vertices:
        for d in p.xdeps[v] | p.zdeps[v]:
            assert p.flow.order[d] < p.flow.order[v]
    x, _ = dependencies(p.graph, p.flow)
    assert x[(0, 1)] == {(0, 0)} and x[(0, 0)] == set()


def test_toffoli_layer_count():
    p = compile_toffoli()
    assert p.meta["layers"] <= 65
    assert validate_flow(p.graph, p.flow)


def basis(bits):
    return StateVector.basis(list(bits), [0, 1, 2])


def toffoli_oracle(state: StateVector) -> StateVector:
    return StateVector.from_vector(state.vectors() @ toffoli_matrix().T, list(state.labels))


def run(state, seed, stats=None):
    p = compile_toffoli()
    out = run_pattern_plain(p, StateVector(state.tensor.copy(), list(p.inputs)),
                            np.random.default_rng(seed), stats=stats)
    return StateVector(out.tensor, [0, 1, 2])


@pytest.mark.parametrize("bits", [(1, 1, 0), (1, 0, 0), (1, 1, 1), (0, 1, 1)])
def test_toffoli_examples(bits):
    want = basis((bits[0], bits[1], bits[2] ^ (bits[0] & bits[1])))
    for seed in range(5):
        assert equal_up_to_phase(run(basis(bits), seed), want)


def test_toffoli_superposition_probe():
    s = attach(attach(prepare_plus(0, 0), StateVector.basis([1], [1])), StateVector.basis([0], [2]))
    want = StateVector.from_vector(np.array([0, 0, 1, 0, 0, 0, 0, 1]) / np.sqrt(2), [0, 1, 2])
    assert equal_up_to_phase(run(s, 3), want)


def test_toffoli_all_inputs_many_seeds():
    inputs = StateVector.from_vector(np.eye(8), [0, 1, 2])
    want = toffoli_oracle(inputs)
    for seed in range(50):
        got = run(inputs, seed)
        assert equal_up_to_phase(got, want)


def test_outcome_independence_and_peak():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = StateVector.from_vector(psi / np.linalg.norm(psi), [0, 1, 2])
    ref = run(state, 0)
    for seed in range(1, 21):
        stats = {}
        assert equal_up_to_phase(run(state, seed, stats), ref)
        assert stats["peak_live"] <= 2 * 3 + 3
    assert equal_up_to_phase(ref, toffoli_oracle(state))


def single_wire(phis):
    g = brickwork(1, len(phis))
    return MeasurementPattern(g, canonical_flow(g), {(0, l): a for l, a in enumerate(phis)})


def test_one_wire_identity():
    psi = StateVector(np.array([[0.6, 0.8j]]), [(0, 0)])
    p = single_wire([0, 0])
    out = run_pattern_plain(p, psi, np.random.default_rng(2))
    assert equal_up_to_phase(out, StateVector(psi.tensor, [(0, 2)]))


@pytest.mark.parametrize("theta", range(8))
def test_one_wire_rotation_then_h(theta):
    psi = StateVector(np.array([[0.6, 0.8]]), [0])
    p = single_wire([(-theta) % 8])
    out = run_pattern_plain(p, StateVector(psi.tensor, [(0, 0)]), np.random.default_rng(theta))
    apply_gate(psi, "Z", 0, angle=theta)
    apply_gate(psi, "H", 0)
    assert equal_up_to_phase(StateVector(out.tensor, [0]), psi)


def test_dump_format():
    text = dump_pattern(single_wire([3, 0]))
    assert text == "0 0 0 3 - -\n1 0 1 0 0 -\n2 0 2 - 1 0\n"
    assert dump_pattern(compile_toffoli()) == dump_pattern(compile_toffoli())
