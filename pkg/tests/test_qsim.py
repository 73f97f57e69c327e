import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindpsi.qsim import (QuantumWorld, QubitCapExceeded, QubitError, StateVector, apply_gate,
                           attach, equal_up_to_phase, measure_computational, measure_rotated,
                           prepare_plus)

S = 1 / np.sqrt(2)


def vec(state, i=0):
    return state.vector(i)


def test_prepare_plus_examples():
    assert np.allclose(vec(prepare_plus(0)), [S, S])
    assert np.allclose(vec(prepare_plus(4)), [S, -S])
    assert np.allclose(vec(prepare_plus(2)), [S, 1j * S])


def test_x_and_z_gates():
    st_ = StateVector.basis([0], ["a"])
    apply_gate(st_, "X", "a")
    assert np.allclose(vec(st_), [0, 1])
    plus = prepare_plus(0, "a")
    apply_gate(plus, "Z", "a", angle=2)
    assert equal_up_to_phase(plus, prepare_plus(2, "a"))


def test_cz_symmetric_and_cnot_truth_table():
    a = attach(prepare_plus(1, "a"), prepare_plus(3, "b"))
    b = a.copy()
    apply_gate(a, "CZ", ("a", "b"))
    apply_gate(b, "CZ", ("b", "a"))
    assert np.allclose(a.vectors(), b.vectors())
    for bits in ([0, 0], [0, 1], [1, 0], [1, 1]):
        s = StateVector.basis(bits, ["c", "t"])
        apply_gate(s, "CNOT", ("c", "t"))
        want = StateVector.basis([bits[0], bits[0] ^ bits[1]], ["c", "t"])
        assert np.allclose(s.vectors(), want.vectors())


def test_gate_errors():
    s = prepare_plus(0, "a")
    with pytest.raises(QubitError):
        apply_gate(s, "X", "zz")
    s = attach(s, prepare_plus(0, "b"))
    with pytest.raises(QubitError):
        apply_gate(s, "CZ", ("a", "a"))
    with pytest.raises(ValueError):
        apply_gate(s, "T", "a")


def test_cz_then_measure_is_uniform():
    # 2-qubit enumeration: after CZ on |++>, qubit b's reduced state is maximally mixed
    s = attach(prepare_plus(0, "a"), prepare_plus(0, "b"))
    apply_gate(s, "CZ", ("a", "b"))
    amps = s.vector().reshape(2, 2)
    p0 = sum(abs(amps[x, 0] + amps[x, 1]) ** 2 / 2 for x in range(2))
    assert p0 == pytest.approx(0.5)
    batch = attach(prepare_plus(0, "a", batch=20000), prepare_plus(0, "b"))
    apply_gate(batch, "CZ", ("a", "b"))
    out = measure_rotated(batch, "b", 0, np.random.default_rng(0))
    assert abs(out.mean() - 0.5) < 3 * 0.5 / np.sqrt(20000)


@pytest.mark.parametrize("theta", range(8))
def test_measure_in_own_basis_is_deterministic(theta):
    rng = np.random.default_rng(theta)
    assert measure_rotated(prepare_plus(theta, batch=50), 0, theta, rng).tolist() == [0] * 50
    assert measure_rotated(prepare_plus(theta, batch=50), 0, theta + 4, rng).tolist() == [1] * 50


def test_measure_releases_qubit():
    s = attach(prepare_plus(0, "a"), prepare_plus(0, "b"))
    measure_rotated(s, "a", 0, np.random.default_rng(0))
    assert s.labels == ["b"] and s.tensor.shape == (1, 2)
    with pytest.raises(QubitError):
        measure_rotated(s, "a", 0, np.random.default_rng(0))


def test_computational_measurement_examples():
    rng = np.random.default_rng(1)
    assert measure_computational(StateVector.basis([1], [0], batch=10), 0, rng).tolist() == [1] * 10
    x0 = StateVector.basis([0], [0], batch=10)
    apply_gate(x0, "X", 0)
    assert measure_computational(x0, 0, rng).tolist() == [1] * 10
    out = measure_computational(prepare_plus(0, batch=10000), 0, rng)
    assert abs(out.mean() - 0.5) < 3 * 0.5 / 100


@pytest.mark.parametrize("theta,delta", [(0, 0), (1, 0), (3, 1), (2, 6), (5, 7)])
def test_born_statistics(theta, delta):
    n = 10000
    p0 = (1 + np.cos((theta - delta) * np.pi / 4)) / 2
    out = measure_rotated(prepare_plus(theta, batch=n), 0, delta, np.random.default_rng(7))
    zeros = int(np.sum(out == 0))
    sd = np.sqrt(n * p0 * (1 - p0))
    assert abs(zeros - n * p0) <= 3 * sd + 1e-9


def test_zero_state_any_delta_is_half():
    for delta in range(8):
        s = StateVector.basis([0], [0])
        p0 = abs((s.vector()[0] + np.exp(-0.25j * np.pi * delta) * s.vector()[1]) / np.sqrt(2)) ** 2
        assert p0 == pytest.approx(0.5)


def test_attach_and_phase_equality():
    s = attach(StateVector.basis([0], ["a"]), StateVector.basis([1], ["b"]))
    assert np.allclose(s.vector(), [0, 1, 0, 0])
    with pytest.raises(QubitError):
        attach(s, prepare_plus(0, "a"))
    plus = prepare_plus(0)
    shifted = StateVector(plus.tensor * np.exp(1j * np.pi / 3), [0])
    assert equal_up_to_phase(plus, shifted)
    assert not equal_up_to_phase(plus, prepare_plus(4))
    with pytest.raises(ValueError):
        equal_up_to_phase(plus, s)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["X", "Z", "H", "CZ", "CNOT"]), st.integers(0, 2),
                          st.integers(0, 2), st.integers(0, 7)), min_size=1, max_size=25))
def test_norm_preserved(ops):
    s = attach(attach(prepare_plus(1, 0), prepare_plus(2, 1)), StateVector.basis([1], [2]))
    for gate, a, b, ang in ops:
        if gate in ("CZ", "CNOT"):
            if a == b:
                continue
            apply_gate(s, gate, (a, b))
        else:
            apply_gate(s, gate, a, angle=ang)
        assert abs(s.norms()[0] - 1) < 1e-9


def test_per_instance_angles_and_conditions():
    s = prepare_plus(np.array([0, 2, 4]))
    apply_gate(s, "X", 0, when=np.array([0, 1, 0]))
    assert np.allclose(s.vector(0), [S, S])
    assert np.allclose(s.vector(1), [1j * S, S])
    assert np.allclose(s.vector(2), [S, -S])


def test_masked_measurement_keeps_other_instances():
    s = prepare_plus(np.array([0, 4, 0]))
    out = s.measure(0, 0, np.random.default_rng(0), mask=np.array([True, True, False]))
    assert out.tolist() == [0, 1, -1]
    assert s.labels == [0]
    assert np.allclose(s.vector(2), [S, S])
    out = s.measure(0, 0, np.random.default_rng(0), mask=np.array([False, False, True]))
    assert out.tolist() == [-1, -1, 0] and s.labels == []


def test_seeded_determinism():
    def run(seed):
        s = attach(prepare_plus(1, "a", batch=64), prepare_plus(5, "b"))
        apply_gate(s, "CZ", ("a", "b"))
        rng = np.random.default_rng(seed)
        return measure_rotated(s, "a", 3, rng).tolist() + measure_rotated(s, "b", 2, rng).tolist()

    assert run(11) == run(11)


def test_world_ownership_cap_and_components():
    w = QuantumWorld(4, np.random.default_rng(0), cap=3)
    w.prepare_plus("a", 0, owner="C1")
    w.prepare_plus("b", 1, owner="C1")
    with pytest.raises(PermissionError):
        w.apply("S", "H", "a")
    w.transfer("a", "S")
    w.transfer("b", "S")
    w.apply("S", "CZ", ("a", "b"))
    w.prepare_plus("c", 0, owner="S")
    with pytest.raises(QubitCapExceeded):
        w.prepare_plus("d", 0, owner="S")
    assert w.peak == 3
    w.measure("S", "a", 0)
    assert w.live == 2


def test_world_conditional_swap_matches_cnots():
    w = QuantumWorld(4, np.random.default_rng(0))
    w.prepare_plus("a", np.array([0, 1, 2, 3]), owner="S")
    w.prepare_plus("b", np.array([4, 5, 6, 7]), owner="S")
    when = np.array([1, 0, 1, 0], dtype=bool)
    w.swap("S", "a", "b", when=when)
    a = w.state_of(["a"])
    assert equal_up_to_phase(a, prepare_plus(np.array([4, 1, 6, 3]), "a"))


def test_cap_env_override(monkeypatch):
    from blindpsi import qsim
    monkeypatch.setenv("BLINDPSI_QUBIT_CAP", "5")
    assert qsim.qubit_cap() == 5
    monkeypatch.delenv("BLINDPSI_QUBIT_CAP")
    assert qsim.qubit_cap() == 24
