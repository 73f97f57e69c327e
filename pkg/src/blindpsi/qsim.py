"""Batched pure-state simulator.

Every state carries a leading batch axis so that many independent protocol
instances can advance in lockstep through the same gate sequence. A batch of
one is an ordinary statevector.

Angles are integers mod 8 in units of pi/4 (``2`` means pi/2, ``4`` means pi).
Wherever an angle or a condition bit is accepted, a per-instance array of
shape ``(batch,)`` may be given instead of a scalar.
"""

from __future__ import annotations

import os
from typing import Hashable, Iterable, Sequence

import numpy as np

DEFAULT_QUBIT_CAP = 24
QUBIT_CAP_ENV = "BLINDPSI_QUBIT_CAP"

_SQRT1_2 = 1.0 / np.sqrt(2.0)

GATES = ("X", "Z", "H", "CZ", "CNOT")


class QubitError(ValueError):
    """Unknown, duplicate or clashing qubit labels."""


class QubitCapExceeded(RuntimeError):
    """Raised when an allocation would exceed the configured live-qubit cap."""


def qubit_cap() -> int:
    """Live-qubit cap, overridable through ``BLINDPSI_QUBIT_CAP``."""
    raw = os.environ.get(QUBIT_CAP_ENV)
    return int(raw) if raw else DEFAULT_QUBIT_CAP


def angle8(value):
    """Reduce an integer angle (or array of them) into ``{0, ..., 7}``."""
    return np.mod(value, 8) if isinstance(value, np.ndarray) else int(value) % 8


def phase(theta) -> np.ndarray:
    """``exp(i * theta * pi / 4)`` for an Angle8 value or array."""
    return np.exp(0.25j * np.pi * np.asarray(theta, dtype=float))


class StateVector:
    """Amplitude tensor of shape ``(batch, 2, ..., 2)`` plus qubit labels.

    Label ``labels[k]`` is tensor axis ``k + 1``; the first label is the most
    significant bit of the flattened vector returned by :meth:`vector`.
    """

    __slots__ = ("tensor", "labels", "_released")

    def __init__(self, tensor: np.ndarray, labels: Sequence[Hashable]):
        labels = list(labels)
        if len(set(labels)) != len(labels):
            raise QubitError(f"duplicate labels {labels}")
        tensor = np.asarray(tensor, dtype=complex)
        if tensor.ndim != len(labels) + 1 or any(d != 2 for d in tensor.shape[1:]):
            raise ValueError(f"tensor shape {tensor.shape} does not match {len(labels)} qubits")
        self.tensor = tensor
        self.labels = labels
        # label -> per-instance mask of instances already measured (partial readout)
        self._released: dict = {}

    # -- construction -----------------------------------------------------

    @classmethod
    def from_vector(cls, vector, labels: Sequence[Hashable], batch: int = 1) -> "StateVector":
        vec = np.asarray(vector, dtype=complex)
        k = len(labels)
        if vec.ndim == 1:
            vec = np.broadcast_to(vec, (batch, vec.size))
        return cls(vec.reshape((vec.shape[0],) + (2,) * k).copy(), labels)

    @classmethod
    def basis(cls, bits, labels: Sequence[Hashable], batch: int | None = None) -> "StateVector":
        """Computational basis state; ``bits`` is ``(k,)`` or ``(batch, k)``."""
        bits = np.atleast_2d(np.asarray(bits, dtype=np.int64))
        if batch is not None and bits.shape[0] == 1:
            bits = np.repeat(bits, batch, axis=0)
        b, k = bits.shape
        if k != len(labels):
            raise ValueError("one bit per label required")
        index = np.zeros(b, dtype=np.int64)
        for col in range(k):
            index = (index << 1) | bits[:, col]
        flat = np.zeros((b, 2**k), dtype=complex)
        flat[np.arange(b), index] = 1.0
        return cls(flat.reshape((b,) + (2,) * k), labels)

    def copy(self) -> "StateVector":
        out = StateVector(self.tensor.copy(), list(self.labels))
        out._released = {k: v.copy() for k, v in self._released.items()}
        return out

    # -- inspection -------------------------------------------------------

    @property
    def batch(self) -> int:
        return self.tensor.shape[0]

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def axis(self, label: Hashable) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise QubitError(f"unknown qubit {label!r}") from None

    def vector(self, index: int = 0) -> np.ndarray:
        return self.tensor[index].reshape(-1)

    def vectors(self) -> np.ndarray:
        return self.tensor.reshape(self.batch, -1)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors(), axis=1)

    def reordered(self, labels: Sequence[Hashable]) -> "StateVector":
        """Copy with axes permuted into ``labels`` order."""
        if sorted(map(repr, labels)) != sorted(map(repr, self.labels)):
            raise QubitError(f"label sets differ: {labels} vs {self.labels}")
        perm = [0] + [self.axis(lab) for lab in labels]
        return StateVector(np.transpose(self.tensor, perm).copy(), labels)

    def __repr__(self) -> str:
        return f"StateVector(batch={self.batch}, labels={self.labels})"

    # -- helpers ----------------------------------------------------------

    def _bcast(self, values, dtype=None) -> np.ndarray:
        """Shape a scalar/per-instance value to broadcast against one slice."""
        arr = np.asarray(values, dtype=dtype)
        if arr.ndim == 0:
            return arr
        if arr.shape != (self.batch,):
            raise ValueError(f"per-instance value has shape {arr.shape}, batch is {self.batch}")
        return arr.reshape((self.batch,) + (1,) * (self.num_qubits - 1))

    def _slices(self, ax: int):
        i0 = [slice(None)] * self.tensor.ndim
        i1 = list(i0)
        i0[ax] = 0
        i1[ax] = 1
        return tuple(i0), tuple(i1)

    def _mask(self, when):
        if when is None:
            return None
        mask = np.asarray(when).astype(bool)
        if mask.ndim == 0:
            return None if mask else np.zeros(self.batch, dtype=bool)
        return mask

    # -- gates ------------------------------------------------------------

    def x(self, q, when=None) -> "StateVector":
        ax = self.axis(q)
        mask = self._mask(when)
        flipped = np.flip(self.tensor, axis=ax)
        if mask is None:
            self.tensor = flipped.copy()
        else:
            m = mask.reshape((self.batch,) + (1,) * self.num_qubits)
            self.tensor = np.where(m, flipped, self.tensor)
        return self

    def z(self, q, theta=4, when=None) -> "StateVector":
        ax = self.axis(q)
        _, i1 = self._slices(ax)
        ph = phase(theta)
        mask = self._mask(when)
        if mask is not None:
            ph = np.where(mask, ph, 1.0)
        self.tensor[i1] *= self._bcast(ph)
        return self

    def h(self, q, when=None) -> "StateVector":
        ax = self.axis(q)
        i0, i1 = self._slices(ax)
        a0 = self.tensor[i0]
        a1 = self.tensor[i1]
        new = self.tensor.copy()
        new[i0] = (a0 + a1) * _SQRT1_2
        new[i1] = (a0 - a1) * _SQRT1_2
        mask = self._mask(when)
        if mask is None:
            self.tensor = new
        else:
            m = mask.reshape((self.batch,) + (1,) * self.num_qubits)
            self.tensor = np.where(m, new, self.tensor)
        return self

    def _pair(self, a, b):
        if a == b:
            raise QubitError(f"two-qubit gate needs distinct targets, got {a!r} twice")
        return self.axis(a), self.axis(b)

    def cz(self, a, b, when=None) -> "StateVector":
        ax, bx = self._pair(a, b)
        idx = [slice(None)] * self.tensor.ndim
        idx[ax] = 1
        idx[bx] = 1
        idx = tuple(idx)
        mask = self._mask(when)
        if mask is None:
            self.tensor[idx] *= -1.0
        else:
            sign = np.where(mask, -1.0, 1.0).reshape((self.batch,) + (1,) * (self.num_qubits - 2))
            self.tensor[idx] *= sign
        return self

    def cnot(self, control, target, when=None) -> "StateVector":
        cx, tx = self._pair(control, target)
        i10 = [slice(None)] * self.tensor.ndim
        i10[cx] = 1
        i10[tx] = 0
        i11 = list(i10)
        i11[tx] = 1
        i10, i11 = tuple(i10), tuple(i11)
        a10 = self.tensor[i10].copy()
        a11 = self.tensor[i11].copy()
        mask = self._mask(when)
        if mask is None:
            self.tensor[i10] = a11
            self.tensor[i11] = a10
        else:
            m = mask.reshape((self.batch,) + (1,) * (self.num_qubits - 2))
            self.tensor[i10] = np.where(m, a11, a10)
            self.tensor[i11] = np.where(m, a10, a11)
        return self

    # -- measurement ------------------------------------------------------

    def measure(self, q, delta=None, rng: np.random.Generator | None = None,
                mask=None, postselect=None) -> np.ndarray:
        """Measure ``q`` and release it.

        With ``delta=None`` the basis is computational; otherwise it is
        ``{|+_delta>, |-_delta>}`` and outcome 0 means ``|+_delta>``.

        ``mask`` restricts the measurement to some instances (a party reading
        out only the instances it holds). Those instances get the qubit reset
        to a ``|0>`` placeholder; the axis is dropped once every instance has
        been measured. Unmeasured instances report ``-1``.

        ``postselect`` forces the outcome (projection + renormalisation), used
        by the exhaustive identity checks.
        """
        ax = self.axis(q)
        i0, i1 = self._slices(ax)
        a0 = self.tensor[i0]
        a1 = self.tensor[i1]
        if delta is None:
            b0, b1 = a0, a1
        else:
            e = self._bcast(phase(-np.asarray(delta)))
            b0 = (a0 + e * a1) * _SQRT1_2
            b1 = (a0 - e * a1) * _SQRT1_2
        rest_axes = tuple(range(1, self.tensor.ndim - 1))
        p0 = np.sum(np.abs(b0) ** 2, axis=rest_axes) if rest_axes else np.abs(b0) ** 2
        p1 = np.sum(np.abs(b1) ** 2, axis=rest_axes) if rest_axes else np.abs(b1) ** 2
        total = p0 + p1
        if postselect is not None:
            outcome = np.broadcast_to(np.asarray(postselect, dtype=np.int8), (self.batch,)).copy()
        else:
            if rng is None:
                raise ValueError("measurement needs an rng unless postselected")
            outcome = (rng.random(self.batch) * total >= p0).astype(np.int8)
        chosen_p = np.where(outcome == 1, p1, p0)
        if np.any(chosen_p <= 1e-300):
            raise ValueError("postselected a zero-probability outcome")
        scale = self._bcast(1.0 / np.sqrt(chosen_p))
        sel = self._bcast(outcome.astype(bool))
        rest = np.where(sel, b1, b0) * scale

        mask = None if mask is None else np.asarray(mask, dtype=bool)
        done = self._released.get(q)
        if mask is None or (mask.all() and done is None):
            self._drop(q, rest)
            return outcome
        if done is not None and np.any(done & mask):
            raise QubitError(f"qubit {q!r} already measured on some instances")
        m = self._bcast(mask)
        new = self.tensor.copy()
        new[i0] = np.where(m, rest, a0)
        new[i1] = np.where(m, 0.0, a1)
        self.tensor = new
        done = mask if done is None else (done | mask)
        self._released[q] = done
        if done.all():
            self._drop(q, self.tensor[i0])
        return np.where(mask, outcome, -1).astype(np.int8)

    def _drop(self, q, rest):
        self.labels.remove(q)
        self._released.pop(q, None)
        self.tensor = np.ascontiguousarray(rest)


# -- spec-level functional API -------------------------------------------------


def prepare_plus(theta=0, label: Hashable = 0, batch: int | None = None) -> StateVector:
    """``(|0> + e^{i theta pi/4}|1>)/sqrt(2)`` on one qubit."""
    theta = np.asarray(theta)
    if batch is None:
        batch = theta.shape[0] if theta.ndim else 1
    tensor = np.empty((batch, 2), dtype=complex)
    tensor[:, 0] = _SQRT1_2
    tensor[:, 1] = _SQRT1_2 * np.broadcast_to(phase(theta), (batch,))
    return StateVector(tensor, [label])


def apply_gate(state: StateVector, gate: str, targets, angle=None, when=None) -> StateVector:
    """Apply one of X, Z(angle), H, CZ, CNOT in place and return the state.

    ``Z`` without an angle is the Pauli Z (angle 4). ``when`` is an optional
    per-instance condition bit.
    """
    if isinstance(targets, (str, int)) or not isinstance(targets, Iterable):
        targets = (targets,)
    targets = tuple(targets)
    arity = 2 if gate in ("CZ", "CNOT") else 1
    if gate not in GATES:
        raise ValueError(f"unsupported gate {gate!r}")
    if len(targets) != arity:
        raise QubitError(f"{gate} takes {arity} target(s), got {targets}")
    if gate == "X":
        return state.x(targets[0], when)
    if gate == "Z":
        return state.z(targets[0], 4 if angle is None else angle, when)
    if gate == "H":
        return state.h(targets[0], when)
    if gate == "CZ":
        return state.cz(*targets, when=when)
    return state.cnot(*targets, when=when)


def measure_rotated(state: StateVector, qubit, delta, rng=None, **kw) -> np.ndarray:
    """Measure in ``{|+_delta>, |-_delta>}``; returns per-instance bits."""
    return state.measure(qubit, delta, rng, **kw)


def measure_computational(state: StateVector, qubit, rng=None, **kw) -> np.ndarray:
    return state.measure(qubit, None, rng, **kw)


def attach(a: StateVector, b: StateVector) -> StateVector:
    """Tensor product ``a (x) b``; batch sizes must match or one must be 1."""
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise QubitError(f"label clash {sorted(map(repr, clash))}")
    if a.batch != b.batch and 1 not in (a.batch, b.batch):
        raise ValueError(f"batch mismatch {a.batch} vs {b.batch}")
    batch = max(a.batch, b.batch)
    va = a.vectors()
    vb = b.vectors()
    prod = va[:, :, None] * vb[:, None, :]
    prod = np.broadcast_to(prod, (batch,) + prod.shape[1:])
    out = StateVector(prod.reshape((batch,) + (2,) * (a.num_qubits + b.num_qubits)).copy(),
                      a.labels + b.labels)
    for src in (a, b):
        for lab, done in src._released.items():
            out._released[lab] = np.broadcast_to(done, (batch,)).copy()
    return out


def overlap(a: StateVector, b: StateVector) -> np.ndarray:
    """Per-instance ``|<a|b>|``; compares in ``a``'s label order when possible."""
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits")
    if set(a.labels) == set(b.labels) and a.labels != b.labels:
        b = b.reordered(a.labels)
    return np.abs(np.sum(np.conj(a.vectors()) * b.vectors(), axis=1))


def infidelity(a: StateVector, b: StateVector) -> np.ndarray:
    return 1.0 - overlap(a, b) ** 2


def equal_up_to_phase(a: StateVector, b: StateVector, tol: float = 1e-9) -> bool:
    return bool(np.all(overlap(a, b) >= 1.0 - tol))


# -- multi-component register ---------------------------------------------------


class QuantumWorld:
    """All live qubits of a run, kept as independent product components.

    Components merge only when a two-qubit gate couples them, so unentangled
    qubits (test decoys, freshly prepared states) never inflate the amplitude
    tensor. Each qubit has a per-instance holder; operations are checked
    against it, which is how "sending" a qubit transfers control.
    """

    def __init__(self, batch: int, rng: np.random.Generator, cap: int | None = None):
        self.batch = batch
        self.rng = rng
        self.cap = qubit_cap() if cap is None else cap
        self._comp: dict = {}
        self.owner: dict = {}
        self.peak = 0

    # bookkeeping

    @property
    def live(self) -> int:
        return len(self._comp)

    def labels(self) -> list:
        return list(self._comp)

    def _register(self, state: StateVector, owner) -> None:
        if self.live + state.num_qubits > self.cap:
            raise QubitCapExceeded(f"{self.live + state.num_qubits} live qubits exceeds cap {self.cap}")
        if state.batch != self.batch:
            state = attach(StateVector(np.ones((self.batch,), dtype=complex), []), state)
        for lab in state.labels:
            if lab in self._comp:
                raise QubitError(f"label {lab!r} already live")
            self._comp[lab] = state
            self.owner[lab] = np.full(self.batch, owner, dtype=object)
        self.peak = max(self.peak, self.live)

    def _check(self, actor, labels, when=None) -> None:
        for lab in labels:
            if lab not in self._comp:
                raise QubitError(f"unknown qubit {lab!r}")
            held = self.owner[lab]
            if when is not None:
                sel = np.broadcast_to(np.asarray(when, dtype=bool), (self.batch,))
                held = held[sel]
                actor_sel = actor[sel] if isinstance(actor, np.ndarray) else actor
            else:
                actor_sel = actor
            if not np.all(held == actor_sel):
                raise PermissionError(f"{actor} does not hold qubit {lab!r}")

    def _merged(self, labels) -> StateVector:
        comps = []
        for lab in labels:
            c = self._comp[lab]
            if all(c is not o for o in comps):
                comps.append(c)
        state = comps[0]
        for other in comps[1:]:
            state = attach(state, other)
        if len(comps) > 1:
            for lab in state.labels:
                self._comp[lab] = state
        return state

    # operations

    def prepare_plus(self, label, theta, owner) -> None:
        self._register(prepare_plus(theta, label, batch=self.batch), owner)

    def prepare_basis(self, label, bits, owner) -> None:
        bits = np.broadcast_to(np.asarray(bits, dtype=np.int64), (self.batch,))
        self._register(StateVector.basis(bits[:, None], [label]), owner)

    def apply(self, actor, gate: str, targets, angle=None, when=None) -> None:
        targets = (targets,) if not isinstance(targets, tuple) else targets
        self._check(actor, targets, when)
        apply_gate(self._merged(targets), gate, targets, angle, when)

    def measure(self, actor, label, delta=None, mask=None, postselect=None) -> np.ndarray:
        self._check(actor, (label,), mask)
        state = self._comp[label]
        bits = state.measure(label, delta, self.rng, mask=mask, postselect=postselect)
        if label not in state.labels:
            del self._comp[label]
            del self.owner[label]
        return bits

    def swap(self, actor, a, b, when=None) -> None:
        """SWAP, optionally only on the ``when`` instances.

        Two unentangled single-qubit registers stay a product on every
        instance, so their amplitudes are exchanged directly; otherwise the
        SWAP is three CNOTs.
        """
        ca, cb = self._comp.get(a), self._comp.get(b)
        if ca is not None and cb is not None and ca is not cb and ca.num_qubits == cb.num_qubits == 1:
            self._check(actor, (a, b), when)
            sel = np.ones(self.batch, dtype=bool) if when is None else np.asarray(when, dtype=bool)
            ta = ca.tensor.copy()
            ca.tensor[sel] = cb.tensor[sel]
            cb.tensor[sel] = ta[sel]
            return
        for c, t in ((a, b), (b, a), (a, b)):
            self.apply(actor, "CNOT", (c, t), when=when)

    def relabel(self, actor, old, new) -> None:
        """Rename a register the actor holds on every instance."""
        self._check(actor, (old,))
        if new in self._comp:
            raise QubitError(f"label {new!r} already live")
        state = self._comp.pop(old)
        state.labels[state.labels.index(old)] = new
        if old in state._released:
            state._released[new] = state._released.pop(old)
        self._comp[new] = state
        self.owner[new] = self.owner.pop(old)

    def transfer(self, label, recipient, mask=None) -> None:
        if label not in self.owner:
            raise QubitError(f"unknown qubit {label!r}")
        if mask is None:
            self.owner[label][:] = recipient
        else:
            self.owner[label][np.asarray(mask, dtype=bool)] = recipient

    def state_of(self, labels) -> StateVector:
        """Copy of the joint state of ``labels`` (inspection for tests)."""
        comps = []
        for lab in labels:
            c = self._comp[lab]
            if all(c is not o for o in comps):
                comps.append(c)
        state = comps[0].copy()
        for other in comps[1:]:
            state = attach(state, other)
        return state
