"""Additive secret sharing between the two clients and the computation oracle.

Shares are plain additive shares (mod 8 for angles, mod 2 for bits). The
oracle is an ideal functionality: it alone reassembles secrets from the
shares deposited by both clients, and the only thing it hands the server is
the blinded measurement angle ``delta``.

All values may be scalars or per-instance numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

CLIENTS = ("C1", "C2")


class MissingShareError(KeyError):
    """A secret was requested before both clients deposited their shares."""


@dataclass(frozen=True)
class AngleShare:
    owner: str
    value: object
    qubit: Hashable = None
    modulus: int = 8


def _draw(rng: np.random.Generator, modulus: int, like):
    shape = np.shape(like)
    if shape:
        return rng.integers(0, modulus, size=shape)
    return int(rng.integers(0, modulus))


def share_angle(secret, rng: np.random.Generator, qubit: Hashable = None,
                owners=CLIENTS, modulus: int = 8) -> tuple[AngleShare, AngleShare]:
    """Split ``secret`` into ``(share1, share2)`` with ``share1`` uniform."""
    s1 = _draw(rng, modulus, secret)
    s2 = np.mod(np.asarray(secret) - s1, modulus)
    if not np.shape(s2):
        s2 = int(s2)
    return (AngleShare(owners[0], s1, qubit, modulus),
            AngleShare(owners[1], s2, qubit, modulus))


def share_bit(secret, rng: np.random.Generator, qubit: Hashable = None,
              owners=CLIENTS) -> tuple[AngleShare, AngleShare]:
    return share_angle(secret, rng, qubit, owners, modulus=2)


def reconstruct(a: AngleShare, b: AngleShare):
    if a.qubit != b.qubit:
        raise ValueError(f"shares belong to different qubits: {a.qubit!r} vs {b.qubit!r}")
    if a.modulus != b.modulus:
        raise ValueError("shares use different moduli")
    out = np.mod(np.asarray(a.value) + np.asarray(b.value), a.modulus)
    return out if np.shape(out) else int(out)


def s_value(m, r):
    """Corrected outcome ``s = m xor r``."""
    return np.bitwise_xor(m, r)


def delta_angle(phi, theta, r, c=0, c_prev=0, sx=0, sz=0):
    """Blinded angle ``(-1)^(c+sx) phi + 4 sz + 4 c_prev + 4 r + theta`` mod 8."""
    sign = np.where((np.asarray(c) + np.asarray(sx)) % 2 == 1, -1, 1)
    out = np.mod(sign * np.asarray(phi) + 4 * (np.asarray(sz) + np.asarray(c_prev) + np.asarray(r))
                 + np.asarray(theta), 8)
    return out if np.shape(out) else int(out)


def delta_counts(phi: int, c: int, c_prev: int, sx: int, sz: int) -> np.ndarray:
    """Histogram of ``delta`` over all 16 pairs ``(theta, r)`` for fixed public data."""
    counts = np.zeros(8, dtype=np.int64)
    for theta in range(8):
        for r in range(2):
            counts[delta_angle(phi, theta, r, c, c_prev, sx, sz)] += 1
    return counts


# -- oracle -----------------------------------------------------------------------


@dataclass
class OracleTape:
    """Shares deposited per ``(qubit, field)`` plus public announcements.

    ``shares[(qubit, field)]`` maps a client id to its share value.
    ``public`` holds values announced by the server (``t`` outcomes) and
    ``s`` the reconstructed corrected outcomes.
    """

    shares: dict = field(default_factory=dict)
    public: dict = field(default_factory=dict)
    s: dict = field(default_factory=dict)

    def deposit(self, owner: str, qubit: Hashable, name: str, value) -> None:
        if owner not in CLIENTS:
            raise PermissionError(f"{owner} may not deposit shares")
        slot = self.shares.setdefault((qubit, name), {})
        if owner in slot:
            raise ValueError(f"{owner} already deposited {name} for {qubit!r}")
        slot[owner] = value

    def announce(self, qubit: Hashable, name: str, value) -> None:
        self.public[(qubit, name)] = value

    def has(self, qubit: Hashable, name: str) -> bool:
        return len(self.shares.get((qubit, name), {})) == 2

    def secret(self, qubit: Hashable, name: str, modulus: int):
        slot = self.shares.get((qubit, name), {})
        if len(slot) != 2:
            raise MissingShareError(f"{name} for {qubit!r}: have shares from {sorted(slot)}")
        return np.mod(np.asarray(slot["C1"]) + np.asarray(slot["C2"]), modulus)

    def announced(self, qubit: Hashable, name: str):
        try:
            return self.public[(qubit, name)]
        except KeyError:
            raise MissingShareError(f"no announced {name} for {qubit!r}") from None


class ComputationOracle:
    """Ideal functionality computing ``delta`` and output keys from a tape.

    Qubit kinds recorded on the tape:

    * input qubits: shares of ``c`` and of both pad angles (``theta_own``
      from the owner, ``theta_other`` from the helper), and the announced
      ``t``. The effective pad is ``(-1)^c (theta_own + (-1)^(t+c) theta_other)``
      because the owner applies ``X^c Z(theta)`` rather than ``Z(theta) X^c``.
    * brickwork qubits: shares of ``theta1`` and ``theta2`` and the announced
      ``t``; the pad is ``theta2 + (-1)^t theta1``.
    """

    def __init__(self, pattern, tape: OracleTape | None = None):
        self.pattern = pattern
        self.tape = OracleTape() if tape is None else tape
        self._inputs = set(pattern.inputs)
        self._finv = pattern.flow.inverse()

    def _c(self, j):
        return self.tape.secret(j, "c", 2) if j in self._inputs else 0

    def theta(self, j):
        t = np.asarray(self.tape.announced(j, "t"))
        if j in self._inputs:
            c = self._c(j)
            own = self.tape.secret(j, "theta_own", 8)
            other = self.tape.secret(j, "theta_other", 8)
            pad = own + np.where((t + c) % 2 == 1, -other, other)
            return np.mod(np.where(c == 1, -pad, pad), 8)
        th1 = self.tape.secret(j, "theta1", 8)
        th2 = self.tape.secret(j, "theta2", 8)
        return np.mod(th2 + np.where(t % 2 == 1, -th1, th1), 8)

    def _sum(self, deps):
        total = 0
        for i in deps:
            if i not in self.tape.s:
                raise MissingShareError(f"no outcome recorded for {i!r}")
            total = total + np.asarray(self.tape.s[i])
        return np.mod(total, 2)

    def delta(self, j, phi=None):
        """``delta_j`` for measured qubit ``j``; the only value released to the server."""
        phi = self.pattern.phi[j] if phi is None else phi
        sx = self._sum(self.pattern.xdeps[j])
        sz = self._sum(self.pattern.zdeps[j])
        prev = self._finv.get(j)
        c_prev = self._c(prev) if prev is not None else 0
        r = self.tape.secret(j, "r", 2)
        return delta_angle(phi, self.theta(j), r, self._c(j), c_prev, sx, sz)

    def record_outcome(self, j, m) -> None:
        self.tape.announce(j, "m", m)
        self.tape.s[j] = s_value(np.asarray(m, dtype=np.int64), self.tape.secret(j, "r", 2))

    def output_keys(self, j) -> tuple:
        """``(s^X, s^Z)`` for an output qubit."""
        return self._sum(self.pattern.xdeps[j]), self._sum(self.pattern.zdeps[j])


def oracle_delta(j, phi_j, tape: OracleTape, s_values: dict, pattern) -> int | np.ndarray:
    """Functional form: ``delta_j`` from a tape, explicit ``s`` values and angle."""
    oracle = ComputationOracle(pattern, OracleTape(tape.shares, tape.public, dict(s_values)))
    return oracle.delta(j, phi_j)
