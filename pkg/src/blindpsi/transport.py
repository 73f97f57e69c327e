"""In-process message bus between C1, C2, the server S and the oracle O.

Every send is appended to a :class:`Transcript`. Quantum messages carry only
a qubit handle; sending one hands control of the qubit (for the listed
instances) to the recipient inside the shared :class:`~blindpsi.qsim.QuantumWorld`.

Wire format, one message per line::

    <seq> <sender>><recipient> <KIND> <hex of canonical JSON payload>
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

ENDPOINTS = ("C1", "C2", "S", "O")

LANES = frozenset(frozenset(p) for p in (
    ("C1", "S"), ("C2", "S"), ("C1", "C2"), ("C1", "O"), ("C2", "O"), ("S", "O"),
))


class Kind(str, Enum):
    QUBIT = "QUBIT"
    ANGLE_SHARE = "ANGLE_SHARE"
    DELTA = "DELTA"
    OUTCOME_T = "OUTCOME_T"
    OUTCOME_M = "OUTCOME_M"
    TEST_REQ = "TEST_REQ"
    TEST_REVEAL = "TEST_REVEAL"
    OUTPUT_QUBIT = "OUTPUT_QUBIT"
    CLASSIC_BITS = "CLASSIC_BITS"
    ABORT = "ABORT"


QUANTUM_KINDS = (Kind.QUBIT, Kind.OUTPUT_QUBIT)


class LaneError(PermissionError):
    """Endpoint is not a member of the lane it tried to use."""


class ProtocolAbort(RuntimeError):
    """Raised at a receiver when an ABORT message arrives."""

    def __init__(self, reason: str, payload: dict | None = None):
        super().__init__(reason)
        self.payload = payload or {}


class TranscriptParseError(ValueError):
    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line


def jsonable(value):
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


def _encode(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode().hex()


@dataclass(frozen=True)
class Message:
    seq: int
    sender: str
    recipient: str
    kind: Kind
    payload: dict | None

    @property
    def lane(self) -> frozenset:
        return frozenset((self.sender, self.recipient))

    @property
    def width(self) -> int:
        """Number of qubits a quantum message moves (one per instance)."""
        if self.kind not in QUANTUM_KINDS or not self.payload:
            return 0
        return int(self.payload.get("width", 1))


class Transcript:
    """Ordered message log with per-kind counters.

    ``retain`` limits which kinds keep their payload (``None`` keeps all);
    dropped payloads are stored as ``None`` but quantum widths are always
    kept so qubit counting stays exact.
    """

    def __init__(self, retain=None):
        self.messages: list[Message] = []
        self.counts: Counter = Counter()
        self.qubits = 0
        self.retain = None if retain is None else frozenset(Kind(k) for k in retain)

    def append(self, msg: Message) -> None:
        self.counts[msg.kind] += 1
        self.qubits += msg.width
        if self.retain is not None and msg.kind not in self.retain:
            payload = {"width": msg.width} if msg.kind in QUANTUM_KINDS else None
        else:
            payload = jsonable(msg.payload)
        self.messages.append(Message(msg.seq, msg.sender, msg.recipient, msg.kind, payload))

    def __len__(self) -> int:
        return len(self.messages)

    def of_kind(self, kind) -> list[Message]:
        kind = Kind(kind)
        return [m for m in self.messages if m.kind is kind]

    def count_qubits(self) -> int:
        return self.qubits

    def kind_counts(self) -> dict:
        return {k.value: self.counts.get(k, 0) for k in Kind}

    def serialize(self) -> bytes:
        lines = [f"{m.seq} {m.sender}>{m.recipient} {m.kind.value} {_encode(m.payload)}"
                 for m in self.messages]
        return ("\n".join(lines) + "\n").encode() if lines else b""

    @classmethod
    def deserialize(cls, data: bytes | str) -> "Transcript":
        text = data.decode() if isinstance(data, bytes) else data
        out = cls()
        for n, line in enumerate(text.splitlines(), start=1):
            parts = line.split(" ")
            if len(parts) != 4:
                raise TranscriptParseError(n, f"expected 4 fields, got {len(parts)}")
            seq, lane, kind, hexload = parts
            try:
                sender, recipient = lane.split(">")
                if frozenset((sender, recipient)) not in LANES:
                    raise ValueError(f"unknown lane {lane}")
                msg = Message(int(seq), sender, recipient, Kind(kind),
                              json.loads(bytes.fromhex(hexload).decode()))
            except (ValueError, UnicodeDecodeError) as exc:
                raise TranscriptParseError(n, str(exc)) from None
            out.append(msg)
        return out


def count_qubits(transcript: Transcript) -> int:
    return transcript.count_qubits()


class Bus:
    """FIFO lanes plus transcript capture.

    The scheduler is round based: a ``recv`` on an empty lane is a protocol
    ordering bug and raises instead of blocking.
    """

    def __init__(self, world=None, transcript: Transcript | None = None):
        self.world = world
        self.transcript = Transcript() if transcript is None else transcript
        self._queues: dict = {}
        self._seq = 0
        self.aborted: Message | None = None

    @staticmethod
    def _lane(a: str, b: str) -> frozenset:
        lane = frozenset((a, b))
        if a == b or lane not in LANES:
            raise LaneError(f"no lane between {a} and {b}")
        return lane

    def send(self, sender: str, recipient: str, kind, payload: dict | None = None,
             mask=None) -> Message:
        """Queue a message; quantum kinds also transfer the named qubit.

        The receiver gets the payload as sent (numpy arrays intact); the
        transcript stores a JSON-normalised copy.
        """
        kind = Kind(kind)
        self._lane(sender, recipient)
        payload = dict(payload or {})
        if kind in QUANTUM_KINDS:
            label = payload["qubit"]
            if self.world is not None:
                self.world.transfer(label, recipient, mask)
            width = self.world.batch if self.world is not None and mask is None else None
            if mask is not None:
                idx = np.flatnonzero(np.asarray(mask, dtype=bool))
                payload["instances"] = idx
                width = len(idx)
            payload["width"] = 1 if width is None else width
        msg = Message(self._seq, sender, recipient, kind, payload)
        self._seq += 1
        self._queues.setdefault((sender, recipient), deque()).append(msg)
        self.transcript.append(msg)
        return msg

    def recv(self, endpoint: str, lane: tuple, kind=None) -> Message:
        """Next message queued for ``endpoint`` on ``lane``.

        ``lane`` is a pair of endpoint names, one of which must be
        ``endpoint`` itself.
        """
        lane_set = self._lane(*lane)
        if endpoint not in lane_set:
            raise LaneError(f"{endpoint} is not on lane {'-'.join(sorted(lane_set))}")
        if self.aborted is not None:
            raise ProtocolAbort(self.aborted.payload.get("reason", "aborted"), self.aborted.payload)
        (peer,) = lane_set - {endpoint}
        q = self._queues.get((peer, endpoint))
        if not q:
            raise LookupError(f"{endpoint} has nothing pending from {peer}")
        msg = q.popleft()
        if kind is not None and msg.kind is not Kind(kind):
            raise LookupError(f"{endpoint} expected {Kind(kind).value} from {peer}, got {msg.kind.value}")
        return msg

    def read(self, observer: str, lane: tuple) -> list[Message]:
        """Transcript entries on ``lane`` as visible to ``observer``."""
        lane_set = self._lane(*lane)
        if observer not in lane_set:
            raise LaneError(f"{observer} cannot read lane {'-'.join(sorted(lane_set))}")
        return [m for m in self.transcript.messages if m.lane == lane_set]

    def abort(self, sender: str, reason: str, **detail) -> None:
        """Broadcast ABORT from ``sender`` to every peer it shares a lane with."""
        payload = {"reason": reason, **detail}
        for other in ENDPOINTS:
            if other != sender and frozenset((sender, other)) in LANES:
                msg = self.send(sender, other, Kind.ABORT, payload)
        self.aborted = msg
