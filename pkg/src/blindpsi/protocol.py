"""Parties and rounds of the blind two-client PSI protocol.

Every Bloom position is one 3-wire Toffoli instance. All instances advance
in lockstep through the same rounds, so each quantum register, message and
secret below is a per-instance array (batch axis = Bloom position).

Wire roles in the Toffoli pattern (wire, owner):

* wire 0: C1's Bloom bit (control 1)
* wire 1: ancilla ``|0>`` supplied by C1 (target, carries the AND)
* wire 2: C2's Bloom bit (control 2)

The AND output goes to C1 for even positions and to C2 for odd ones; the
two control outputs return to their owners, who read and ignore them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloom import BloomFilter, BloomParams, ItemDictionary
from .mbqc import compile_toffoli
from .mbqc.graph import MeasurementPattern
from .qsim import QuantumWorld, apply_gate, attach, infidelity, prepare_plus
from .secrets import ComputationOracle, share_angle
from .transport import Bus, Kind, ProtocolAbort, Transcript

CLIENTS = ("C1", "C2")
WIRE_OWNER = {0: "C1", 1: "C1", 2: "C2"}
TARGET_WIRE = 1


def other(client: str) -> str:
    return "C2" if client == "C1" else "C1"


def label(v) -> str:
    return f"q{v[0]}.{v[1]}"


@dataclass(frozen=True)
class RunConfig:
    lam: int = 8
    m: int = 1
    L: int = 8
    seed: int = 0
    qubit_cap: int | None = None

    def __post_init__(self):
        if self.lam < 2:
            raise ValueError(f"lambda must be >= 2, got {self.lam}")
        if self.L < 2:
            raise ValueError(f"Protocol-1 batch size L must be >= 2, got {self.L}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")

    @property
    def M(self) -> int:
        return self.lam * self.m


@dataclass(frozen=True)
class Behavior:
    """Deviations used by tests and the CLI's failure modes.

    ``corrupt_decoys``: the ``corrupt_client`` flips the first this-many
    states of each of its Protocol-1 batches to the orthogonal state.
    ``sabotage``: both clients use zero pads and zero ``r``, which makes the
    server's ``delta`` equal the plain adapted angle.
    """

    corrupt_decoys: int = 0
    corrupt_client: str = "C1"
    sabotage: bool = False


def hash_seed_for(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 0x5EED]).generate_state(1, dtype=np.uint64)[0])


# -- parties ----------------------------------------------------------------------------


class Client:
    """One of the two clients. Holds pads, angle shares and output keys."""

    def __init__(self, name: str, rng: np.random.Generator, session: "Session"):
        self.name = name
        self.peer = other(name)
        self._rng = rng
        self._s = session
        self._shares: dict = {}   # (tag, name) -> own share value
        self._kept: dict = {}     # Protocol-1 tag -> own share of every angle, shape (L, batch)
        self.outputs: dict = {}   # output vertex -> bits (-1 where not held)
        self.items: list = []
        self.bloom: BloomFilter | None = None
        self.dictionary: ItemDictionary | None = None
        self.and_bits: np.ndarray | None = None
        self.intersection: set | None = None

    @property
    def _batch(self) -> int:
        return self._s.world.batch

    def _angles(self, shape):
        if self._s.behavior.sabotage:
            return np.zeros(shape, dtype=np.int64)
        return self._rng.integers(0, 8, size=shape)

    def _split(self, qubit, name, secret, modulus):
        """Keep one share, send the other to the peer client."""
        owners = (self.name, self.peer)
        mine, theirs = share_angle(secret, self._rng, qubit, owners, modulus)
        self._shares[(qubit, name)] = mine.value
        self._s.bus.send(self.name, self.peer, Kind.ANGLE_SHARE,
                         {"qubit": qubit, "name": name, "share": theirs.value})

    def take_share(self) -> None:
        msg = self._s.bus.recv(self.name, (self.name, self.peer), Kind.ANGLE_SHARE)
        self._shares[(msg.payload["qubit"], msg.payload["name"])] = msg.payload["share"]

    def deposit(self, qubit, name) -> None:
        self._s.bus.send(self.name, "O", Kind.ANGLE_SHARE,
                         {"qubit": qubit, "name": name, "share": self._shares.pop((qubit, name))})

    # preparation

    def pad_input(self, v, bits) -> None:
        """Prepare ``X^c Z(theta) |bit>`` for input vertex ``v`` and send it to S."""
        B = self._batch
        c = self._rng.integers(0, 2, size=B)
        theta = self._angles(B)
        lab = label(v)
        world = self._s.world
        world.prepare_basis(lab, bits, owner=self.name)
        world.apply(self.name, "Z", lab, angle=theta)
        world.apply(self.name, "X", lab, when=c)
        self._s.bus.send(self.name, "S", Kind.QUBIT, {"qubit": lab})
        self._split(lab, "c", c, 2)
        self._split(lab, "theta_own", theta, 8)

    def send_test_batch(self, tag: str, L: int) -> list[str]:
        """Protocol 1, step 1: send ``L`` states ``|+_theta>`` and share the angles."""
        theta = self._angles((L, self._batch))
        sent = theta.copy()
        beh = self._s.behavior
        if beh.corrupt_decoys and beh.corrupt_client == self.name:
            sent[:beh.corrupt_decoys] += 4
        labels = [f"{tag}#{i}" for i in range(L)]
        for i, lab in enumerate(labels):
            self._s.world.prepare_plus(lab, sent[i], owner=self.name)
            self._s.bus.send(self.name, "S", Kind.QUBIT, {"qubit": lab})
        self._split(tag, "batch", theta, 8)
        return labels

    def reveal(self, tag: str) -> None:
        """Protocol 1, step 2: reveal shares of every tested (non-kept) state."""
        msg = self._s.bus.recv(self.name, (self.name, "S"), Kind.TEST_REQ)
        keep = np.asarray(msg.payload["keep"])
        shares = np.asarray(self._shares[(tag, "batch")])
        L = shares.shape[0]
        cols = np.arange(shares.shape[1])
        tested = [shares[np.where(keep == p, L - 1, p), cols] for p in range(L - 1)]
        self._s.bus.send(self.name, "S", Kind.TEST_REVEAL, {"tag": tag, "shares": np.array(tested)})
        self._kept[tag] = shares[keep, cols]

    def deposit_kept(self, tag: str, qubit, name: str) -> None:
        self._shares.pop((tag, "batch"))
        self._s.bus.send(self.name, "O", Kind.ANGLE_SHARE,
                         {"qubit": qubit, "name": name, "share": self._kept.pop(tag)})

    # computation

    def deposit_r(self, v) -> None:
        B = self._batch
        r = np.zeros(B, dtype=np.int64) if self._s.behavior.sabotage else self._rng.integers(0, 2, size=B)
        self._s.bus.send(self.name, "O", Kind.ANGLE_SHARE, {"qubit": label(v), "name": "r", "share": r})

    def hear_outcome(self, kind) -> np.ndarray:
        return np.asarray(self._s.bus.recv(self.name, (self.name, "S"), kind).payload["value"])

    def receive_output(self, v) -> None:
        """Decrypt and read out an output qubit held on some instances."""
        qmsg = self._s.bus.recv(self.name, (self.name, "S"), Kind.OUTPUT_QUBIT)
        kmsg = self._s.bus.recv(self.name, (self.name, "O"), Kind.CLASSIC_BITS)
        B = self._batch
        held = np.zeros(B, dtype=bool)
        held[np.asarray(qmsg.payload["instances"], dtype=np.int64)] = True
        sx = np.zeros(B, dtype=np.int64)
        sz = np.zeros(B, dtype=np.int64)
        idx = np.asarray(kmsg.payload["instances"], dtype=np.int64)
        sx[idx] = kmsg.payload["sx"]
        sz[idx] = kmsg.payload["sz"]
        lab = qmsg.payload["qubit"]
        world = self._s.world
        if held.any():
            world.apply(self.name, "X", lab, when=held & (sx == 1))
            world.apply(self.name, "Z", lab, angle=4, when=held & (sz == 1))
            self.outputs[v] = world.measure(self.name, lab, mask=held).astype(np.int64)
        else:
            self.outputs[v] = np.full(B, -1, dtype=np.int64)


class Server:
    """The server: holds qubits and outcome logs; never sees shares of kept angles."""

    name = "S"

    def __init__(self, rng: np.random.Generator, session: "Session"):
        self._rng = rng
        self._s = session
        self.t_log: dict = {}
        self.m_log: dict = {}
        self._applied: set = set()

    def _announce(self, kind, qubit, value, oracle: bool = True) -> None:
        for dst in CLIENTS + (("O",) if oracle else ()):
            self._s.bus.send("S", dst, kind, {"qubit": qubit, "value": value})

    def request_test(self, client: str, labels: list[str], tag: str) -> np.ndarray:
        """Protocol 1 at the server: pick the kept state, route it last, ask for shares."""
        bus, world = self._s.bus, self._s.world
        for _ in labels:
            bus.recv("S", ("S", client), Kind.QUBIT)
        L = len(labels)
        keep = self._rng.integers(0, L, size=world.batch)
        for p in range(L - 1):
            if np.any(keep == p):
                world.swap("S", labels[p], labels[-1], when=keep == p)
        for c in CLIENTS:
            bus.send("S", c, Kind.TEST_REQ, {"tag": tag, "keep": keep})
        return keep

    def check_test(self, client: str, labels: list[str], tag: str, keep: np.ndarray,
                   abort: bool = True) -> np.ndarray:
        """Measure the tested states at the revealed angles; all outcomes must be 0."""
        bus, world = self._s.bus, self._s.world
        revealed = 0
        for c in CLIENTS:
            revealed = revealed + np.asarray(bus.recv("S", ("S", c), Kind.TEST_REVEAL).payload["shares"])
        bases = np.mod(revealed, 8)
        L = len(labels)
        passed = np.ones(world.batch, dtype=bool)
        first_bad = None
        for p in range(L - 1):
            bad = world.measure("S", labels[p], delta=bases[p]) != 0
            if first_bad is None and bad.any():
                first_bad = (p, int(np.flatnonzero(bad)[0]))
            passed &= ~bad
        if first_bad is not None and abort:
            pos, inst = first_bad
            orig = L - 1 if keep[inst] == pos else pos
            bus.abort("S", "Protocol 1 test failed", client=client, batch=tag,
                      qubit=f"{tag}#{orig}", instance=inst)
            raise ProtocolAbort("Protocol 1 test failed", bus.aborted.payload)
        return passed

    def protocol2(self, v, kept: str) -> np.ndarray:
        """CNOT padded input -> helper's ``|+_theta>``; measure the helper qubit."""
        world = self._s.world
        lab = label(v)
        world.apply("S", "CNOT", (lab, kept))
        t = world.measure("S", kept).astype(np.int64)
        self.t_log[lab] = t
        self._announce(Kind.OUTCOME_T, lab, t)
        return t

    def protocol3(self, v, kept1: str, kept2: str) -> np.ndarray:
        """CNOT C2's qubit -> C1's qubit, measure C1's; C2's qubit survives as ``v``."""
        world = self._s.world
        lab = label(v)
        world.apply("S", "CNOT", (kept2, kept1))
        t = world.measure("S", kept1).astype(np.int64)
        world.relabel("S", kept2, lab)
        self.t_log[lab] = t
        self._announce(Kind.OUTCOME_T, lab, t)
        return t

    def receive_input(self, owner: str) -> None:
        self._s.bus.recv("S", ("S", owner), Kind.QUBIT)

    def prepare_output(self, v) -> None:
        self._s.world.prepare_plus(label(v), 0, owner="S")

    def entangle(self, edges) -> None:
        live = set(self._s.world.labels())
        for e in edges:
            if e in self._applied:
                continue
            a, b = sorted(e)
            if label(a) in live and label(b) in live:
                self._s.world.apply("S", "CZ", (label(a), label(b)))
                self._applied.add(e)

    def measure_round(self, v) -> np.ndarray:
        lab = label(v)
        delta = np.asarray(self._s.bus.recv("S", ("S", "O"), Kind.DELTA).payload["value"])
        m = self._s.world.measure("S", lab, delta=delta).astype(np.int64)
        self.m_log[lab] = m
        self._announce(Kind.OUTCOME_M, lab, m)
        return m

    def return_output(self, v, recipient: str, mask) -> None:
        self._s.bus.send("S", recipient, Kind.OUTPUT_QUBIT, {"qubit": label(v)}, mask=mask)


class OracleParty:
    """Endpoint wrapper around :class:`~blindpsi.secrets.ComputationOracle`."""

    name = "O"

    def __init__(self, pattern: MeasurementPattern, session: "Session"):
        self._s = session
        self._oracle = ComputationOracle(pattern)
        self._vertex = {label(v): v for v in pattern.graph.vertices}

    def collect(self, n: int = 1) -> None:
        """Take ``n`` share deposits from each client."""
        for _ in range(n):
            for c in CLIENTS:
                p = self._s.bus.recv("O", ("O", c), Kind.ANGLE_SHARE).payload
                self._oracle.tape.deposit(c, self._vertex[p["qubit"]], p["name"], p["share"])

    def hear(self, kind) -> None:
        p = self._s.bus.recv("O", ("O", "S"), kind).payload
        v = self._vertex[p["qubit"]]
        if Kind(kind) is Kind.OUTCOME_T:
            self._oracle.tape.announce(v, "t", p["value"])
        else:
            self._oracle.record_outcome(v, p["value"])

    def send_delta(self, v) -> None:
        self._s.bus.send("O", "S", Kind.DELTA, {"qubit": label(v), "value": self._oracle.delta(v)})

    def send_keys(self, v, recipient: str, mask) -> None:
        sx, sz = self._oracle.output_keys(v)
        idx = np.flatnonzero(mask)
        B = self._s.world.batch
        self._s.bus.send("O", recipient, Kind.CLASSIC_BITS,
                         {"qubit": label(v), "instances": idx,
                          "sx": np.broadcast_to(sx, (B,))[idx], "sz": np.broadcast_to(sz, (B,))[idx]})


class Session:
    """Shared plumbing for one run: world, bus, parties and rng streams."""

    def __init__(self, batch: int, config: RunConfig, behavior: Behavior | None = None,
                 pattern: MeasurementPattern | None = None, retain=None):
        self.config = config
        self.behavior = behavior or Behavior()
        self.pattern = pattern
        r_c1, r_c2, r_s, r_nature = (np.random.default_rng(s)
                                     for s in np.random.SeedSequence(config.seed).spawn(4))
        self.world = QuantumWorld(batch, r_nature, config.qubit_cap)
        self.bus = Bus(self.world, Transcript(retain))
        self.clients = {"C1": Client("C1", r_c1, self), "C2": Client("C2", r_c2, self)}
        self.server = Server(r_s, self)
        self.oracle = None
        if pattern is not None:
            self.oracle = OracleParty(pattern, self)

    @property
    def transcript(self) -> Transcript:
        return self.bus.transcript


# -- protocol steps ----------------------------------------------------------------


def protocol1(session: Session, client: str, tag: str, abort: bool = True):
    """Protocol 1 for ``client``: send ``L`` states, test all but one, keep one.

    Returns ``(kept_label, pass_mask)``. With ``abort`` set, any failing
    instance aborts the whole run with a report naming the state.
    """
    labels = session.clients[client].send_test_batch(tag, session.config.L)
    session.clients[other(client)].take_share()
    keep = session.server.request_test(client, labels, tag)
    for c in CLIENTS:
        session.clients[c].reveal(tag)
    passed = session.server.check_test(client, labels, tag, keep, abort)
    return labels[-1], passed


def protocol1_trials(batch: int, config: RunConfig, behavior: Behavior) -> np.ndarray:
    """One Protocol-1 batch on ``batch`` independent instances, without aborting."""
    return protocol1(Session(batch, config, behavior), "C1", "p1", abort=False)[1]


def _broadcast_outcome(session: Session, kind) -> None:
    for c in CLIENTS:
        session.clients[c].hear_outcome(kind)
    session.oracle.hear(kind)


def prepare_input(session: Session, v, bits) -> None:
    """Pad an input qubit, run Protocol 1 for the helper, then Protocol 2."""
    owner = WIRE_OWNER[v[0]]
    helper = other(owner)
    lab = label(v)
    session.clients[owner].pad_input(v, bits)
    session.server.receive_input(owner)
    for _ in range(2):
        session.clients[helper].take_share()
    kept, _ = protocol1(session, helper, f"{lab}/{helper}")
    session.server.protocol2(v, kept)
    _broadcast_outcome(session, Kind.OUTCOME_T)
    for name in ("c", "theta_own"):
        for c in CLIENTS:
            session.clients[c].deposit(lab, name)
        session.oracle.collect()
    for c in CLIENTS:
        session.clients[c].deposit_kept(f"{lab}/{helper}", lab, "theta_other")
    session.oracle.collect()


def prepare_brick_qubit(session: Session, v) -> None:
    """Protocol 1 for both clients, then Protocol 3."""
    lab = label(v)
    kept = {}
    for k in CLIENTS:
        kept[k], _ = protocol1(session, k, f"{lab}/{k}")
    session.server.protocol3(v, kept["C1"], kept["C2"])
    _broadcast_outcome(session, Kind.OUTCOME_T)
    for k, name in (("C1", "theta1"), ("C2", "theta2")):
        for c in CLIENTS:
            session.clients[c].deposit_kept(f"{lab}/{k}", lab, name)
        session.oracle.collect()


def computation_round(session: Session, v) -> np.ndarray:
    """One ``delta`` round: r deposits, oracle angle, server measurement."""
    for c in CLIENTS:
        session.clients[c].deposit_r(v)
    session.oracle.collect()
    session.oracle.send_delta(v)
    m = session.server.measure_round(v)
    _broadcast_outcome(session, Kind.OUTCOME_M)
    return m


def output_assignment(v, batch: int) -> dict:
    """Recipient masks for output vertex ``v``: target alternates, controls go home."""
    if v[0] == TARGET_WIRE:
        even = np.arange(batch) % 2 == 0
        return {"C1": even, "C2": ~even}
    owner = WIRE_OWNER[v[0]]
    return {owner: np.ones(batch, dtype=bool), other(owner): np.zeros(batch, dtype=bool)}


def output_return_and_decrypt(session: Session) -> dict:
    """Send outputs with their keys; clients correct and read out.

    Returns ``{client: {output vertex: bits}}`` with ``-1`` on instances the
    client does not hold.
    """
    pattern = session.pattern
    B = session.world.batch
    for v in pattern.outputs:
        for c, mask in output_assignment(v, B).items():
            if not mask.any():
                continue
            session.oracle.send_keys(v, c, mask)
            session.server.return_output(v, c, mask)
            session.clients[c].receive_output(v)
    return {c: dict(session.clients[c].outputs) for c in CLIENTS}


def run_blind_pattern(session: Session, input_bits: dict) -> dict:
    """Execute the session's 3-wire pattern blindly.

    ``input_bits`` maps each input vertex to its per-instance plain bits.
    Layers are prepared and entangled one ahead of the measurement front.
    """
    pattern = session.pattern
    layers = pattern.layers()
    edges = sorted(pattern.graph.edges, key=lambda e: sorted(e))
    outputs = set(pattern.outputs)
    for v in layers[0]:
        prepare_input(session, v, input_bits[v])
    session.server.entangle(edges)
    for l, layer in enumerate(layers):
        if l + 1 < len(layers):
            for v in layers[l + 1]:
                if v in outputs:
                    session.server.prepare_output(v)
                else:
                    prepare_brick_qubit(session, v)
            session.server.entangle(edges)
        for v in layer:
            if v not in outputs:
                computation_round(session, v)
    return output_return_and_decrypt(session)


def toffoli_session(batch: int, config: RunConfig, behavior: Behavior | None = None,
                    retain=None) -> Session:
    return Session(batch, config, behavior, compile_toffoli(), retain)


def run_blind_toffoli(session: Session, c1_bits, c2_bits, target_bits=0) -> np.ndarray:
    """Blind Toffoli on every instance; returns the decrypted target bits."""
    pattern = session.pattern
    B = session.world.batch
    bits = {}
    for v, b in zip(pattern.inputs, (c1_bits, c2_bits, target_bits)):
        bits[v] = np.broadcast_to(np.asarray(b, dtype=np.int64), (B,)).copy()
    outs = run_blind_pattern(session, bits)
    target = next(v for v in pattern.outputs if v[0] == TARGET_WIRE)
    return np.maximum(outs["C1"][target], outs["C2"][target])


# -- PSI -----------------------------------------------------------------------------


def exchange_and_intersect(session: Session) -> tuple[set, set]:
    """Clients swap their halves of the AND vector and decode with their dictionaries."""
    pattern = session.pattern
    target = next(v for v in pattern.outputs if v[0] == TARGET_WIRE)
    for c in CLIENTS:
        bits = session.clients[c].outputs[target]
        pos = np.flatnonzero(bits >= 0)
        session.bus.send(c, other(c), Kind.CLASSIC_BITS, {"positions": pos, "bits": bits[pos]})
    for c in CLIENTS:
        client = session.clients[c]
        msg = session.bus.recv(c, (c, other(c)), Kind.CLASSIC_BITS).payload
        pos = np.asarray(msg["positions"], dtype=np.int64)
        own = client.outputs[target]
        full = own.copy()
        full[pos] = msg["bits"]
        if (full < 0).any() or len(full) != client.bloom.params.M:
            raise ValueError(f"{c}: AND vector incomplete or of wrong length")
        client.and_bits = full.astype(np.uint8)
        client.intersection = client.dictionary.items_matching(client.and_bits) & set(client.items)
    return session.clients["C1"].intersection, session.clients["C2"].intersection


@dataclass
class PsiResult:
    c1: set
    c2: set
    transcript: Transcript
    and_bits: np.ndarray
    params: BloomParams
    peak_live: int
    q: int = 0
    extra: dict = field(default_factory=dict)


def qubits_per_instance(L: int, q: int) -> int:
    """Transmitted qubits per Bloom position.

    3 padded inputs, one test batch of ``L`` per input, two test batches per
    non-input measured qubit (``3 (q - 1)`` of them) and 3 returned outputs.
    """
    return 6 + 3 * L + 6 * L * (q - 1)


def expected_qubit_count(lam: int, m: int, L: int, q: int) -> int:
    return lam * m * qubits_per_instance(L, q)


def psi_run(set_A, set_B, config: RunConfig, behavior: Behavior | None = None,
            retain=None) -> PsiResult:
    """Full pipeline for one pair of sets."""
    set_A, set_B = list(dict.fromkeys(set_A)), list(dict.fromkeys(set_B))
    for name, items in (("A", set_A), ("B", set_B)):
        if len(items) > config.m:
            raise ValueError(f"set {name} has {len(items)} items, more than m={config.m}")
    params = BloomParams.for_protocol(config.lam, config.m, hash_seed_for(config.seed))
    session = toffoli_session(params.M, config, behavior, retain)
    for c, items in (("C1", set_A), ("C2", set_B)):
        client = session.clients[c]
        client.items = items
        client.bloom = BloomFilter.from_items(params, items)
        client.dictionary = ItemDictionary(params, items)
    run_blind_toffoli(session, session.clients["C1"].bloom.bits, session.clients["C2"].bloom.bits, 0)
    c1, c2 = exchange_and_intersect(session)
    return PsiResult(c1, c2, session.transcript, session.clients["C1"].and_bits, params,
                     session.world.peak, session.pattern.meta["q"])


# -- exhaustive preparation identities -------------------------------------------------


def _z_pad_plus(theta_j, c):
    st = prepare_plus(0, "in", batch=len(theta_j))
    apply_gate(st, "Z", "in", angle=theta_j)
    apply_gate(st, "X", "in", when=c)
    return st


def verify_protocol2(mutate: bool = False) -> tuple[int, float]:
    """All ``(theta_j, theta_k, c, t)``: survivor vs ``X^c Z(theta_j + (-1)^(t+c) theta_k)|+>``."""
    grid = np.array(np.meshgrid(range(8), range(8), range(2), range(2), indexing="ij")).reshape(4, -1)
    tj, tk, c, t = grid
    st = attach(_z_pad_plus(tj, c), prepare_plus(tk, "aux"))
    apply_gate(st, "CNOT", ("in", "aux"))
    st.measure("aux", None, postselect=t)
    sign = np.where((t + c + (1 if mutate else 0)) % 2 == 1, -1, 1)
    expect = _z_pad_plus(np.mod(tj + sign * tk, 8), c)
    return len(tj), float(np.max(infidelity(expect, st)))


def verify_protocol3(mutate: bool = False) -> tuple[int, float]:
    """All ``(theta1, theta2, t)``: survivor vs ``|+_(theta2 + (-1)^t theta1)>``."""
    grid = np.array(np.meshgrid(range(8), range(8), range(2), indexing="ij")).reshape(3, -1)
    th1, th2, t = grid
    st = attach(prepare_plus(th1, "c1"), prepare_plus(th2, "c2"))
    apply_gate(st, "CNOT", ("c2", "c1"))
    st.measure("c1", None, postselect=t)
    sign = np.where((t + (1 if mutate else 0)) % 2 == 1, -1, 1)
    expect = prepare_plus(np.mod(th2 + sign * th1, 8), "c2")
    return len(th1), float(np.max(infidelity(expect, st)))
