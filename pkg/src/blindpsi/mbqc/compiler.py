"""Compile a Toffoli gate onto a 3-wire brickwork measurement pattern.

Circuit view of a brickwork pattern with the canonical flow: for each layer
``l`` the vertical CZs of that layer act first, then (if ``l < q``) every wire
undergoes ``H Z(-phi[w, l])``. Vertical edges come in pairs two layers apart
(one brick); with the pair's middle layers set to

* control wire ``(0, 0)`` and target wire ``(0, 6)`` the brick equals
  ``(Z(pi/2) (x) X(pi/2)) CNOT``, both rotations commuting with the CNOT so
  the preceding gaps pre-compensate them;
* both wires ``(free, 0)`` the two CZs cancel and each wire sees a plain
  ``Z`` rotation.

Logical circuit: CCZ as a phase polynomial over the line (c1, t, c2) with
eight nearest-neighbour CNOTs alternating between the two wire pairs, wrapped
in ``H`` on the target. Single-qubit remainders between bricks are solved by a
meet-in-the-middle search over the free layer angles.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .graph import MeasurementPattern, brickwork, brick_vertical_layers, canonical_flow

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _z(theta) -> np.ndarray:
    return np.diag([1.0, np.exp(0.25j * np.pi * theta)])


def _xrot(theta) -> np.ndarray:
    return _H @ _z(theta) @ _H


LAYER_OPS = np.stack([_H @ _z(-p) for p in range(8)])

T = _z(1)
TDG = _z(7)

# wire 0 = control 1, wire 1 = target, wire 2 = control 2
TOFFOLI_CIRCUIT = (
    ("U", 1, _H),
    ("U", 0, T), ("U", 1, T), ("U", 2, T),
    ("CNOT", 0, 1), ("U", 1, TDG),      # wire 1 holds c1^t
    ("CNOT", 1, 2), ("U", 2, T),        # wire 2 holds c1^t^c2
    ("CNOT", 0, 1),
    ("CNOT", 1, 2), ("U", 2, TDG),      # c1^c2
    ("CNOT", 0, 1),
    ("CNOT", 1, 2), ("U", 2, TDG),      # t^c2
    ("CNOT", 0, 1),
    ("CNOT", 1, 2),
    ("U", 1, _H),
)

# pattern input/output order is (control 1, control 2, target)
TOFFOLI_IO_WIRES = (0, 2, 1)

MAX_FREE = 10
MAX_LAYERS = 65


def toffoli_matrix() -> np.ndarray:
    U = np.eye(8, dtype=complex)
    U[[6, 7]] = U[[7, 6]]
    return U


def circuit_unitary(gates, n: int = 3) -> np.ndarray:
    """Dense unitary of a logical gate list, wire 0 most significant."""
    dim = 2**n
    U = np.eye(dim, dtype=complex)
    for g in gates:
        if g[0] == "U":
            ops = [np.eye(2)] * n
            ops[g[1]] = g[2]
            full = ops[0]
            for o in ops[1:]:
                full = np.kron(full, o)
        else:
            c, t = g[1], g[2]
            full = np.zeros((dim, dim), dtype=complex)
            for b in range(dim):
                bits = [(b >> (n - 1 - w)) & 1 for w in range(n)]
                if bits[c]:
                    bits[t] ^= 1
                full[sum(v << (n - 1 - w) for w, v in enumerate(bits)), b] = 1
        U = full @ U
    return U


def _phase_key(U: np.ndarray) -> tuple:
    flat = U.reshape(-1)
    k = int(np.argmax(np.abs(flat) > 1e-6))
    v = flat * (np.conj(flat[k]) / abs(flat[k]))
    return tuple(np.round(np.concatenate([v.real, v.imag]), 6) + 0.0)


def _phase_keys(Us: np.ndarray) -> list:
    flat = Us.reshape(len(Us), -1)
    k = np.argmax(np.abs(flat) > 1e-6, axis=1)
    piv = flat[np.arange(len(flat)), k]
    v = flat * (np.conj(piv) / np.abs(piv))[:, None]
    arr = np.round(np.concatenate([v.real, v.imag], axis=1), 6) + 0.0
    return [tuple(r) for r in arr]


def _enumerate(layers) -> tuple[np.ndarray, np.ndarray]:
    """All products (time order) over free layers, with their assignments."""
    prods = np.eye(2, dtype=complex)[None]
    assign = np.zeros((1, 0), dtype=np.int64)
    for v in layers:
        if v is None:
            prods = np.einsum("aij,bjk->abik", LAYER_OPS, prods).reshape(-1, 2, 2)
            assign = np.concatenate(
                [np.tile(assign, (8, 1)), np.repeat(np.arange(8), len(assign))[:, None]], axis=1)
        else:
            prods = np.einsum("ij,bjk->bik", LAYER_OPS[v], prods)
    return prods, assign


def solve_gap(layers, target: np.ndarray) -> list[int] | None:
    """Angles making ``prod_l H Z(-phi_l)`` equal ``target`` up to phase.

    ``layers`` lists the gap's layers in time order, ``None`` for a free
    angle or a fixed Angle8. Returns the full angle list or ``None``.
    """
    layers = list(layers)
    # zero consecutive leading pairs (H H = I) until the search is small enough
    lead = 0
    while sum(v is None for v in layers[lead:]) > MAX_FREE and lead + 2 <= len(layers):
        lead += 2
    body = layers[lead:]
    free_pos = [i for i, v in enumerate(body) if v is None]
    split = free_pos[len(free_pos) // 2] if free_pos else len(body)
    first, second = body[:split], body[split:]
    p_prod, p_assign = _enumerate(first)
    q_prod, q_assign = _enumerate(second)
    table: dict = {}
    for key, idx in zip(_phase_keys(p_prod), range(len(p_prod))):
        table.setdefault(key, idx)
    need = np.einsum("bji,jk->bik", np.conj(q_prod), target)
    for qi, key in enumerate(_phase_keys(need)):
        pi = table.get(key)
        if pi is None:
            continue
        out = [0] * lead
        fa, sa = iter(p_assign[pi]), iter(q_assign[qi])
        out += [int(next(fa)) if v is None else v for v in first]
        out += [int(next(sa)) if v is None else v for v in second]
        return out
    return None


def _gap_product(angles) -> np.ndarray:
    U = np.eye(2, dtype=complex)
    for a in angles:
        U = LAYER_OPS[a] @ U
    return U


def _schedule(cnots, delays) -> list[int]:
    slots, cur = [], -1
    for i, (c, t) in enumerate(cnots):
        pair = min(c, t)
        k = cur + 1
        if k % 2 != pair:
            k += 1
        k += 2 * delays.get(i, 0)
        slots.append(k)
        cur = k
    return slots


def _slot_pair(k: int) -> tuple[int, int]:
    return (0, 1) if k % 2 == 0 else (1, 2)


def _gap_layers(w: int, lo: int, hi: int, used: set) -> list:
    """Layers ``lo..hi-1`` of wire ``w`` with unused-brick middles pinned."""
    pinned = set()
    for k in range(max(0, (lo - 3) // 4 - 1), hi // 4 + 1):
        if k not in used and w in _slot_pair(k):
            pinned.add(4 + 4 * k)
    return [0 if l in pinned else None for l in range(lo, hi)]


def _wire_programs(gates):
    """Split a logical circuit into per-wire gap unitaries around CNOT events."""
    cnots = [(g[1], g[2]) for g in gates if g[0] == "CNOT"]
    pending = [np.eye(2, dtype=complex) for _ in range(3)]
    gaps = {w: [] for w in range(3)}  # w -> list of (cnot index, unitary)
    ci = 0
    for g in gates:
        if g[0] == "U":
            pending[g[1]] = g[2] @ pending[g[1]]
            continue
        c, t = g[1], g[2]
        gaps[c].append((ci, _z(-2) @ pending[c]))
        gaps[t].append((ci, _xrot(-2) @ pending[t]))
        pending[c] = np.eye(2, dtype=complex)
        pending[t] = np.eye(2, dtype=complex)
        ci += 1
    return cnots, gaps, pending


def _try_compile(gates, delays):
    cnots, gaps, tails = _wire_programs(gates)
    slots = _schedule(cnots, delays)
    used = set(slots)
    phi = {}
    for w in range(3):
        start = 0
        for ci, U in gaps[w]:
            k = slots[ci]
            c0 = 3 + 4 * k
            angles = solve_gap(_gap_layers(w, start, c0, used), U)
            if angles is None:
                return None, ci
            phi.update({(w, start + i): a for i, a in enumerate(angles)})
            c, t = cnots[ci]
            phi[(w, c0)] = 0
            phi[(w, c0 + 1)] = 6 if w == t else 0
            start = c0 + 2
    last = 5 + 4 * slots[-1]
    q = last + 1
    while q + 1 <= MAX_LAYERS:
        tail_phi = {}
        for w in range(3):
            start = max([5 + 4 * slots[ci] for ci, _ in gaps[w]], default=0)
            angles = solve_gap(_gap_layers(w, start, q, used), tails[w])
            if angles is None:
                break
            tail_phi.update({(w, start + i): a for i, a in enumerate(angles)})
        else:
            phi.update(tail_phi)
            return (phi, q, slots), None
        q += 4
    return None, len(cnots) - 1


def pattern_circuit_unitary(phi: dict, q: int, n: int = 3) -> np.ndarray:
    """Unitary of the brickwork circuit view (wire 0 most significant)."""
    dim = 2**n
    U = np.eye(dim, dtype=complex)
    verticals = {w: set(brick_vertical_layers(w, q)) for w in range(n - 1)}

    def one(w, M):
        ops = [np.eye(2)] * n
        ops[w] = M
        full = ops[0]
        for o in ops[1:]:
            full = np.kron(full, o)
        return full

    for l in range(q + 1):
        for w in range(n - 1):
            if l in verticals[w]:
                diag = np.ones(dim)
                for b in range(dim):
                    if (b >> (n - 1 - w)) & 1 and (b >> (n - 2 - w)) & 1:
                        diag[b] = -1
                U = np.diag(diag) @ U
        if l < q:
            for w in range(n):
                U = one(w, LAYER_OPS[phi[(w, l)]]) @ U
    return U


def _permute_io(U: np.ndarray, order) -> np.ndarray:
    """Re-express a wire-ordered 3-qubit unitary in ``order``'s qubit order."""
    n = len(order)
    T = U.reshape((2,) * (2 * n))
    perm = list(order) + [n + o for o in order]
    return T.transpose(perm).reshape(2**n, 2**n)


@lru_cache(maxsize=None)
def compile_toffoli() -> MeasurementPattern:
    """3-wire brickwork pattern implementing Toffoli on (c1, c2, target).

    The resulting layer count is stored in ``pattern.meta["layers"]``.
    """
    delays: dict = {}
    for _ in range(64):
        result, failed = _try_compile(TOFFOLI_CIRCUIT, delays)
        if result is not None:
            break
        delays[failed] = delays.get(failed, 0) + 1
    else:
        raise RuntimeError("could not fit the Toffoli circuit into the layer budget")
    phi, q, slots = result
    U = _permute_io(pattern_circuit_unitary(phi, q), TOFFOLI_IO_WIRES)
    fid = abs(np.trace(U.conj().T @ toffoli_matrix())) / 8
    if fid < 1 - 1e-9:
        raise RuntimeError(f"compiled brick sequence is not Toffoli (fidelity {fid})")
    g = brickwork(3, q)
    inputs = tuple((w, 0) for w in TOFFOLI_IO_WIRES)
    outputs = tuple((w, q) for w in TOFFOLI_IO_WIRES)
    graph = type(g)(g.vertices, g.edges, inputs, outputs)
    return MeasurementPattern(graph, canonical_flow(graph), phi,
                              meta={"layers": q + 1, "q": q, "cnot_slots": tuple(slots)})
