"""Plain (non-blind) execution of a measurement pattern.

This is the correctness oracle for the blind protocol: same pattern, no pads,
no secret sharing, adaptive angles computed directly from the outcomes.
"""

from __future__ import annotations

import numpy as np

from ..qsim import QubitCapExceeded, StateVector, attach, prepare_plus, qubit_cap
from .graph import MeasurementPattern


def adapted_angle(phi, sx, sz):
    """``(-1)^{s^X} phi + s^Z pi`` in Angle8 units (vectorised)."""
    return np.mod(np.where(np.asarray(sx) % 2 == 1, -phi, phi) + 4 * np.asarray(sz), 8)


def parity(s: dict, deps) -> np.ndarray | int:
    total = 0
    for i in deps:
        total = total + s[i]
    return total % 2 if isinstance(total, int) else np.mod(total, 2)


def run_pattern_plain(pattern: MeasurementPattern, input_state: StateVector,
                      rng: np.random.Generator, cap: int | None = None,
                      stats: dict | None = None) -> StateVector:
    """Execute ``pattern`` just in time and return the corrected output state.

    Layer ``l + 1`` is allocated and entangled before layer ``l`` is measured,
    so at most two layers (plus unconsumed inputs) are live at once. The
    returned state's labels are ``pattern.outputs`` in order.
    """
    if input_state.num_qubits != len(pattern.inputs):
        raise ValueError(f"pattern has {len(pattern.inputs)} inputs, state has {input_state.num_qubits} qubits")
    cap = qubit_cap() if cap is None else cap
    state = StateVector(input_state.tensor.copy(), list(pattern.inputs))
    batch = state.batch
    live = set(pattern.inputs)
    applied: set = set()
    peak = len(live)
    s: dict = {}
    layers = pattern.layers()

    def allocate(layer):
        nonlocal state, peak
        for v in layer:
            if v not in live:
                if len(live) + 1 > cap:
                    raise QubitCapExceeded(f"{len(live) + 1} live qubits exceeds cap {cap}")
                state = attach(state, prepare_plus(0, v, batch=batch))
                live.add(v)
        peak = max(peak, len(live))
        for e in pattern.graph.edges:
            if e not in applied and e <= live:
                state.cz(*tuple(e))
                applied.add(e)

    allocate(layers[0])
    outputs = set(pattern.outputs)
    for r, layer in enumerate(layers):
        if r + 1 < len(layers):
            allocate(layers[r + 1])
        for v in layer:
            if v in outputs:
                continue
            sx = parity(s, pattern.xdeps[v])
            sz = parity(s, pattern.zdeps[v])
            angle = adapted_angle(pattern.phi[v], sx, sz)
            s[v] = state.measure(v, angle, rng).astype(np.int64)
            live.discard(v)
    for v in pattern.outputs:
        state.x(v, when=parity(s, pattern.xdeps[v]))
        state.z(v, 4, when=parity(s, pattern.zdeps[v]))
    if stats is not None:
        stats["peak_live"] = peak
        stats["outcomes"] = s
    return state.reordered(list(pattern.outputs))
