"""Parameterised ansatz circuits and a plain-numpy statevector simulator.

Wire layouts
------------
Circuits act on wires 0..n-1 (top to bottom in the figures).  Amplitudes,
however, are always reported in the logical (space, time) convention of
:mod:`spacetime_vqe.lattice` -- flat index ``i * 2**n_t + j``.  The mapping
between the two is the qubit ordering:

* ``sequential``      wires = [t_0 .. t_{nt-1}, x_0 .. x_{nx-1}]
                      (both registers finest bit on top)
* ``reversed_space``  wires = [t_0 .. t_{nt-1}, x_{nx-1} .. x_0]
                      (space register flipped, so the two most significant
                      bits meet in the middle; coarse-to-fine expansion adds
                      new finest wires at the very top and bottom)

Here ``t_k``/``x_k`` denote the bits of weight ``2**k`` of the time/space
index.  Downstream modules never see wire order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SQ = 1 / np.sqrt(2)
FIXED_GATES = {
    "h": np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "cnot": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
    "swap": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}

#: Hadamard as an Euler triple: H = exp(i pi/2) Rz(pi/2) Rx(pi/2) Rz(pi/2)
HADAMARD_EULER = (np.pi / 2, np.pi / 2, np.pi / 2)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])

ROTATIONS = {"rx": rx, "ry": ry, "rz": rz}


@dataclass(frozen=True)
class Gate:
    """One gate: a rotation bound to a parameter slot, or a fixed gate.

    `controls` lists extra control wires (used by the measurement-circuit
    compiler); rotation gates carry exactly one parameter slot index.
    """

    kind: str
    wires: tuple
    param: int | None = None
    controls: tuple = ()

    def __post_init__(self):
        if self.kind in ROTATIONS:
            if self.param is None:
                raise ValueError(f"{self.kind} gate requires a parameter slot")
        elif self.kind in FIXED_GATES:
            if self.param is not None:
                raise ValueError(f"{self.kind} gate takes no parameter")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        seen = self.wires + self.controls
        if len(set(seen)) != len(seen):
            raise ValueError(f"gate wires must be distinct, got {seen}")


@dataclass(frozen=True)
class Block:
    """A contiguous two-wire group of gates (one brick / one staircase unit)."""

    wires: tuple  # (top, bottom)
    gate_range: tuple  # [start, stop) into Ansatz.gates
    param_range: tuple  # [start, stop) into the parameter vector
    layer: int
    column: int  # position of the block's column within its layer


@dataclass(frozen=True)
class Ansatz:
    family: str
    n_qubits: int
    n_t: int
    ordering: str
    gates: tuple
    blocks: tuple
    param_count: int
    layers: int = 0
    r: int = 1
    chi: int = 0
    sparse: bool = True

    @property
    def n_x(self) -> int:
        return self.n_qubits - self.n_t

    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "cnot")


def wire_axes(n_qubits: int, n_t: int, ordering: str) -> tuple:
    """Map wire position (top to bottom) -> tensor axis in the logical state.

    Logical axes run most-significant first: [x_{nx-1}..x_0, t_{nt-1}..t_0],
    so the axis of time bit t_k is ``n - 1 - k`` and of space bit x_k is
    ``nx - 1 - k``.
    """
    n_x = n_qubits - n_t
    if not 1 <= n_t < n_qubits:
        raise ValueError(f"need 1 <= n_t < n_qubits, got n_t={n_t}, n_qubits={n_qubits}")
    axes = []
    for w in range(n_qubits):
        if w < n_t:
            axes.append(n_qubits - 1 - w)  # time bit t_w
        elif ordering == "sequential":
            axes.append(n_x - 1 - (w - n_t))  # space bit x_{w-n_t}
        elif ordering == "reversed_space":
            axes.append(w - n_t)  # space bit x_{nx-1-(w-n_t)}
        else:
            raise ValueError(f"unknown ordering {ordering!r}")
    return tuple(axes)


def gate_matrix(gate: Gate, params: np.ndarray) -> np.ndarray:
    if gate.kind in ROTATIONS:
        return ROTATIONS[gate.kind](params[gate.param])
    return FIXED_GATES[gate.kind]


def _apply_on_axes(tensor: np.ndarray, matrix: np.ndarray, axes: tuple) -> np.ndarray:
    k = len(axes)
    tensor = np.moveaxis(tensor, axes, range(k))
    shape = tensor.shape
    tensor = (matrix @ tensor.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(tensor, range(k), axes)


def apply_gate(tensor: np.ndarray, gate: Gate, params: np.ndarray, axes_of_wire) -> np.ndarray:
    """Apply one (possibly multi-controlled) gate to a (2,)*n state tensor."""
    matrix = gate_matrix(gate, params)
    target_axes = tuple(axes_of_wire[w] for w in gate.wires)
    if not gate.controls:
        return _apply_on_axes(tensor, matrix, target_axes)
    out = tensor.copy()
    sel = [slice(None)] * tensor.ndim
    for c in gate.controls:
        sel[axes_of_wire[c]] = 1
    sel = tuple(sel)
    out[sel] = _apply_on_axes(tensor[sel], matrix, _shifted_axes(target_axes, sel))
    return out


def _shifted_axes(target_axes: tuple, sel: tuple) -> tuple:
    """Axis indices after control axes have been indexed away."""
    dropped = [i for i, s in enumerate(sel) if s == 1]
    out = []
    for a in target_axes:
        out.append(a - sum(1 for d in dropped if d < a))
    return tuple(out)


def apply_circuit(ansatz: Ansatz, params: np.ndarray) -> np.ndarray:
    """Run the circuit on |0..0> and return the flat logical statevector."""
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.param_count,):
        raise ValueError(
            f"expected {ansatz.param_count} parameters, got {params.shape}"
        )
    n = ansatz.n_qubits
    axes = wire_axes(n, ansatz.n_t, ansatz.ordering)
    tensor = np.zeros((2,) * n, dtype=complex)
    tensor[(0,) * n] = 1.0
    for gate in ansatz.gates:
        tensor = apply_gate(tensor, gate, params, axes)
    return tensor.reshape(-1)


# ---------------------------------------------------------------------------
# Ansatz builders
# ---------------------------------------------------------------------------

def _rotation_triple(wire: int, slot: int) -> list:
    return [
        Gate("rz", (wire,), slot),
        Gate("rx", (wire,), slot + 1),
        Gate("rz", (wire,), slot + 2),
    ]


def _brick_gates(top: int, r: int, slot: int) -> list:
    """r repetitions of [CNOT, Rz Rx Rz on both wires]; 6r parameters."""
    gates = []
    for _ in range(r):
        gates.append(Gate("cnot", (top, top + 1)))
        gates += _rotation_triple(top, slot)
        gates += _rotation_triple(top + 1, slot + 3)
        slot += 6
    return gates


def brickwall_pairs(n_qubits: int, parity: int) -> list:
    return [(i, i + 1) for i in range(parity, n_qubits - 1, 2)]


def build_brickwall(
    n_qubits: int,
    layers: int,
    r: int = 1,
    ordering: str = "reversed_space",
    n_t: int | None = None,
    start_parity: int = 0,
) -> Ansatz:
    """Alternating even/odd nearest-neighbour brick pattern.

    One layer = one even-pair column plus one odd-pair column (n-1 blocks on
    n qubits, depth 2r).  `start_parity=1` begins layers with the odd column,
    which is the pattern produced by coarse-to-fine expansion.
    """
    if n_qubits < 2:
        raise ValueError("brickwall needs at least 2 qubits")
    if r not in (1, 2):
        raise ValueError(f"r must be 1 or 2, got {r}")
    n_t = n_qubits // 2 if n_t is None else n_t
    gates, blocks = [], []
    slot = 0
    for layer in range(layers):
        for col, parity in enumerate((start_parity, 1 - start_parity)):
            for top, _ in brickwall_pairs(n_qubits, parity):
                new = _brick_gates(top, r, slot)
                blocks.append(
                    Block(
                        wires=(top, top + 1),
                        gate_range=(len(gates), len(gates) + len(new)),
                        param_range=(slot, slot + 6 * r),
                        layer=layer,
                        column=col,
                    )
                )
                gates += new
                slot += 6 * r
    return Ansatz(
        family="brickwall",
        n_qubits=n_qubits,
        n_t=n_t,
        ordering=ordering,
        gates=tuple(gates),
        blocks=tuple(blocks),
        param_count=slot,
        layers=layers,
        r=r,
    )


def _qmps_unit(top: int, bottom: int, r: int, slot: int, lead_rz: bool) -> list:
    """One two-qubit staircase unit, Fig.-style depth r in {1, 2, 3}.

    With the leading Rz this is the 15-rotation generic two-qubit unitary at
    r = 3; the leading Rz is dropped when the previous gate on the top wire
    already is an Rz.
    """
    gates = []
    if lead_rz:
        gates.append(Gate("rz", (top,), slot))
        slot += 1
    gates.append(Gate("cnot", (top, bottom)))
    gates += _rotation_triple(top, slot)
    gates += _rotation_triple(bottom, slot + 3)
    slot += 6
    if r == 3:
        gates.append(Gate("cnot", (top, bottom)))
        gates.append(Gate("rz", (top,), slot))
        gates.append(Gate("rx", (bottom,), slot + 1))
        slot += 2
    if r >= 2:
        gates.append(Gate("cnot", (top, bottom)))
        gates += _rotation_triple(top, slot)
        gates += _rotation_triple(bottom, slot + 3)
        slot += 6
    return gates


def _qmps_unit_pairs(n_qubits: int, chi: int, sparse: bool) -> list:
    """Wire pairs of the staircase units, in circuit order."""
    if chi == 2:
        return [(k, k + 1) for k in range(n_qubits - 1)]
    pairs = []
    for k in range(n_qubits - 2):
        per_block = [(k, k + 1), (k + 1, k + 2), (k, k + 1)]
        if not sparse:
            per_block += [(k + 1, k + 2), (k, k + 1)]
        pairs += per_block
    # the trailing unit overlapping the next block is elided except at the end
    pairs.append((n_qubits - 2, n_qubits - 1))
    return pairs


def build_qmps(
    n_qubits: int,
    chi: int = 4,
    r: int = 1,
    sparse: bool = True,
    ordering: str = "reversed_space",
    n_t: int | None = None,
) -> Ansatz:
    """Staircase ansatz mirroring a matrix product state of bond dimension chi."""
    if chi not in (2, 4):
        raise ValueError(f"chi must be 2 or 4, got {chi}")
    if r not in (1, 2, 3):
        raise ValueError(f"r must be 1, 2 or 3, got {r}")
    if chi == 4 and n_qubits < 3:
        raise ValueError("chi=4 staircase needs at least 3 qubits")
    if chi == 2 and n_qubits < 2:
        raise ValueError("chi=2 staircase needs at least 2 qubits")
    n_t = n_qubits // 2 if n_t is None else n_t
    gates, blocks = [], []
    slot = 0
    last_kind = {w: None for w in range(n_qubits)}
    for unit_index, (top, bottom) in enumerate(_qmps_unit_pairs(n_qubits, chi, sparse)):
        lead = last_kind[top] != "rz"
        new = _qmps_unit(top, bottom, r, slot, lead)
        nparams = sum(1 for g in new if g.param is not None)
        blocks.append(
            Block(
                wires=(top, bottom),
                gate_range=(len(gates), len(gates) + len(new)),
                param_range=(slot, slot + nparams),
                layer=0,
                column=unit_index,
            )
        )
        gates += new
        slot += nparams
        for g in new:
            for w in g.wires:
                last_kind[w] = g.kind
    return Ansatz(
        family="qmps",
        n_qubits=n_qubits,
        n_t=n_t,
        ordering=ordering,
        gates=tuple(gates),
        blocks=tuple(blocks),
        param_count=slot,
        r=r,
        chi=chi,
        sparse=sparse,
    )


def circuit_depth(gates) -> int:
    """Greedy layering depth of a gate list (all gates count equally)."""
    frontier: dict[int, int] = {}
    depth = 0
    for g in gates:
        touched = tuple(g.wires) + tuple(g.controls)
        level = 1 + max((frontier.get(w, 0) for w in touched), default=0)
        for w in touched:
            frontier[w] = level
        depth = max(depth, level)
    return depth


def count_resources(ansatz: Ansatz) -> dict:
    """CNOT count, reported depth (family convention) and parameter count.

    Brickwall reports CNOTs scaled by the layer-depth/layer-CNOT ratio
    (2 / (n-1), i.e. the divide-by-2.5 rule on 6 qubits); the staircase
    reports its CNOT count directly.
    """
    cnots = ansatz.cnot_count()
    if ansatz.family == "brickwall":
        depth = cnots * 2 / (ansatz.n_qubits - 1)
    else:
        depth = cnots
    return {
        "cnot_count": cnots,
        "reported_depth": depth,
        "parameter_count": ansatz.param_count,
    }
