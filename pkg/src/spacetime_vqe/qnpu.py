"""Gate-level compilation and evaluation of the Hadamard-test circuit family
that measures <H> term by term.

The expectation splits per Hamiltonian block.  With ``A`` the cyclic space
adder, ``c`` the pointwise multiplication by (rescaled) duplicate-ansatz
amplitudes, ``g = c^dag c``, ``S`` the non-periodic time raise and
``a = dt D / dx^2``, ``b = dt beta M / dx``, the order-1 backward propagator
is ``T = (1+2a) I - a (A + A^dag) + b c A^dag - b c`` and

    <C1> = <I (x) (I - |Nt><Nt|)>  +  <T^dag T (x) (I - |0><0|)>
    <C2> = 2 Re <T (x) S^dag>.

Expanding T^dag T produces 11 distinct Hermitian term groups (4 of order
dt^0/dt^1, 7 of order dt^2), C2 produces 4 (the A and A^dag entries share
one template through Re<A^dag (x) S^dag> = Re<A (x) S>), and three further
circuits measure the time-not-full identity, Re(sum psi^2) for the
real-value penalty, and the time-0 probability that feeds the rescale
constant M: 18 circuits for the Burgers equation, 11 after cutting the
dt^2 group, 8 for diffusion (beta = 0).  The family size never depends on
the register widths.

Inside C1 the multiplication picks up the values of the slice *before* the
projector's slice (matching the per-slice linearisation rule), which the
circuits realise by conjugating the gadget with the modular time adder.
The initial-condition term C0 is evaluated as a dense overlap; its
combined swap-test circuit exists for resource accounting only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice
from .circuits import Ansatz, Gate, apply_circuit, circuit_depth
from .fkham import PdeProblem, rescale_constant

# ---------------------------------------------------------------------------
# Gate-level adder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdderCircuit:
    """Increment circuit |i> -> |i+1> on `register` (msb first), using
    `carries` ancillas that start and end in |0>.  The modular variant wraps;
    the non-modular variant carries into a fresh most-significant qubit."""

    gates: tuple
    register: tuple  # msb ... lsb
    carries: tuple
    modular: bool

    @property
    def width(self) -> int:
        return len(self.register) + len(self.carries)


def _increment_gates(bits_lsb_first, carries):
    """Ripple incrementer: carry chain up, interleaved flips back down."""
    w = len(bits_lsb_first)
    b = bits_lsb_first
    if w == 1:
        return [Gate("x", (b[0],))]
    if w == 2:
        return [Gate("cnot", (b[0], b[1])), Gate("x", (b[0],))]
    a = carries
    gates = []
    gates.append(Gate("x", (a[0],), controls=(b[0], b[1])))
    for k in range(2, w - 1):
        gates.append(Gate("x", (a[k - 1],), controls=(a[k - 2], b[k])))
    gates.append(Gate("x", (b[w - 1],), controls=(a[w - 3],)))
    for k in range(w - 2, 1, -1):
        gates.append(Gate("x", (a[k - 1],), controls=(a[k - 2], b[k])))
        gates.append(Gate("x", (b[k],), controls=(a[k - 2],)))
    gates.append(Gate("x", (a[0],), controls=(b[0], b[1])))
    gates.append(Gate("x", (b[1],), controls=(b[0],)))
    gates.append(Gate("x", (b[0],)))
    return gates


def adder_circuit(width: int, modular: bool = True, wire_offset: int = 0) -> AdderCircuit:
    """Build the increment circuit on `width` register qubits.

    The non-modular variant prepends a zero-initialised most-significant
    qubit, so a full register carries into it instead of wrapping; gate and
    ancilla counts stay linear in the width.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    total_bits = width + (0 if modular else 1)
    register = tuple(range(wire_offset, wire_offset + total_bits))  # msb first
    n_car = max(0, total_bits - 2)
    carries = tuple(range(wire_offset + total_bits, wire_offset + total_bits + n_car))
    bits_lsb = list(reversed(register))
    gates = _increment_gates(bits_lsb, list(carries))
    return AdderCircuit(tuple(gates), register, carries, modular)


def simulate_gates(gates, width: int) -> np.ndarray:
    """Dense unitary of a gate list on `width` wires (wire 0 = most significant)."""
    dim = 2**width
    out = np.zeros((dim, dim), dtype=complex)
    from .circuits import apply_gate  # local import to avoid cycle at module load

    for col in range(dim):
        tensor = np.zeros((2,) * width, dtype=complex)
        tensor[np.unravel_index(col, (2,) * width)] = 1.0
        for g in gates:
            tensor = apply_gate(tensor, g, np.empty(0), tuple(range(width)))
        out[:, col] = tensor.reshape(-1)
    return out


def adder_unitary_on_register(adder: AdderCircuit) -> np.ndarray:
    """Effective operator on the register with carries fixed to |0> in/out.

    Raises if the carries fail to disentangle.
    """
    width = adder.width
    u = simulate_gates(adder.gates, width)
    reg_bits = len(adder.register)
    dim_reg, dim_car = 2**reg_bits, 2 ** len(adder.carries)
    full = u.reshape(dim_reg, dim_car, dim_reg, dim_car)
    eff = full[:, 0, :, 0]
    leak = np.abs(full[:, 1:, :, 0]).max() if dim_car > 1 else 0.0
    if leak > 1e-12:
        raise AssertionError(f"adder carries do not return to |0> (leak {leak:.2e})")
    return eff


# ---------------------------------------------------------------------------
# Compiled circuit family
# ---------------------------------------------------------------------------

#: coefficient monomial: (constant, power of a, power of b)
Monomial = tuple


@dataclass
class CompiledCircuit:
    label: str
    block: str  # "c1" | "c2" | "aux"
    core: tuple  # space-operator factors, matrix order (leftmost applied last)
    time_part: str  # "not0" | "notNt" | "Sdag" | "p0" | "psi2" | "joint"
    monomials: tuple  # sum of (const, pow_a, pow_b)
    pair_factor: int = 1  # 2 when the value stands for W + W^dag
    mirror_time: bool = False  # c2 shift template: add the reversed-time value
    dt2: bool = False  # dropped by the truncated family
    postselection: str = ""
    gates: tuple | None = None  # bound gate list (None until bound)
    registers: tuple = ()  # ((name, wires), ...) when bound

    def coefficient(self, a: float, b: float) -> float:
        return float(sum(const * a**pa * b**pb for const, pa, pb in self.monomials))

    def truncated_coefficient(self, a: float, b: float) -> float:
        return float(
            sum(const * a**pa * b**pb for const, pa, pb in self.monomials if pa + pb < 2)
        )


@dataclass
class CircuitFamily:
    problem: PdeProblem
    order: int
    circuits: tuple
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.circuits)

    def labels(self):
        return [c.label for c in self.circuits]


_C1_TABLE = [
    # label, core, monomials, pair, dt2
    ("c1-identity", (), ((1, 0, 0), (4, 1, 0), (6, 2, 0)), 1, False),
    ("c1-shift", ("A",), ((-2, 1, 0), (-4, 2, 0)), 2, False),
    ("c1-mult-shift", ("c", "Adag"), ((1, 0, 1), (2, 1, 1)), 2, False),
    ("c1-mult", ("c",), ((-1, 0, 1), (-2, 1, 1)), 2, False),
    ("c1-shift2", ("A", "A"), ((1, 2, 0),), 2, True),
    ("c1-shift-mult-shiftadj", ("A", "c", "Adag"), ((-1, 1, 1),), 2, True),
    ("c1-shiftadj-mult-shiftadj", ("Adag", "c", "Adag"), ((-1, 1, 1),), 2, True),
    ("c1-shift-mult", ("A", "c"), ((1, 1, 1),), 2, True),
    ("c1-shiftadj-mult", ("Adag", "c"), ((1, 1, 1),), 2, True),
    ("c1-mult2-diag", ("gg",), ((1, 0, 2),), 1, True),
    ("c1-mult2-shift", ("g", "Adag"), ((-1, 0, 2),), 2, True),
]

_C2_TABLE = [
    ("c2-identity", (), ((1, 0, 0), (2, 1, 0)), 2, False),
    ("c2-shift", ("A",), ((-1, 1, 0),), 2, True),  # last flag = mirror, see below
    ("c2-mult-shift", ("c", "Adag"), ((1, 0, 1),), 2, False),
    ("c2-mult", ("c",), ((-1, 0, 1),), 2, False),
]


def _uses_nonlinearity(circuit: CompiledCircuit) -> bool:
    return all(pb > 0 for _, _, pb in circuit.monomials)


def compile_family(problem: PdeProblem, order: int = 1, truncated: bool = False) -> CircuitFamily:
    """Enumerate the weighted measurement circuits for <H> at propagator order 1.

    Order 2 is covered by the dense evaluation path only; the truncated
    variant drops the 7 circuits carrying dt^2 terms of T^dag T.
    """
    if order != 1:
        raise ValueError(
            "gate-level compilation covers propagator order 1; use the dense path for order 2"
        )
    circuits = []
    for label, core, mono, pair, dt2 in _C1_TABLE:
        circuits.append(
            CompiledCircuit(
                label,
                "c1",
                core,
                "not0",
                mono,
                pair,
                dt2=dt2,
                postselection="keep time register != |0>",
            )
        )
    for label, core, mono, pair, mirror in _C2_TABLE:
        circuits.append(
            CompiledCircuit(
                label,
                "c2",
                core,
                "Sdag",
                mono,
                pair,
                mirror_time=mirror,
                postselection="keep time-extension qubit = |0>",
            )
        )
    circuits.append(
        CompiledCircuit(
            "c1-time-not-full", "c1", (), "notNt", ((1, 0, 0),), 1,
            postselection="count time register != |Nt>",
        )
    )
    circuits.append(
        CompiledCircuit("aux-psi2", "aux", (), "psi2", ((1, 0, 0),), 1,
                        postselection="keep all measured registers = |0>")
    )
    circuits.append(
        CompiledCircuit("aux-p0", "aux", (), "p0", ((1, 0, 0),), 1,
                        postselection="count time register = |0>")
    )
    if problem.beta == 0.0:
        circuits = [c for c in circuits if not _uses_nonlinearity(c)]
    if truncated:
        circuits = [c for c in circuits if not c.dt2]
    return CircuitFamily(problem, order, tuple(circuits), truncated)


# ---------------------------------------------------------------------------
# Analytic (statevector) evaluation
# ---------------------------------------------------------------------------


def _time_matrices(num_t: int):
    eye = np.eye(num_t)
    raise_op = np.zeros((num_t, num_t))
    for j in range(num_t - 1):
        raise_op[j + 1, j] = 1.0
    proj0 = np.zeros((num_t, num_t))
    proj0[0, 0] = 1.0
    proj_last = np.zeros((num_t, num_t))
    proj_last[-1, -1] = 1.0
    return {
        "not0": eye - proj0,
        "notNt": eye - proj_last,
        "S": raise_op,
        "Sdag": raise_op.T,
        "p0": proj0,
    }


class _EvalContext:
    """Dense full-register factors shared by all circuits of one evaluation."""

    def __init__(self, problem: PdeProblem, state: np.ndarray):
        grid = problem.grid
        nx, nt = grid.num_x, grid.num_t
        self.grid = grid
        self.state = state
        a_space = lattice.shift_plus(grid.n_x)
        eye_t = np.eye(nt)
        self.a_full = np.kron(a_space, eye_t)
        self.time = _time_matrices(nt)
        # raw duplicate-ansatz amplitudes; the rescale constant M lives in the
        # classical coefficient b
        self.c_full = np.diag(state)
        s_mod = np.kron(np.eye(nx), np.roll(eye_t, 1, axis=0))
        # inside C1 the multiplication reads the slice before the projector's
        self.c_shift = s_mod @ self.c_full @ s_mod.conj().T

    def factor(self, symbol: str, block: str) -> np.ndarray:
        c = self.c_shift if block == "c1" else self.c_full
        if symbol == "A":
            return self.a_full
        if symbol == "Adag":
            return self.a_full.conj().T
        if symbol == "c":
            return c
        if symbol == "cdag":
            return c.conj().T
        if symbol == "g":
            return c.conj().T @ c
        if symbol == "gg":
            g = c.conj().T @ c
            return self.a_full @ g @ self.a_full.conj().T + g
        raise ValueError(f"unknown core factor {symbol!r}")

    def time_full(self, name: str) -> np.ndarray:
        return np.kron(np.eye(self.grid.num_x), self.time[name])


def _circuit_value(circuit: CompiledCircuit, ctx: _EvalContext) -> float:
    state = ctx.state
    if circuit.time_part == "psi2":
        n = ctx.grid.n_x + ctx.grid.n_t
        return float(np.real(np.sum(state * state)) / np.sqrt(2**n))
    if circuit.time_part == "p0":
        return float(np.real(np.vdot(state, ctx.time_full("p0") @ state)))
    op = np.eye(ctx.grid.dim, dtype=complex)
    for symbol in circuit.core:
        op = op @ ctx.factor(symbol, circuit.block)
    op = op @ ctx.time_full(circuit.time_part)
    value = circuit.pair_factor * float(np.real(np.vdot(state, op @ state)))
    if circuit.mirror_time:
        mirror = np.eye(ctx.grid.dim, dtype=complex)
        for symbol in circuit.core:
            mirror = mirror @ ctx.factor(symbol, circuit.block)
        mirror = mirror @ ctx.time_full("S")
        value += circuit.pair_factor * float(np.real(np.vdot(state, mirror @ state)))
    return value


def _check_postselection(circuit: CompiledCircuit, state: np.ndarray, grid) -> None:
    big = np.abs(state.reshape(grid.num_x, grid.num_t)) ** 2
    p0 = big[:, 0].sum()
    plast = big[:, -1].sum()
    if circuit.time_part == "not0" and 1 - p0 < 1e-14:
        raise ValueError(f"postselection probability ~0 for circuit {circuit.label!r}")
    if circuit.time_part == "notNt" and 1 - plast < 1e-14:
        raise ValueError(f"postselection probability ~0 for circuit {circuit.label!r}")


def evaluate_family(family: CircuitFamily, ansatz: Ansatz, params) -> "objective.CostReport":
    """Exact statevector evaluation: weighted circuit values summed into <H>.

    Postselection enters analytically (joint-probability extraction, no
    division); C0 is the dense overlap; the reported breakdown matches the
    dense amplitude-linearised Hamiltonian at matching Taylor order.
    """
    from . import objective  # deferred: objective imports nothing from here

    problem = family.problem
    grid = problem.grid
    state = apply_circuit(ansatz, np.asarray(params, dtype=float))
    f0, norm = problem.initial_samples()
    m = rescale_constant(state, norm, grid)

    a = grid.dt * problem.diffusion / grid.dx**2
    b = grid.dt * problem.beta * m / grid.dx

    ctx = _EvalContext(problem, state)
    c1_total = 0.0
    c2_total = 0.0
    psi2_value = None
    for circuit in family.circuits:
        _check_postselection(circuit, state, grid)
        value = _circuit_value(circuit, ctx)
        if family.truncated:
            coeff = circuit.truncated_coefficient(a, b)
        else:
            coeff = circuit.coefficient(a, b)
        if circuit.block == "c1":
            c1_total += coeff * value
        elif circuit.block == "c2":
            c2_total += coeff * value
        elif circuit.time_part == "psi2":
            psi2_value = value
    psi0 = np.asarray(f0, dtype=complex) / norm
    col0 = state.reshape(grid.num_x, grid.num_t)[:, 0]
    c0_term = problem.c0 * float(
        np.real(np.sum(np.abs(col0) ** 2) - np.abs(np.vdot(psi0, col0)) ** 2)
    )
    n = grid.n_x + grid.n_t
    c3_term = 0.0
    if problem.c3 > 0 and psi2_value is not None:
        c3_term = problem.c3 * (1.0 - psi2_value * np.sqrt(2**n))
    total = c0_term + c1_total - c2_total + c3_term
    return objective.CostReport(
        total, c0_term, c1_total, c2_total, c3_term, m, "qnpu", "slice_amplitude"
    )


# ---------------------------------------------------------------------------
# Gate binding, the multiplication gadget, and export
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundGate:
    """A gate with a literal angle, ready for simulation or export."""

    kind: str
    wires: tuple
    controls: tuple = ()
    angle: float | None = None


def _bound_ansatz_gates(ansatz: Ansatz, params, offset: int, control=None, conjugate=False):
    """The ansatz as literal-angle gates on wires shifted by `offset`."""
    params = np.asarray(params, dtype=float)
    sign = -1.0 if conjugate else 1.0
    controls = () if control is None else (control,)
    out = []
    for g in ansatz.gates:
        wires = tuple(w + offset for w in g.wires)
        if g.param is not None:
            out.append(BoundGate(g.kind, wires, controls, sign * float(params[g.param])))
        else:
            out.append(BoundGate(g.kind, wires, controls))
    return out


def _controlled(gates, control):
    out = []
    for g in gates:
        out.append(BoundGate(g.kind, g.wires, (control,) + g.controls, g.angle))
    return out


def mult_gadget(ansatz: Ansatz, params, main_offset: int, dup_offset: int, control=None,
                conjugate: bool = False):
    """Pointwise-multiplication gadget: duplicate-ansatz preparation plus the
    pairwise main->dup CNOT rake; effective action after postselecting the
    duplicate on |0> is diag(duplicate amplitudes)."""
    n = ansatz.n_qubits
    gates = _bound_ansatz_gates(ansatz, params, dup_offset, control, conjugate)
    controls = () if control is None else (control,)
    for w in range(n):
        gates.append(BoundGate("x", (dup_offset + w,), controls + (main_offset + w,)))
    return gates


def mult_gadget_effective(ansatz: Ansatz, params) -> np.ndarray:
    """Dense effective operator of the gadget on the main register (dup
    postselected |0>); used by the verification tests."""
    n = ansatz.n_qubits
    gates = mult_gadget(ansatz, params, main_offset=0, dup_offset=n)
    u = simulate_bound_unitary(gates, 2 * n)
    dim = 2**n
    full = u.reshape(dim, dim, dim, dim)
    return full[:, 0, :, 0]


def _rgate_matrix(gate: BoundGate) -> np.ndarray:
    from . import circuits as _c

    if gate.kind in _c.ROTATIONS:
        return _c.ROTATIONS[gate.kind](gate.angle)
    return _c.FIXED_GATES[gate.kind]


def apply_bound_gate(tensor: np.ndarray, gate: BoundGate) -> np.ndarray:
    matrix = _rgate_matrix(gate)
    axes = gate.wires
    if not gate.controls:
        k = len(axes)
        tensor = np.moveaxis(tensor, axes, range(k))
        shape = tensor.shape
        tensor = (matrix @ tensor.reshape(2**k, -1)).reshape(shape)
        return np.moveaxis(tensor, range(k), axes)
    out = tensor.copy()
    sel = [slice(None)] * tensor.ndim
    for c in gate.controls:
        sel[c] = 1
    sel = tuple(sel)
    sub_axes = []
    for a in axes:
        sub_axes.append(a - sum(1 for c in gate.controls if c < a))
    sub = tensor[sel]
    k = len(sub_axes)
    sub = np.moveaxis(sub, tuple(sub_axes), range(k))
    shape = sub.shape
    sub = (matrix @ sub.reshape(2**k, -1)).reshape(shape)
    out[sel] = np.moveaxis(sub, range(k), tuple(sub_axes))
    return out


def simulate_bound_state(gates, width: int) -> np.ndarray:
    tensor = np.zeros((2,) * width, dtype=complex)
    tensor[(0,) * width] = 1.0
    for g in gates:
        tensor = apply_bound_gate(tensor, g)
    return tensor.reshape(-1)


def simulate_bound_unitary(gates, width: int) -> np.ndarray:
    dim = 2**width
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        tensor = np.zeros((2,) * width, dtype=complex)
        tensor[np.unravel_index(col, (2,) * width)] = 1.0
        for g in gates:
            tensor = apply_bound_gate(tensor, g)
        out[:, col] = tensor.reshape(-1)
    return out


def bind_family(family: CircuitFamily, ansatz: Ansatz, params=None) -> CircuitFamily:
    """Attach concrete gate lists (Hadamard-test scaffolding, adders, gadgets)
    to every circuit of the family."""
    params = np.zeros(ansatz.param_count) if params is None else np.asarray(params, float)
    bound = []
    for circuit in family.circuits:
        gates, registers = _bind_circuit(circuit, family.problem, ansatz, params)
        c = CompiledCircuit(
            circuit.label, circuit.block, circuit.core, circuit.time_part,
            circuit.monomials, circuit.pair_factor, circuit.mirror_time, circuit.dt2,
            circuit.postselection, tuple(gates), tuple(registers.items()),
        )
        bound.append(c)
    return CircuitFamily(family.problem, family.order, tuple(bound), family.truncated)


def gate_level_value(circuit: CompiledCircuit, problem: PdeProblem, ansatz: Ansatz, params) -> float:
    """Run a circuit's full gate list and extract its measured value.

    Hadamard-test circuits use the joint-probability rule
    P(anc=0 & postselect) - P(anc=1 & postselect); sampling circuits count
    time-register events; the joint-statistics circuit post-processes the
    main/duplicate histogram.  Mirrored templates add the reversed-time run.
    """
    params = np.asarray(params, dtype=float)
    value = _gate_level_single(circuit, problem, ansatz, params, mirror=False)
    if circuit.mirror_time:
        value += _gate_level_single(circuit, problem, ansatz, params, mirror=True)
    return value


def _gate_level_single(circuit, problem, ansatz, params, mirror):
    gates, registers = _bind_circuit(circuit, problem, ansatz, params, mirror=mirror)
    width = 0
    for g in gates:
        width = max(width, max(g.wires + g.controls) + 1)
    for _, wires in registers.items():
        width = max(width, max(wires) + 1)
    state = simulate_bound_state(gates, width).reshape((2,) * width)
    regs = dict(registers)
    grid = problem.grid
    time_wires, _ = _register_wires(ansatz, regs["main_time"] + regs["main_space"])

    if circuit.time_part in ("p0", "notNt"):
        marg = _marginal(np.abs(state) ** 2, time_wires)
        if circuit.time_part == "p0":
            return float(marg[0])
        return float(marg.sum() - marg[-1])

    if circuit.core == ("gg",):
        main = regs["main_time"] + regs["main_space"]
        dup = regs["dup1"]
        p = np.abs(state) ** 2
        joint = _marginal(p, tuple(_logical_wires(ansatz, main)) + tuple(_logical_wires(ansatz, dup)))
        joint = joint.reshape(grid.num_x, grid.num_t, grid.num_x, grid.num_t)
        total = 0.0
        for j in range(1, grid.num_t):
            for x in range(grid.num_x):
                total += joint[x, j, x, j - 1]  # <g (shifted)>
                total += joint[x, j, (x - 1) % grid.num_x, j - 1]  # <A g A^dag>
        return float(total)

    # Hadamard-test extraction
    anc = regs["ancilla"][0]
    conds_eq = []
    for name, wires in regs.items():
        if name.startswith("dup") or name in ("time_ext", "carries"):
            conds_eq += [(w, 0) for w in wires]
    p = np.abs(state) ** 2
    if circuit.time_part == "psi2":
        for w in regs["main_time"] + regs["main_space"]:
            conds_eq.append((w, 0))
        p0sel = _prob_with(p, [(anc, 0)] + conds_eq, neq_time=None, time_wires=None)
        p1sel = _prob_with(p, [(anc, 1)] + conds_eq, neq_time=None, time_wires=None)
        return float(p0sel - p1sel)
    neq = time_wires if circuit.time_part == "not0" else None
    p0sel = _prob_with(p, [(anc, 0)] + conds_eq, neq_time=neq, time_wires=time_wires)
    p1sel = _prob_with(p, [(anc, 1)] + conds_eq, neq_time=neq, time_wires=time_wires)
    return float(circuit.pair_factor * (p0sel - p1sel))


def _logical_wires(ansatz, register_wires):
    """Register wires rearranged so the flat index is the logical (space-major)
    basis index."""
    from .circuits import wire_axes

    axes = wire_axes(ansatz.n_qubits, ansatz.n_t, ansatz.ordering)
    order = sorted(range(len(register_wires)), key=lambda w: axes[w])
    return [register_wires[w] for w in order]


def _marginal(p, wires_msb_first):
    """Marginal distribution over the given wires, flattened msb-first."""
    width = p.ndim
    other = tuple(a for a in range(width) if a not in wires_msb_first)
    marg = p.sum(axis=other)
    remaining = [w for w in range(width) if w not in other]
    perm = [remaining.index(w) for w in wires_msb_first]
    return np.transpose(marg, perm).reshape(-1)


def _prob_with(p, eq_conditions, neq_time, time_wires):
    """Probability of all eq conditions (wire == value) holding, optionally
    restricted to time register != 0."""
    width = p.ndim
    sel = [slice(None)] * width
    for wire, value in eq_conditions:
        sel[wire] = value
    kept = p[tuple(sel)]
    if neq_time is None:
        return kept.sum()
    remaining = [w for w in range(width) if not any(w == c[0] for c in eq_conditions)]
    time_pos = [remaining.index(w) for w in time_wires]
    marg_time = _marginal_from(kept, time_pos)
    return marg_time.sum() - marg_time[0]


def _marginal_from(p, axes_msb_first):
    other = tuple(a for a in range(p.ndim) if a not in axes_msb_first)
    marg = p.sum(axis=other) if other else p
    remaining = [a for a in range(p.ndim) if a not in other]
    perm = [remaining.index(a) for a in axes_msb_first]
    return np.transpose(marg, perm).reshape(-1)


def _bind_circuit(circuit: CompiledCircuit, problem: PdeProblem, ansatz: Ansatz, params,
                  mirror: bool = False):
    """Lay out wires and emit the full gate list of one measurement circuit.

    `mirror` binds the reversed-time variant of a mirrored template (the time
    adder uninverted), measuring Re<W (x) S> instead of Re<W (x) S^dag>.
    """
    grid = problem.grid
    n_t, n_x = grid.n_t, grid.n_x
    n = ansatz.n_qubits
    registers: dict[str, tuple] = {}
    gates: list[BoundGate] = []

    joint_stats = circuit.core == ("gg",)
    needs_anc = circuit.time_part in ("not0", "Sdag", "psi2") and not joint_stats
    cursor = 0
    anc = None
    if needs_anc:
        anc = cursor
        registers["ancilla"] = (anc,)
        cursor += 1
    ext = None
    if circuit.time_part == "Sdag":
        ext = cursor
        registers["time_ext"] = (ext,)
        cursor += 1
    main = tuple(range(cursor, cursor + n))
    registers["main_time"] = main[:n_t]
    registers["main_space"] = main[n_t:]
    cursor += n

    n_dups = 0
    if circuit.time_part == "psi2" or any(s in ("c", "cdag") for s in circuit.core):
        n_dups = 1
    if any(s in ("g", "gg") for s in circuit.core):
        n_dups = 2 if not joint_stats else 1
    dup_offsets = []
    for d in range(n_dups):
        dup = tuple(range(cursor, cursor + n))
        registers[f"dup{d + 1}"] = dup
        dup_offsets.append(cursor)
        cursor += n

    if circuit.time_part == "psi2":
        # overlap-style circuit: everything ancilla-controlled, postselect |0..0>
        gates.append(BoundGate("h", (anc,)))
        gates += _bound_ansatz_gates(ansatz, params, main[0], control=anc)
        gates += _bound_ansatz_gates(ansatz, params, dup_offsets[0], control=anc)
        for w in range(n):
            gates.append(BoundGate("x", (dup_offsets[0] + w,), (anc, main[0] + w)))
        for w in main:
            gates.append(BoundGate("h", (w,), (anc,)))
        gates.append(BoundGate("h", (anc,)))
        return gates, registers

    gates += _bound_ansatz_gates(ansatz, params, main[0])

    if circuit.time_part in ("p0", "notNt"):
        return gates, registers
    if joint_stats:
        # main and one duplicate, prepared independently and measured together
        gates += _bound_ansatz_gates(ansatz, params, dup_offsets[0])
        return gates, registers

    gates.append(BoundGate("h", (anc,)))

    # which physical wires carry the register bits, most significant first
    time_wires, space_wires = _register_wires(ansatz, main)
    carry_base = cursor
    max_carries = 0

    def emit_adder(width, modular, register_wires, inverse):
        nonlocal max_carries
        adder = adder_circuit(width, modular)
        remap = {w: register_wires[k] for k, w in enumerate(adder.register)}
        max_carries = max(max_carries, len(adder.carries))
        for k, w in enumerate(adder.carries):
            remap[w] = carry_base + k
        seq = [
            BoundGate(g.kind, tuple(remap[w] for w in g.wires),
                      (anc,) + tuple(remap[w] for w in g.controls))
            for g in adder.gates
        ]
        return list(reversed(seq)) if inverse else seq

    # time part first (rightmost operator factor): S^dag = inverse non-modular raise
    if circuit.time_part == "Sdag":
        gates += emit_adder(n_t, False, (ext,) + tuple(time_wires), inverse=not mirror)
    # for "not0" the projector enters through postselection, no gates

    # core factors, applied right to left
    for symbol in reversed(circuit.core):
        if symbol in ("A", "Adag"):
            gates += emit_adder(n_x, True, tuple(space_wires), inverse=(symbol == "Adag"))
        elif symbol in ("c", "cdag", "g"):
            shifted = circuit.block == "c1"
            if shifted:
                # read the previous slice: conjugate the gadget by the time raise
                gates += emit_adder(n_t, True, tuple(time_wires), inverse=True)
            if symbol == "g":
                gates += mult_gadget(ansatz, params, main[0], dup_offsets[0], anc, conjugate=True)
                gates += mult_gadget(ansatz, params, main[0], dup_offsets[1], anc)
            else:
                gates += mult_gadget(ansatz, params, main[0], dup_offsets[0], anc,
                                     conjugate=(symbol == "cdag"))
            if shifted:
                gates += emit_adder(n_t, True, tuple(time_wires), inverse=False)
    if max_carries:
        registers["carries"] = tuple(range(carry_base, carry_base + max_carries))
    gates.append(BoundGate("h", (anc,)))
    return gates, registers


def _register_wires(ansatz: Ansatz, main: tuple):
    """Physical wires carrying the time/space register bits, msb first."""
    from .circuits import wire_axes

    axes = wire_axes(ansatz.n_qubits, ansatz.n_t, ansatz.ordering)
    wire_of_axis = {a: w for w, a in enumerate(axes)}
    n_x = ansatz.n_x
    time_wires = [main[0] + wire_of_axis[n_x + k] for k in range(ansatz.n_t)]
    space_wires = [main[0] + wire_of_axis[k] for k in range(n_x)]
    return time_wires, space_wires


def resource_report(family: CircuitFamily, ansatz: Ansatz | None = None) -> dict:
    """Per-circuit width/depth/multi-qubit-gate counts plus a family summary."""
    circuits = family.circuits
    if circuits and circuits[0].gates is None:
        if ansatz is None:
            raise ValueError("family is unbound; pass the ansatz to bind against")
        family = bind_family(family, ansatz)
        circuits = family.circuits
    rows = []
    for c in circuits:
        wires = set()
        two_qubit = 0
        for g in c.gates:
            touched = set(g.wires) | set(g.controls)
            wires |= touched
            if len(touched) >= 2:
                two_qubit += 1
        rows.append(
            {
                "label": c.label,
                "width": len(wires),
                "depth": circuit_depth(c.gates),
                "two_qubit_count": two_qubit,
            }
        )
    summary = {
        "family_size": len(circuits),
        "max_width": max(r["width"] for r in rows),
        "max_depth": max(r["depth"] for r in rows),
        "total_two_qubit": sum(r["two_qubit_count"] for r in rows),
    }
    return {"circuits": rows, "summary": summary}


def export_circuit_text(circuit: CompiledCircuit, problem: PdeProblem) -> str:
    """Quantum-assembly text for one bound circuit (OpenQASM-2 flavoured;
    multi-controlled X beyond ccx is spelled mcx)."""
    if circuit.gates is None:
        raise ValueError("circuit is unbound")
    width = 0
    for g in circuit.gates:
        width = max(width, max(g.wires + g.controls) + 1)
    a = problem.grid.dt * problem.diffusion / problem.grid.dx**2
    lines = [
        "OPENQASM 2.0;",
        'include "qelib1.inc";',
        f"// label: {circuit.label}",
        f"// block: {circuit.block}  core: {'*'.join(circuit.core) or 'I'}  time: {circuit.time_part}",
        f"// coefficient(a,b): {circuit.monomials}  [a = dt*D/dx^2 = {a:.6g}, b = dt*beta*M/dx]",
        f"// postselection: {circuit.postselection}",
        f"// registers: {dict(circuit.registers)}",
        f"qreg q[{width}];",
        f"creg m[{width}];",
    ]
    for g in circuit.gates:
        lines.append(_qasm_line(g))
    return "\n".join(lines) + "\n"


def _qasm_line(g: BoundGate) -> str:
    args = ",".join(f"q[{w}]" for w in g.controls + g.wires)
    if g.kind in ("rx", "ry", "rz"):
        name = {0: g.kind, 1: "c" + g.kind}.get(len(g.controls))
        if name is None:
            name = f"mc{g.kind}"
        return f"{name}({g.angle:.12g}) {args};"
    if g.kind == "x":
        name = {0: "x", 1: "cx", 2: "ccx"}.get(len(g.controls), "mcx")
        return f"{name} {args};"
    if g.kind == "cnot":
        name = {0: "cx", 1: "ccx"}.get(len(g.controls), "mcx")
        return f"{name} {args};"
    if g.kind == "h":
        name = {0: "h", 1: "ch"}.get(len(g.controls), "mch")
        return f"{name} {args};"
    if g.kind == "swap":
        name = {0: "swap", 1: "cswap"}.get(len(g.controls), "mcswap")
        return f"{name} {args};"
    return f"// unsupported gate {g.kind} {args};"


def export_family(family: CircuitFamily, directory, ansatz: Ansatz | None = None, params=None):
    """Write one assembly file per circuit; returns the written paths."""
    import pathlib

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    circuits = family.circuits
    if circuits and circuits[0].gates is None:
        if ansatz is None:
            raise ValueError("family is unbound; pass ansatz (and params) to bind")
        family = bind_family(family, ansatz, params)
        circuits = family.circuits
    paths = []
    for c in circuits:
        path = directory / f"{c.label}.qasm"
        path.write_text(export_circuit_text(c, family.problem))
        paths.append(path)
    return paths
