"""Differentiable cost/gradient kernels (JAX, CPU, float64).

This is the hot path behind :mod:`spacetime_vqe.objective`: circuits are
coalesced block-by-block into 4x4 unitaries and the Hamiltonian expectation
is evaluated slice-wise,

    <H> = c0 <C0> + sum_j || T_j(-dt) Psi_{j+1} - Psi_j ||^2 + c3 (1 - Re sum psi^2),

which avoids materialising the 2^n x 2^n matrix inside the optimiser loop.
The dense assembly in :mod:`spacetime_vqe.fkham` is the independent
reference implementation; tests pin the two against each other.
"""

from __future__ import annotations

import functools

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp
import numpy as np

from . import lattice
from .circuits import Ansatz, wire_axes
from .fkham import PdeProblem

_I2 = jnp.eye(2, dtype=jnp.complex128)
_CNOT = jnp.asarray(
    np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
)
_H = jnp.asarray(np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2))


def _rx(t):
    c, s = jnp.cos(t / 2), jnp.sin(t / 2)
    return jnp.array([[c, -1j * s], [-1j * s, c]])


def _ry(t):
    c, s = jnp.cos(t / 2), jnp.sin(t / 2)
    return jnp.array([[c, -s], [s, c]], dtype=jnp.complex128)


def _rz(t):
    e = jnp.exp(-0.5j * t)
    return jnp.array([[e, 0], [0, jnp.conj(e)]])


_ROT = {"rx": _rx, "ry": _ry, "rz": _rz}
_FIXED = {"cnot": _CNOT, "h": _H}


def _block_unitary(gates, params, top):
    """Fold a block's gate subsequence into one 4x4 unitary."""
    u = jnp.eye(4, dtype=jnp.complex128)
    for g in gates:
        if g.kind in _ROT:
            m2 = _ROT[g.kind](params[g.param])
            m4 = jnp.kron(m2, _I2) if g.wires[0] == top else jnp.kron(_I2, m2)
        elif g.kind == "cnot":
            if g.wires != (top, top + 1):
                raise ValueError("engine blocks expect CNOTs in (top, bottom) order")
            m4 = _CNOT
        else:
            raise ValueError(f"gate kind {g.kind!r} not supported in the block engine")
        u = m4 @ u
    return u


def _run_circuit(ansatz: Ansatz, params):
    axes = wire_axes(ansatz.n_qubits, ansatz.n_t, ansatz.ordering)
    n = ansatz.n_qubits
    psi = jnp.zeros((2,) * n, dtype=jnp.complex128).at[(0,) * n].set(1.0)
    for block in ansatz.blocks:
        top, bottom = block.wires
        u = _block_unitary(ansatz.gates[slice(*block.gate_range)], params, top)
        pair = (axes[top], axes[bottom])
        psi = jnp.moveaxis(psi, pair, (0, 1))
        shape = psi.shape
        psi = (u @ psi.reshape(4, -1)).reshape(shape)
        psi = jnp.moveaxis(psi, (0, 1), pair)
    return psi


def statevector(ansatz: Ansatz, params) -> np.ndarray:
    """Flat logical statevector via the block engine (test cross-check)."""
    return np.asarray(_run_circuit(ansatz, jnp.asarray(params, dtype=jnp.float64)).reshape(-1))


def _problem_constants(problem: PdeProblem):
    grid = problem.grid
    f0, norm = problem.initial_samples()
    return {
        "psi0": jnp.asarray(np.asarray(f0, dtype=complex) / norm),
        "f0": jnp.asarray(np.asarray(f0, dtype=float)),
        "norm": norm,
        "lap": jnp.asarray(lattice.laplacian(grid.n_x, grid.dx)),
        "d1": jnp.asarray(lattice.first_derivative(grid.n_x, grid.dx)),
        "eye": jnp.eye(grid.num_x, dtype=jnp.complex128),
    }


def _terms_from_state(psi, t_stack, problem, const):
    """C0 / C1 / C2 / C3 pieces given the state tensor and propagator stack."""
    grid = problem.grid
    big = psi.reshape(grid.num_x, grid.num_t)
    col0 = big[:, 0]
    c0_term = jnp.sum(jnp.abs(col0) ** 2) - jnp.abs(jnp.vdot(const["psi0"], col0)) ** 2
    prop = jnp.einsum("tij,jt->it", t_stack, big[:, 1:])
    resid = prop - big[:, :-1]
    xdagx = jnp.sum(jnp.abs(resid) ** 2)
    c1 = jnp.sum(jnp.abs(big[:, :-1]) ** 2) + jnp.sum(jnp.abs(prop) ** 2)
    c2 = c1 - xdagx
    flat = psi.reshape(-1)
    c3_term = 1.0 - jnp.real(jnp.sum(flat * flat))
    return jnp.real(c0_term), jnp.real(c1), jnp.real(c2), c3_term, xdagx


def _propagator_stack(f_slices, problem, const):
    """Backward propagators for slices 0..num_t-2 from their pointwise factors.

    f_slices: (num_t - 1, num_x) linearisation values (real or complex).
    """
    dt = problem.grid.dt
    gen = problem.diffusion * const["lap"][None, :, :]
    if problem.beta != 0.0:
        gen = gen - problem.beta * f_slices[:, :, None] * const["d1"][None, :, :]
    step = -dt * gen.astype(jnp.complex128)
    t_stack = const["eye"][None, :, :] + step
    if problem.taylor_order == 2:
        t_stack = t_stack + 0.5 * jnp.einsum("tij,tjk->tik", step, step)
    return t_stack


def _self_consistent_f(psi, problem, const, linearization):
    """Per-slice pointwise factors from the circuit state itself."""
    grid = problem.grid
    flat = psi.reshape(-1)
    big = psi.reshape(grid.num_x, grid.num_t)
    p0 = jnp.sum(jnp.abs(big[:, 0]) ** 2)
    m = const["norm"] / jnp.sqrt(p0)
    if linearization == "global_profile":
        return jnp.tile(const["f0"][None, :], (grid.num_t - 1, 1)), m
    if linearization == "slice_amplitude":
        return m * big[:, :-1].T, m
    # slice_real: rotate the largest amplitude onto the positive real axis
    pivot = flat[jnp.argmax(jnp.abs(flat))]
    phase = jnp.conj(pivot) / jnp.abs(pivot)
    return m * jnp.real(big[:, :-1].T * phase), m


@functools.lru_cache(maxsize=None)
def fixed_kernels(ansatz: Ansatz, problem: PdeProblem):
    """cost(params, t_stack) and its gradient, for a state-independent H."""
    const = _problem_constants(problem)

    def cost(params, t_stack):
        psi = _run_circuit(ansatz, params)
        c0_term, _, _, c3_term, xdagx = _terms_from_state(psi, t_stack, problem, const)
        return problem.c0 * c0_term + xdagx + problem.c3 * c3_term

    def report(params, t_stack):
        psi = _run_circuit(ansatz, params)
        c0_term, c1, c2, c3_term, xdagx = _terms_from_state(psi, t_stack, problem, const)
        grid = problem.grid
        p0 = jnp.sum(jnp.abs(psi.reshape(grid.num_x, grid.num_t)[:, 0]) ** 2)
        total = problem.c0 * c0_term + xdagx + problem.c3 * c3_term
        return total, problem.c0 * c0_term, c1, c2, problem.c3 * c3_term, const["norm"] / jnp.sqrt(p0)

    return (
        jax.jit(cost),
        jax.jit(jax.value_and_grad(cost)),
        jax.jit(report),
    )


@functools.lru_cache(maxsize=None)
def self_consistent_kernels(ansatz: Ansatz, problem: PdeProblem, linearization: str, grad_style: str):
    """cost(params) with H relinearised at the circuit state on every call.

    grad_style "full" differentiates through the state dependence of H;
    "frozen_h" holds the linearisation values fixed (stop_gradient), i.e.
    treats the relinearised H as a constant of the current iterate.
    """
    const = _problem_constants(problem)

    def cost(params):
        psi = _run_circuit(ansatz, params)
        f_slices, _ = _self_consistent_f(psi, problem, const, linearization)
        if grad_style == "frozen_h":
            f_slices = jax.lax.stop_gradient(f_slices)
        t_stack = _propagator_stack(f_slices, problem, const)
        c0_term, _, _, c3_term, xdagx = _terms_from_state(psi, t_stack, problem, const)
        return problem.c0 * c0_term + xdagx + problem.c3 * c3_term

    def report(params):
        psi = _run_circuit(ansatz, params)
        f_slices, m = _self_consistent_f(psi, problem, const, linearization)
        t_stack = _propagator_stack(f_slices, problem, const)
        c0_term, c1, c2, c3_term, xdagx = _terms_from_state(psi, t_stack, problem, const)
        total = problem.c0 * c0_term + xdagx + problem.c3 * c3_term
        return total, problem.c0 * c0_term, c1, c2, problem.c3 * c3_term, m

    return (
        jax.jit(cost),
        jax.jit(jax.value_and_grad(cost)),
        jax.jit(report),
    )


def fixed_t_stack(problem: PdeProblem, f_matrix: np.ndarray | None = None) -> jnp.ndarray:
    """Propagator stack for beta = 0 or for frozen linearisation values."""
    grid = problem.grid
    const = _problem_constants(problem)
    if problem.beta == 0.0:
        f_slices = jnp.zeros((grid.num_t - 1, grid.num_x))
    else:
        if f_matrix is None:
            raise ValueError("beta > 0 requires frozen f_values for the fixed-H path")
        f_matrix = np.asarray(f_matrix)
        if f_matrix.ndim == 1:
            f_matrix = np.tile(f_matrix.reshape(-1, 1), (1, grid.num_t))
        f_slices = jnp.asarray(f_matrix[:, : grid.num_t - 1].T)
    return _propagator_stack(f_slices, problem, const)
