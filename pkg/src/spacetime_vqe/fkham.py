"""Clock-register ("spacetime") Hamiltonian for diffusion/Burgers dynamics.

The PDE  df/dt = L[f] f  with  L[f] = D d^2/dx^2 - beta f d/dx  is turned
into a ground-state problem on a combined space+time register.  With the
backward propagator ``T = T(-dt)`` truncated at Taylor order 1 or 2, the
Hamiltonian reads

    H = c0 * C0 + C1 - C2           (equivalently c0*C0 + X^dag X)

    C0 = (I - |psi0><psi0|) (x) |0><0|
    C1 = sum_j [ I (x) |j><j|  +  T_j^dag T_j (x) |j+1><j+1| ]
    C2 = sum_j [ T_j (x) |j><j+1|  +  h.c. ]

where ``T_j`` is the backward propagator linearised at time slice j (state
dependence enters only for beta > 0).  The unique zero-energy ground state
is the history state: backward-Euler marching of the initial profile,
stacked over the time register.

All matrices here are dense numpy; the differentiable twin used inside the
optimiser lives in :mod:`spacetime_vqe._engine`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice
from .lattice import InitialProfile, SpacetimeGrid

P0_FLOOR = 1e-12  # minimum probability of measuring time 0

#: Linearisation rules for the state-dependent pointwise factor in L.
#:   slice_real       diag(f) from extract_solution (real, phase fixed); default
#:   slice_amplitude  diag(M * psi_slice) with raw complex amplitudes
#:                    (the rule realised by the measurement-circuit gadget)
#:   global_profile   single diag from the t=0 profile, identical for all slices
LINEARIZATIONS = ("slice_real", "slice_amplitude", "global_profile")


@dataclass(frozen=True)
class PdeProblem:
    """PDE coefficients plus grid, profile and penalty weights.

    beta = 0 reduces the convection term to zero and yields the heat
    equation exactly.  c0 weighs the initial-condition penalty (default 2),
    c3 weighs the optional real-value penalty (0 disables it).
    """

    grid: SpacetimeGrid
    diffusion: float = 0.05
    beta: float = 0.0
    taylor_order: int = 2
    profile: InitialProfile = InitialProfile(kind="gaussian")
    c0: float = 2.0
    c3: float = 0.0

    def __post_init__(self):
        if self.diffusion < 0:
            raise ValueError(f"diffusion must be >= 0, got {self.diffusion}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.taylor_order not in (1, 2):
            raise ValueError(f"taylor_order must be 1 or 2, got {self.taylor_order}")
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if self.c3 < 0:
            raise ValueError(f"c3 must be >= 0, got {self.c3}")

    def initial_samples(self):
        return lattice.sample_profile(self.profile, self.grid)

    def psi0(self) -> np.ndarray:
        return lattice.normalized_initial_state(self.profile, self.grid)

    def replace(self, **kwargs) -> "PdeProblem":
        import dataclasses

        return dataclasses.replace(self, **kwargs)


def linearized_generator(problem: PdeProblem, f_values) -> np.ndarray:
    """L = D * Laplacian - beta * diag(f) * D1 on the spatial register."""
    grid = problem.grid
    f_values = np.asarray(f_values)
    if f_values.shape != (grid.num_x,):
        raise ValueError(f"f_values has shape {f_values.shape}, expected ({grid.num_x},)")
    if not np.all(np.isfinite(f_values)):
        raise ValueError("non-finite entries in linearisation values")
    gen = problem.diffusion * lattice.laplacian(grid.n_x, grid.dx)
    gen = gen.astype(complex)
    if problem.beta != 0.0:
        d1 = lattice.first_derivative(grid.n_x, grid.dx)
        gen -= problem.beta * (f_values[:, None] * d1)
    return gen


def propagator(generator: np.ndarray, dt: float, order: int = 2, direction: str = "forward") -> np.ndarray:
    """Taylor propagator I + (s dt) L + ((s dt) L)^2 / 2 truncated at `order`."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    sign = 1.0 if direction == "forward" else -1.0
    step = sign * dt * np.asarray(generator)
    out = np.eye(generator.shape[0], dtype=complex) + step
    if order == 2:
        out = out + 0.5 * (step @ step)
    return out


def slices(state: np.ndarray, grid: SpacetimeGrid) -> np.ndarray:
    """View a flat spacetime vector as a (space, time) matrix."""
    state = np.asarray(state)
    if state.shape != (grid.dim,):
        raise ValueError(f"state has shape {state.shape}, expected ({grid.dim},)")
    return state.reshape(grid.num_x, grid.num_t)


def phase_fixed(state: np.ndarray) -> np.ndarray:
    """Rotate the largest-magnitude amplitude onto the positive real axis."""
    state = np.asarray(state, dtype=complex)
    k = int(np.argmax(np.abs(state)))
    pivot = state[k]
    if pivot == 0:
        return state.copy()
    return state * (pivot.conjugate() / abs(pivot))


def rescale_constant(state: np.ndarray, norm: float, grid: SpacetimeGrid) -> float:
    """M = N / sqrt(p0): maps time-0 amplitudes back onto physical values."""
    p0 = float(np.sum(np.abs(slices(state, grid)[:, 0]) ** 2))
    if p0 < P0_FLOOR:
        raise ValueError(f"state has no support on time index 0 (p0={p0:.3e} < {P0_FLOOR})")
    return norm / np.sqrt(p0)


def extract_solution(state: np.ndarray, problem: PdeProblem) -> np.ndarray:
    """Physical function values f_hat(x_i, t_j) = M * Re(phase-fixed state)."""
    grid = problem.grid
    _, norm = problem.initial_samples()
    fixed = phase_fixed(state)
    m = rescale_constant(fixed, norm, grid)
    return m * slices(fixed, grid).real


def linearization_values(problem: PdeProblem, state: np.ndarray, mode: str = "slice_real") -> np.ndarray:
    """Per-slice pointwise factors used inside L, shape (num_x, num_t).

    slice_amplitude returns a complex matrix (no phase fixing); the other
    modes return real matrices.
    """
    if mode not in LINEARIZATIONS:
        raise ValueError(f"unknown linearisation mode {mode!r}")
    grid = problem.grid
    if mode == "global_profile":
        f0, _ = problem.initial_samples()
        return np.tile(np.asarray(f0, dtype=float).reshape(-1, 1), (1, grid.num_t))
    if mode == "slice_real":
        return extract_solution(state, problem)
    _, norm = problem.initial_samples()
    m = rescale_constant(state, norm, grid)
    return m * slices(np.asarray(state, dtype=complex), grid)


def slice_propagators(problem: PdeProblem, f_matrix: np.ndarray) -> np.ndarray:
    """Backward propagators T_j(-dt) per time slice, shape (num_t, num_x, num_x)."""
    grid = problem.grid
    f_matrix = np.asarray(f_matrix)
    if f_matrix.shape != (grid.num_x, grid.num_t):
        raise ValueError(f"f_matrix has shape {f_matrix.shape}, expected ({grid.num_x}, {grid.num_t})")
    out = np.empty((grid.num_t, grid.num_x, grid.num_x), dtype=complex)
    for j in range(grid.num_t):
        gen = linearized_generator(problem, f_matrix[:, j])
        out[j] = propagator(gen, grid.dt, problem.taylor_order, "backward")
    return out


@dataclass(frozen=True)
class HamiltonianBundle:
    """Dense H = c0*C0 + C1 - C2 with its ingredients."""

    problem: PdeProblem
    hamiltonian: np.ndarray
    c0_matrix: np.ndarray
    c1_matrix: np.ndarray
    c2_matrix: np.ndarray
    propagators: np.ndarray  # (num_t, num_x, num_x) backward propagators per slice
    linearization: np.ndarray  # pointwise factors used, (num_x, num_t)
    rescale: float | None  # M when linearised at a state, else None

    def expectation(self, state: np.ndarray) -> float:
        state = np.asarray(state, dtype=complex)
        return float(np.real(np.vdot(state, self.hamiltonian @ state)))


def _time_projector(num_t: int, j: int) -> np.ndarray:
    p = np.zeros((num_t, num_t))
    p[j, j] = 1.0
    return p


def _time_hop(num_t: int, row: int, col: int) -> np.ndarray:
    p = np.zeros((num_t, num_t))
    p[row, col] = 1.0
    return p


def assemble_hamiltonian(
    problem: PdeProblem,
    state: np.ndarray | None = None,
    f_values: np.ndarray | None = None,
    linearization: str = "slice_real",
) -> HamiltonianBundle:
    """Assemble the dense Hamiltonian at a given linearisation point.

    For beta > 0, exactly one of `state` (self-consistent linearisation per
    `linearization` mode) or `f_values` (frozen: a (num_x, num_t) matrix of
    per-slice values, or a single length-num_x vector used for every slice)
    must be supplied.  For beta = 0 the linearisation argument is ignored.
    """
    grid = problem.grid
    nx, nt = grid.num_x, grid.num_t

    psi0 = problem.psi0()
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state failed to normalise")

    if problem.beta == 0.0:
        f_mat = np.zeros((nx, nt))
        rescale = None
    elif f_values is not None:
        f_mat = np.asarray(f_values)
        if f_mat.ndim == 1:
            f_mat = np.tile(f_mat.reshape(-1, 1), (1, nt))
        if not np.all(np.isfinite(f_mat)):
            raise ValueError("non-finite entries in linearisation values")
        rescale = None
    elif state is not None:
        state = np.asarray(state, dtype=complex)
        if not np.all(np.isfinite(state)):
            raise ValueError("non-finite entries in linearisation state")
        f_mat = linearization_values(problem, state, linearization)
        _, norm = problem.initial_samples()
        rescale = rescale_constant(state, norm, grid)
    else:
        raise ValueError("beta > 0 requires a linearisation state or frozen f_values")

    t_ops = slice_propagators(problem, f_mat)

    c0_mat = np.kron(np.eye(nx) - np.outer(psi0, psi0.conj()), _time_projector(nt, 0))

    c1_mat = np.zeros((grid.dim, grid.dim), dtype=complex)
    c2_mat = np.zeros((grid.dim, grid.dim), dtype=complex)
    eye_x = np.eye(nx)
    for j in range(nt - 1):
        t_j = t_ops[j]
        c1_mat += np.kron(eye_x, _time_projector(nt, j))
        c1_mat += np.kron(t_j.conj().T @ t_j, _time_projector(nt, j + 1))
        hop = np.kron(t_j, _time_hop(nt, j, j + 1))
        c2_mat += hop + hop.conj().T

    h = problem.c0 * c0_mat + c1_mat - c2_mat
    asym = np.max(np.abs(h - h.conj().T))
    if asym > 1e-12:
        raise AssertionError(f"assembled Hamiltonian is not Hermitian (max asymmetry {asym:.3e})")

    return HamiltonianBundle(
        problem=problem,
        hamiltonian=h,
        c0_matrix=c0_mat,
        c1_matrix=c1_mat,
        c2_matrix=c2_mat,
        propagators=t_ops,
        linearization=f_mat,
        rescale=rescale,
    )


def c1_summed_form(problem: PdeProblem, t_op: np.ndarray) -> np.ndarray:
    """C1 for a slice-independent propagator, written with the two
    one-projector-short identities instead of the explicit time sum."""
    grid = problem.grid
    nt = grid.num_t
    eye_t = np.eye(nt)
    top = eye_t - _time_projector(nt, nt - 1)
    bottom = eye_t - _time_projector(nt, 0)
    return np.kron(np.eye(grid.num_x), top) + np.kron(t_op.conj().T @ t_op, bottom)


def history_state(problem: PdeProblem, return_slices: bool = False):
    """The exact zero-energy ground state: backward-Euler marching of the
    initial profile stacked over the time register, normalised to 1.

    Each step solves T_j(-dt) f_{j+1} = f_j with T_j linearised at the
    physical values of slice j (semi-implicit for beta > 0).
    """
    grid = problem.grid
    f0, norm = problem.initial_samples()
    cols = np.empty((grid.num_x, grid.num_t), dtype=complex)
    cols[:, 0] = f0
    for j in range(grid.num_t - 1):
        gen = linearized_generator(problem, cols[:, j].real if problem.beta else cols[:, j])
        t_back = propagator(gen, grid.dt, problem.taylor_order, "backward")
        nxt = np.linalg.solve(t_back, cols[:, j])
        if np.linalg.norm(nxt) < 1e-12 * norm:
            raise FloatingPointError(
                f"propagation drove slice {j + 1} below norm floor; the marching is unstable"
            )
        cols[:, j + 1] = nxt
    state = cols.reshape(-1)
    state = state / np.linalg.norm(state)
    if return_slices:
        return state, cols
    return state
