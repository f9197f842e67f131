"""Imaginary time evolution, gap scans, stability bounds, and the dense
eigensolver oracle.

ITE iterates phi <- normalise(phi - tau H(phi) phi), relinearising the
state-dependent Hamiltonian at the current iterate on every step.  The
first excited state is reached by the same iteration with the shifted
operator H'(phi) = H(phi) + c |E0'><E0'|, where |E0'> is the lowest
eigenvector of H(phi) recomputed each step and c (> E1' always) pushes the
momentary ground state above the rest of the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fkham import PdeProblem, assemble_hamiltonian, slices

MAX_DENSE_DIM = 2**12


def stability_check(diffusion: float, beta: float, dt: float, dx: float) -> dict:
    """Explicit-scheme stability bound D dt / dx^2 < 1/2.

    The convection strength does not enter the bound; it is accepted to
    mirror the problem signature.
    """
    if dx <= 0:
        raise ValueError("dx must be positive")
    if diffusion == 0:
        return {"stable": True, "margin": 0.5, "dt_max": np.inf}
    number = diffusion * dt / dx**2
    return {
        "stable": bool(number < 0.5),
        "margin": 0.5 - number,
        "dt_max": dx**2 / (2 * diffusion),
    }


def dense_eigs(h: np.ndarray, k: int = 1):
    """k lowest eigenpairs of a Hermitian matrix (the brute-force oracle).

    Returns (values ascending, vectors as columns); verifies Hermiticity,
    the dimension guard, and the eigenresidual.
    """
    h = np.asarray(h)
    dim = h.shape[0]
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"dimension {dim} exceeds the dense-solver guard {MAX_DENSE_DIM}")
    if np.max(np.abs(h - h.conj().T)) > 1e-10:
        raise ValueError("matrix is not Hermitian within 1e-10")
    values, vectors = np.linalg.eigh(h)
    values, vectors = values[:k], vectors[:, :k]
    residual = np.linalg.norm(h @ vectors - vectors * values, axis=0).max()
    if residual > 1e-9:
        raise AssertionError(f"eigenresidual {residual:.2e} exceeds 1e-9")
    return values, vectors


@dataclass(frozen=True)
class IteConfig:
    tau: float | None = None  # None: 0.1 / (spectral-norm estimate), refreshed
    max_steps: int = 200_000
    target: float = 1e-14  # E0 convergence goal
    shift_factor: float = 2.0  # c = shift_factor * running E1' estimate
    seed: int = 0
    linearization: str = "slice_real"
    residual_target: float = 1e-8  # eigencondition residual (excited state)
    divergence_window: int = 50


@dataclass
class IteResult:
    energy: float
    state: np.ndarray
    trace: np.ndarray
    converged: bool
    unstable: bool = False
    unphysical: bool = False
    residual: float = np.nan
    steps: int = 0


def _random_state(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return phi / np.linalg.norm(phi)


def _norm_estimate(h: np.ndarray, carry: np.ndarray | None, iters: int) -> tuple:
    """Power-iteration estimate of ||H||, warm-started from `carry`."""
    if carry is None:
        carry = np.ones(h.shape[0], dtype=complex) / np.sqrt(h.shape[0])
    for _ in range(iters):
        nxt = h @ carry
        norm = np.linalg.norm(nxt)
        if norm == 0:
            return 1.0, carry
        carry = nxt / norm
    return float(np.linalg.norm(h @ carry)), carry


def _hamiltonian_at(problem: PdeProblem, phi: np.ndarray, linearization: str) -> np.ndarray:
    return assemble_hamiltonian(problem, state=phi, linearization=linearization).hamiltonian


def _slice_norm_flags(problem: PdeProblem, phi: np.ndarray) -> bool:
    cols = slices(phi, problem.grid)
    first = np.linalg.norm(cols[:, 0])
    last = np.linalg.norm(cols[:, -1])
    return bool(last > 2.0 * first)


def ite_ground(problem: PdeProblem, config: IteConfig = IteConfig()) -> IteResult:
    """Euler imaginary-time iteration toward the zero-energy ground state.

    Divergence (energy increasing over a window) flags instability; a
    converged state whose late-time slices outweigh the initial slice by
    more than 2x is flagged unphysical.
    """
    grid = problem.grid
    state_independent = problem.beta == 0.0
    phi = _random_state(grid.dim, config.seed)
    h = _hamiltonian_at(problem, phi, config.linearization)
    norm_est, carry = _norm_estimate(h, None, 30)
    trace = []
    unstable = False
    steps = 0
    for step in range(config.max_steps):
        steps = step + 1
        energy = float(np.real(np.vdot(phi, h @ phi)))
        trace.append(energy)
        if energy <= config.target:
            break
        window = config.divergence_window
        if len(trace) > 2 * window:
            recent = np.asarray(trace[-window:])
            earlier = np.asarray(trace[-2 * window : -window])
            if recent.mean() > earlier.mean() * (1 + 1e-9) and recent.mean() > 10 * config.target:
                unstable = True
                break
        tau = config.tau if config.tau is not None else 0.1 / max(norm_est, 1e-12)
        phi = phi - tau * (h @ phi)
        phi = phi / np.linalg.norm(phi)
        if not state_independent:
            h = _hamiltonian_at(problem, phi, config.linearization)
            norm_est, carry = _norm_estimate(h, carry, 2)
        # plateau detection: no meaningful decrease over a long window
        if len(trace) > 500 and abs(trace[-500] - trace[-1]) < 1e-16 + 1e-9 * abs(trace[-1]):
            break
    energy = float(np.real(np.vdot(phi, h @ phi)))
    residual = float(np.linalg.norm(h @ phi - energy * phi))
    converged = energy <= config.target and not unstable
    return IteResult(
        energy, phi, np.asarray(trace), converged, unstable,
        _slice_norm_flags(problem, phi), residual, steps,
    )


def ite_excited(problem: PdeProblem, config: IteConfig = IteConfig()) -> IteResult:
    """ITE with the rank-one-shifted Hamiltonian, targeting the first
    excited state; converged when the (unshifted) eigenresidual drops
    below `config.residual_target`."""
    grid = problem.grid
    state_independent = problem.beta == 0.0
    phi = _random_state(grid.dim, config.seed + 1)
    h = _hamiltonian_at(problem, phi, config.linearization)
    vals, vecs = np.linalg.eigh(h)
    trace = []
    residual = np.inf
    energy = np.nan
    converged = False
    steps = 0
    norm_carry = None
    for step in range(config.max_steps):
        steps = step + 1
        ground = vecs[:, 0]
        shift = config.shift_factor * max(vals[1], 1e-12)
        h_shifted = h + shift * np.outer(ground, ground.conj())
        energy = float(np.real(np.vdot(phi, h @ phi)))
        residual = float(np.linalg.norm(h @ phi - energy * phi))
        trace.append(energy)
        if residual <= config.residual_target and step > 1:
            converged = True
            break
        norm_est, norm_carry = _norm_estimate(h_shifted, norm_carry, 2 if step else 30)
        tau = config.tau if config.tau is not None else 0.1 / max(norm_est, 1e-12)
        phi = phi - tau * (h_shifted @ phi)
        phi = phi / np.linalg.norm(phi)
        if not state_independent:
            h = _hamiltonian_at(problem, phi, config.linearization)
            vals, vecs = np.linalg.eigh(h)
    return IteResult(
        energy, phi, np.asarray(trace), converged, False,
        _slice_norm_flags(problem, phi), residual, steps,
    )


def gap_scan(problem_template: PdeProblem, n_t_values, config: IteConfig = IteConfig()):
    """First-excited energy E1 per time-register size at fixed dt."""
    rows = []
    for n_t in n_t_values:
        grid = problem_template.grid
        problem = problem_template.replace(
            grid=type(grid)(grid.n_x, int(n_t), grid.domain_length, grid.dt)
        )
        result = ite_excited(problem, config)
        rows.append({"n_t": int(n_t), "e1": result.energy, "converged": result.converged,
                     "residual": result.residual})
    return rows
