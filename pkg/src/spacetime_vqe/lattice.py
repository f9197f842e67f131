"""Spacetime grids, initial profiles, and dense finite-difference operators.

Conventions used throughout the package:

* Space lives on ``x_i = i * dx`` for ``i = 0 .. 2**n_x - 1`` with
  ``dx = L / 2**n_x``; the point at ``x = L`` is identified with ``x = 0``
  (periodic boundary).
* Time lives on ``t_j = j * dt`` for ``j = 0 .. 2**n_t - 1``.
* Spacetime vectors are flat complex arrays of length ``2**(n_x + n_t)``
  with index ``i * 2**n_t + j`` (space-major); ``state.reshape(nx, nt)``
  therefore gives a (space, time) matrix of amplitudes.
* ``shift_plus`` is the cyclic increment permutation on register values,
  ``P |i> = |i+1 mod 2**n>``.  As a matrix on amplitude vectors, ``P.T``
  shifts function samples forward (``(P.T f)_j = f_{j+1}``), which is why
  the forward-difference stencil below is built from ``P.T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 14  # desk-scale guard: 2**14 points per register at most


@dataclass(frozen=True)
class SpacetimeGrid:
    """Discretisation of x in [0, L) and t in [0, (2**n_t - 1) * dt]."""

    n_x: int
    n_t: int
    domain_length: float = 1.0
    dt: float = 0.05

    def __post_init__(self):
        for name in ("n_x", "n_t"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            if value > MAX_QUBITS:
                raise ValueError(f"{name}={value} exceeds the desk-scale guard of {MAX_QUBITS} qubits")
        if not self.domain_length > 0:
            raise ValueError(f"domain_length must be positive, got {self.domain_length!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")

    @property
    def num_x(self) -> int:
        return 2**self.n_x

    @property
    def num_t(self) -> int:
        return 2**self.n_t

    @property
    def dx(self) -> float:
        return self.domain_length / self.num_x

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.num_x) * self.dx

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.num_t) * self.dt

    @property
    def dim(self) -> int:
        """Dimension of the combined spacetime register."""
        return self.num_x * self.num_t


def build_grid(n_x: int, n_t: int, domain_length: float, dt: float) -> SpacetimeGrid:
    """Validate inputs and build a spacetime grid."""
    return SpacetimeGrid(n_x=n_x, n_t=n_t, domain_length=domain_length, dt=dt)


@dataclass(frozen=True)
class InitialProfile:
    """Initial condition f(x, t_0).

    kind:
        "gaussian"      exp(-(2 pi x - pi)^2), the shock-wave seed
        "shifted_sine"  shift + sin(2 pi x)
        "custom"        explicit samples (length must match the grid)
    shift:
        additive vertical offset (used by shifted_sine; additive for all kinds)
    x_offset:
        horizontal offset, profile is evaluated at x + x_offset
    """

    kind: str = "gaussian"
    shift: float = 0.0
    x_offset: float = 0.0
    samples: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in ("gaussian", "shifted_sine", "custom"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "custom" and len(self.samples) == 0:
            raise ValueError("custom profile requires samples")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        xs = np.asarray(x, dtype=float) + self.x_offset
        if self.kind == "gaussian":
            base = np.exp(-((2 * np.pi * xs - np.pi) ** 2))
        elif self.kind == "shifted_sine":
            base = np.sin(2 * np.pi * xs)
        else:
            raise ValueError("custom profiles carry explicit samples and cannot be evaluated")
        return self.shift + base


def sample_profile(profile: InitialProfile, grid: SpacetimeGrid):
    """Sample f(x, t_0) on the grid; return (samples, Euclidean norm)."""
    if profile.kind == "custom":
        f = np.asarray(profile.samples, dtype=complex)
        if profile.x_offset != 0.0:
            raise ValueError("x_offset is not defined for custom sample profiles")
        f = f + profile.shift
        if f.shape != (grid.num_x,):
            raise ValueError(
                f"custom profile has {f.shape[0]} samples, grid has {grid.num_x} spatial points"
            )
        if np.isrealobj(np.asarray(profile.samples)):
            f = f.real.astype(float)
    else:
        f = profile.evaluate(grid.x)
    norm = float(np.linalg.norm(f))
    if norm == 0:
        raise ValueError("profile samples are identically zero; normalisation is undefined")
    return f, norm


def normalized_initial_state(profile: InitialProfile, grid: SpacetimeGrid) -> np.ndarray:
    """|psi_0> = f(x, t_0) / ||f||."""
    f, norm = sample_profile(profile, grid)
    return np.asarray(f, dtype=complex) / norm


def shift_plus(n: int) -> np.ndarray:
    """Cyclic increment permutation |i> -> |i+1 mod 2**n>."""
    dim = 2**n
    return np.roll(np.eye(dim), 1, axis=0)


def shift_minus(n: int) -> np.ndarray:
    """Cyclic decrement permutation |i> -> |i-1 mod 2**n>."""
    return shift_plus(n).T


def laplacian(n: int, dx: float) -> np.ndarray:
    """Periodic three-point Laplacian (A - 2I + A^dag) / dx^2."""
    a = shift_plus(n)
    return (a - 2 * np.eye(2**n) + a.T) / dx**2


def first_derivative(n: int, dx: float) -> np.ndarray:
    """Periodic forward difference, (D1 f)_j = (f_{j+1} - f_j) / dx."""
    return (shift_minus(n) - np.eye(2**n)) / dx


def diag_multiplier(values: np.ndarray) -> np.ndarray:
    """Diagonal pointwise-multiplication operator."""
    values = np.asarray(values)
    if values.ndim != 1:
        raise ValueError("diag_multiplier expects a vector")
    return np.diag(values.astype(complex))


@dataclass(frozen=True)
class DenseOperator:
    """A dense operator together with a label identifying its role."""

    matrix: np.ndarray
    label: str

    def __post_init__(self):
        dim = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("DenseOperator must wrap a square matrix")
        if dim & (dim - 1) != 0:
            raise ValueError(f"dimension {dim} is not a power of two")


def discrete_operator(kind: str, grid: SpacetimeGrid | None = None, values=None) -> DenseOperator:
    """Build one of the named dense operators on the spatial register.

    ``shift_plus``/``shift_minus``/``laplacian``/``first_derivative`` take the
    grid; ``diag_multiplier`` takes a complex vector of length 2**n_x.
    """
    if kind == "diag_multiplier":
        if values is None:
            raise ValueError("diag_multiplier requires a vector of values")
        values = np.asarray(values)
        if grid is not None and values.shape != (grid.num_x,):
            raise ValueError(
                f"diag_multiplier vector has length {values.shape[0]}, expected {grid.num_x}"
            )
        return DenseOperator(diag_multiplier(values), "diag_multiplier")
    if grid is None:
        raise ValueError(f"{kind} requires a grid")
    if kind == "shift_plus":
        return DenseOperator(shift_plus(grid.n_x), "shift_plus")
    if kind == "shift_minus":
        return DenseOperator(shift_minus(grid.n_x), "shift_minus")
    if kind == "laplacian":
        return DenseOperator(laplacian(grid.n_x, grid.dx), "laplacian")
    if kind == "first_derivative":
        return DenseOperator(first_derivative(grid.n_x, grid.dx), "first_derivative")
    raise ValueError(f"unknown operator kind {kind!r}")
