"""Scalar cost <H>, exact gradients, the real-value penalty, and the
Pauli-string benchmark path.

Two evaluation modes:

* ``self_consistent`` -- the pointwise factor inside the generator is rebuilt
  from the circuit state on every call (per-slice rule of
  :mod:`spacetime_vqe.fkham`); for beta = 0 this coincides with frozen mode.
* ``frozen`` -- the caller supplies the linearisation values and H stays
  fixed.

Gradients are exact (reverse-mode through the circuit and, in
self-consistent mode, through the state dependence of H).  The
``grad_style="frozen_h"`` variant treats the relinearised H as a constant of
the current iterate; both variants vanish at an exact solution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _engine
from .circuits import Ansatz
from .fkham import LINEARIZATIONS, PdeProblem

MODES = ("self_consistent", "frozen")


@dataclass(frozen=True)
class CostReport:
    total: float
    c0_term: float  # c0 * <C0>
    c1: float
    c2: float
    c3_term: float  # c3 * <C3>
    rescale: float
    mode: str
    linearization: str

    def breakdown_consistent(self, tol: float = 1e-12) -> bool:
        return abs(self.total - (self.c0_term + self.c1 - self.c2 + self.c3_term)) <= tol


def _check_inputs(params, ansatz, mode, linearization):
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.param_count,):
        raise ValueError(f"expected {ansatz.param_count} parameters, got shape {params.shape}")
    if not np.all(np.isfinite(params)):
        raise ValueError("non-finite entries in the parameter vector")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if linearization not in LINEARIZATIONS:
        raise ValueError(f"unknown linearization {linearization!r}")
    return params


def _diagnose_nonfinite(report_values) -> str:
    names = ("total", "c0 term", "C1", "C2", "C3 term", "rescale constant")
    for name, value in zip(names, report_values):
        if not np.isfinite(float(value)):
            return name
    return "total"


def cost(
    params,
    ansatz: Ansatz,
    problem: PdeProblem,
    mode: str = "self_consistent",
    f_values=None,
    linearization: str = "slice_real",
) -> CostReport:
    """Evaluate <H> with its C0/C1/C2/C3 breakdown and the rescale constant."""
    params = _check_inputs(params, ansatz, mode, linearization)
    if mode == "frozen" or problem.beta == 0.0:
        if mode == "frozen" and problem.beta != 0.0 and f_values is None:
            raise ValueError("frozen mode with beta > 0 requires f_values")
        t_stack = _engine.fixed_t_stack(problem, f_values)
        _, _, report_fn = _engine.fixed_kernels(ansatz, problem)
        values = report_fn(params, t_stack)
    else:
        _, _, report_fn = _engine.self_consistent_kernels(ansatz, problem, linearization, "full")
        values = report_fn(params)
    values = tuple(float(v) for v in values)
    if not all(np.isfinite(values)):
        raise FloatingPointError(f"non-finite cost evaluation; first bad intermediate: {_diagnose_nonfinite(values)}")
    total, c0_term, c1, c2, c3_term, rescale = values
    return CostReport(total, c0_term, c1, c2, c3_term, rescale, mode, linearization)


def cost_value(params, ansatz, problem, mode="self_consistent", f_values=None, linearization="slice_real") -> float:
    return cost(params, ansatz, problem, mode, f_values, linearization).total


def gradient(
    params,
    ansatz: Ansatz,
    problem: PdeProblem,
    mode: str = "self_consistent",
    f_values=None,
    linearization: str = "slice_real",
    grad_style: str = "full",
) -> np.ndarray:
    """Exact gradient of the cost as a function of the parameters."""
    _, g = value_and_gradient(params, ansatz, problem, mode, f_values, linearization, grad_style)
    return g


def value_and_gradient(
    params,
    ansatz: Ansatz,
    problem: PdeProblem,
    mode: str = "self_consistent",
    f_values=None,
    linearization: str = "slice_real",
    grad_style: str = "full",
):
    params = _check_inputs(params, ansatz, mode, linearization)
    if grad_style not in ("full", "frozen_h"):
        raise ValueError(f"unknown grad_style {grad_style!r}")
    if mode == "frozen" or problem.beta == 0.0:
        t_stack = _engine.fixed_t_stack(problem, f_values if mode == "frozen" else None)
        _, vg, _ = _engine.fixed_kernels(ansatz, problem)
        value, grad = vg(params, t_stack)
    else:
        _, vg, _ = _engine.self_consistent_kernels(ansatz, problem, linearization, grad_style)
        value, grad = vg(params)
    value = float(value)
    grad = np.asarray(grad, dtype=float)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite value/gradient evaluation")
    return value, grad


class ObjectiveFns:
    """cost/grad closures sharing one fused, memoised kernel evaluation.

    Unpacks as ``cost_fn, grad_fn = make_objective(...)``; the optimisers
    use the fused ``value_and_grad`` directly when available.
    """

    def __init__(self, fused, param_count: int):
        self._fused = fused
        self._param_count = param_count
        self._memo: dict[bytes, tuple] = {}

    def value_and_grad(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape != (self._param_count,):
            raise ValueError(f"expected {self._param_count} parameters, got shape {params.shape}")
        key = params.tobytes()
        hit = self._memo.get(key)
        if hit is None:
            value, grad = self._fused(params)
            hit = (float(value), np.asarray(grad, dtype=float))
            if not np.isfinite(hit[0]) or not np.all(np.isfinite(hit[1])):
                raise FloatingPointError("non-finite value/gradient evaluation")
            if len(self._memo) > 8:
                self._memo.clear()
            self._memo[key] = hit
        return hit

    def cost(self, params) -> float:
        return self.value_and_grad(params)[0]

    def grad(self, params) -> np.ndarray:
        return self.value_and_grad(params)[1]

    def __iter__(self):
        yield self.cost
        yield self.grad


def make_objective(
    ansatz: Ansatz,
    problem: PdeProblem,
    mode: str = "self_consistent",
    f_values=None,
    linearization: str = "slice_real",
    grad_style: str = "full",
) -> ObjectiveFns:
    """Build (cost_fn, grad_fn) closures for the optimisers.

    Kernel lookup and propagator-stack construction happen once, here, so
    the returned closures only pay for the jitted evaluation itself.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if linearization not in LINEARIZATIONS:
        raise ValueError(f"unknown linearization {linearization!r}")
    if grad_style not in ("full", "frozen_h"):
        raise ValueError(f"unknown grad_style {grad_style!r}")
    if mode == "frozen" or problem.beta == 0.0:
        if mode == "frozen" and problem.beta != 0.0 and f_values is None:
            raise ValueError("frozen mode with beta > 0 requires f_values")
        t_stack = _engine.fixed_t_stack(problem, f_values if mode == "frozen" else None)
        _, vg, _ = _engine.fixed_kernels(ansatz, problem)
        fused = lambda p: vg(p, t_stack)  # noqa: E731
    else:
        _, vg, _ = _engine.self_consistent_kernels(ansatz, problem, linearization, grad_style)
        fused = vg
    return ObjectiveFns(fused, ansatz.param_count)


def real_penalty(state) -> float:
    """1 - Re(sum_i psi_i^2); zero exactly for real states."""
    state = np.asarray(state, dtype=complex)
    return float(1.0 - np.real(np.sum(state * state)))


def finite_difference_gradient(cost_fn, params, h: float = 1e-5) -> np.ndarray:
    """Central-difference oracle used by the gradient tests."""
    params = np.asarray(params, dtype=float)
    out = np.empty_like(params)
    for k in range(params.size):
        up = params.copy()
        dn = params.copy()
        up[k] += h
        dn[k] -= h
        out[k] = (cost_fn(up) - cost_fn(dn)) / (2 * h)
    return out


# ---------------------------------------------------------------------------
# Pauli-string benchmark path (small registers only)
# ---------------------------------------------------------------------------

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_PAULI_QUBITS = 6


@dataclass(frozen=True)
class PauliTerm:
    coefficient: complex
    string: str


def _pauli_matrix(string: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for ch in string:
        out = np.kron(out, _PAULI[ch])
    return out


def pauli_decompose(matrix: np.ndarray, tol: float = 1e-12) -> list:
    """Coefficients c_P = Tr(P^dag M) / 2^n over all n-qubit Pauli strings.

    The string count grows as 4^n, so this path is capped at
    MAX_PAULI_QUBITS qubits and exists as a benchmark/cross-check only.
    """
    matrix = np.asarray(matrix)
    dim = matrix.shape[0]
    n = int(np.log2(dim))
    if 2**n != dim or matrix.shape != (dim, dim):
        raise ValueError("matrix dimension must be a power of two")
    if n > MAX_PAULI_QUBITS:
        raise ValueError(
            f"{n} qubits would need 4**{n} Pauli strings; the decomposition "
            f"scales exponentially and is capped at {MAX_PAULI_QUBITS} qubits"
        )
    terms = []
    for labels in itertools.product("IXYZ", repeat=n):
        string = "".join(labels)
        p = _pauli_matrix(string)
        coeff = np.trace(p.conj().T @ matrix) / dim
        if abs(coeff) > tol:
            terms.append(PauliTerm(complex(coeff), string))
    return terms


def pauli_reconstruct(terms, n: int) -> np.ndarray:
    out = np.zeros((2**n, 2**n), dtype=complex)
    for term in terms:
        out += term.coefficient * _pauli_matrix(term.string)
    return out


def expectation_via_paulis(terms, state) -> float:
    """<state| sum_P c_P P |state> accumulated term by term."""
    state = np.asarray(state, dtype=complex)
    total = 0.0 + 0j
    for term in terms:
        total += term.coefficient * np.vdot(state, _pauli_matrix(term.string) @ state)
    return float(np.real(total))
