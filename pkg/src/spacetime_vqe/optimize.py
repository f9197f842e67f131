"""Adam, bounded-memory quasi-Newton, the coefficient-ramping protocol, and
the gradient-variance (barren plateau) study.

The protocol starts from uniform random angles, runs Adam on an easy
configuration (small diffusion constant, or the linear beta = 0 problem) and
then ramps the coefficient up in steps, polishing with L-BFGS-B in between.
Each quasi-Newton stage stops when the cost decrease between successive
iterations drops below ten times machine precision, or at its iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import objective
from .circuits import Ansatz
from .fkham import PdeProblem

FTOL = 10 * np.finfo(float).eps

ADAM_DEFAULTS = {"learning_rate": 0.01, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}


@dataclass(frozen=True)
class OptimStage:
    label: str
    optimizer: str
    params: np.ndarray
    costs: np.ndarray  # cost after each accepted iteration (costs[0] = initial)
    iterations: int
    converged: bool
    message: str = ""


@dataclass(frozen=True)
class OptimRun:
    seed: int
    initial_params: np.ndarray
    stages: tuple
    final_params: np.ndarray
    final_report: objective.CostReport

    @property
    def final_cost(self) -> float:
        return self.final_report.total

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.stages)

    def trace_rows(self):
        """(stage_label, iteration, cost) rows for CSV export."""
        rows = []
        for stage in self.stages:
            for i, c in enumerate(stage.costs):
                rows.append((stage.label, i, c))
        return rows


def adam(
    cost_fn,
    grad_fn,
    params0,
    steps: int,
    learning_rate: float = ADAM_DEFAULTS["learning_rate"],
    beta1: float = ADAM_DEFAULTS["beta1"],
    beta2: float = ADAM_DEFAULTS["beta2"],
    eps: float = ADAM_DEFAULTS["eps"],
    label: str = "adam",
) -> OptimStage:
    """Standard Adam with bias correction."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    params = np.asarray(params0, dtype=float).copy()
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    costs = [cost_fn(params)]
    if not np.isfinite(costs[0]):
        return OptimStage(label, "adam", params, np.asarray(costs), 0, False, "non-finite initial cost")
    for t in range(1, steps + 1):
        g = grad_fn(params)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g**2
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        params = params - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        c = cost_fn(params)
        if not np.isfinite(c):
            return OptimStage(label, "adam", params, np.asarray(costs), t - 1, False, "non-finite cost; stage aborted")
        costs.append(c)
    return OptimStage(label, "adam", params, np.asarray(costs), steps, True)


def quasi_newton(
    cost_fn,
    grad_fn,
    params0,
    max_iter: int,
    ftol: float = FTOL,
    memory: int = 10,
    label: str = "quasi_newton",
) -> OptimStage:
    """Limited-memory BFGS descent with line search (scipy L-BFGS-B, unbounded)."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    params0 = np.asarray(params0, dtype=float)
    costs = [cost_fn(params0)]

    def callback(xk):
        costs.append(cost_fn(xk))

    result = scipy.optimize.minimize(
        cost_fn,
        params0,
        jac=grad_fn,
        method="L-BFGS-B",
        callback=callback,
        options={"maxiter": max_iter, "ftol": ftol, "gtol": 0.0, "maxcor": memory},
    )
    line_search_failed = "ABNORMAL" in str(result.message).upper()
    converged = bool(result.success) or not line_search_failed
    message = "" if converged else f"line search failed: {result.message}"
    return OptimStage(
        label,
        "quasi_newton",
        np.asarray(result.x, dtype=float),
        np.asarray(costs),
        int(result.nit),
        converged,
        message,
    )


@dataclass(frozen=True)
class RampStage:
    assignments: tuple  # (("diffusion", 0.125), ...) applied to the problem
    optimizer: str  # "adam" | "quasi_newton"
    max_iterations: int

    def apply(self, problem: PdeProblem) -> PdeProblem:
        return problem.replace(**dict(self.assignments))


@dataclass(frozen=True)
class RampSchedule:
    stages: tuple

    def __post_init__(self):
        if not self.stages:
            raise ValueError("schedule needs at least one stage")
        if self.stages[0].optimizer != "adam":
            raise ValueError("the first (easy-configuration) stage must use adam")
        for stage in self.stages[1:]:
            if stage.optimizer != "quasi_newton":
                raise ValueError("later stages must use quasi_newton")


def default_steps(n_qubits: int) -> int:
    """Per-stage iteration budget: 2500 at 6 qubits, doubling per 2 qubits."""
    return 2500 * 2 ** build_budget_exponent(n_qubits)


def build_budget_exponent(n_qubits: int) -> int:
    return max(0, (n_qubits - 6 + 1) // 2)


def diffusion_schedule(d_final: float = 1.0, steps: int = 2500) -> RampSchedule:
    """Ramp the diffusion constant through 1/8, 1/4, 1/2, 1 of its target."""
    fractions = (0.125, 0.25, 0.5, 1.0)
    stages = [RampStage((("diffusion", fractions[0] * d_final),), "adam", steps)]
    for frac in fractions[1:]:
        stages.append(RampStage((("diffusion", frac * d_final),), "quasi_newton", steps))
    return RampSchedule(tuple(stages))


def burgers_schedule(beta_final: float = 1.0, steps: int = 2500) -> RampSchedule:
    """Start linear (beta = 0) and ramp beta through 1/8, 1/4, 1/2, 1."""
    stages = [RampStage((("beta", 0.0),), "adam", steps)]
    for frac in (0.125, 0.25, 0.5, 1.0):
        stages.append(RampStage((("beta", frac * beta_final),), "quasi_newton", steps))
    return RampSchedule(tuple(stages))


def random_init(seed: int, param_count: int) -> np.ndarray:
    """Uniform angles in [0, 2 pi), seeded."""
    return np.random.default_rng(seed).uniform(0.0, 2 * np.pi, param_count)


def _run_stage(stage: RampStage, cost_fn, grad_fn, params, label):
    if stage.optimizer == "adam":
        return adam(cost_fn, grad_fn, params, stage.max_iterations, label=label)
    return quasi_newton(cost_fn, grad_fn, params, stage.max_iterations, label=label)


def run_single(
    problem_template: PdeProblem,
    schedule: RampSchedule,
    ansatz: Ansatz,
    seed: int,
    mode: str = "self_consistent",
    linearization: str = "slice_real",
) -> OptimRun:
    params0 = random_init(seed, ansatz.param_count)
    params = params0.copy()
    stages = []
    problem = problem_template
    for k, stage in enumerate(schedule.stages):
        problem = stage.apply(problem_template)
        cost_fn, grad_fn = objective.make_objective(ansatz, problem, mode=mode, linearization=linearization)
        label = f"stage{k}:" + ",".join(f"{n}={v:g}" for n, v in stage.assignments)
        result = _run_stage(stage, cost_fn, grad_fn, params, label)
        stages.append(result)
        params = result.params
    report = objective.cost(params, ansatz, problem, mode=mode, linearization=linearization)
    return OptimRun(seed, params0, tuple(stages), params, report)


@dataclass(frozen=True)
class ProtocolResult:
    runs: tuple
    best: OptimRun


def run_protocol(
    problem_template: PdeProblem,
    schedule: RampSchedule,
    ansatz: Ansatz,
    seeds: int = 20,
    mode: str = "self_consistent",
    linearization: str = "slice_real",
    seed_offset: int = 0,
    jobs: int = 1,
) -> ProtocolResult:
    """Run the ramp protocol for `seeds` random initialisations; the run with
    the lowest final cost wins.  Seeds are independent; `jobs` > 1 runs them
    on a thread pool (results stay keyed by seed, so aggregation is
    order-independent)."""
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    seed_list = [seed_offset + s for s in range(seeds)]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = tuple(
                pool.map(
                    lambda s: run_single(problem_template, schedule, ansatz, s, mode, linearization),
                    seed_list,
                )
            )
    else:
        runs = tuple(
            run_single(problem_template, schedule, ansatz, s, mode, linearization)
            for s in seed_list
        )
    best = min(runs, key=lambda r: r.final_cost)
    return ProtocolResult(runs, best)


def gradient_variance_study(
    problem_for_size,
    ansatz_for_size,
    sizes,
    seeds: int = 20,
    ramp_fractions=(0.125, 0.25, 0.5),
    steps_for_size=default_steps,
    mode: str = "self_consistent",
):
    """std(||grad||) / sqrt(P) over random seeds, per size and protocol stage.

    Stage "random_init" evaluates the gradient of the first-ramp-value cost
    at fresh random angles.  Stage "after_ramp" runs the protocol through the
    ramp values before the final one (Adam first, then quasi-Newton) and
    evaluates the gradient of the final-coefficient cost at the resulting
    parameters.  `problem_for_size(n_qubits)` must return the
    final-coefficient problem; the ramp scales its diffusion constant.
    """
    rows = []
    for n_qubits in sizes:
        problem = problem_for_size(n_qubits)
        ansatz = ansatz_for_size(n_qubits)
        steps = steps_for_size(n_qubits)
        d_final = problem.diffusion

        first = problem.replace(diffusion=ramp_fractions[0] * d_final)
        grad_norms = {"random_init": [], "after_ramp": []}
        for seed in range(seeds):
            params = random_init(seed, ansatz.param_count)
            g = objective.gradient(params, ansatz, first, mode=mode)
            grad_norms["random_init"].append(np.linalg.norm(g))

            for k, frac in enumerate(ramp_fractions):
                stage_problem = problem.replace(diffusion=frac * d_final)
                cost_fn, grad_fn = objective.make_objective(ansatz, stage_problem, mode=mode)
                if k == 0:
                    params = adam(cost_fn, grad_fn, params, steps).params
                else:
                    params = quasi_newton(cost_fn, grad_fn, params, steps).params
            g = objective.gradient(params, ansatz, problem, mode=mode)
            grad_norms["after_ramp"].append(np.linalg.norm(g))

        for stage, norms in grad_norms.items():
            rows.append(
                {
                    "n_qubits": n_qubits,
                    "stage": stage,
                    "statistic": float(np.std(norms) / np.sqrt(ansatz.param_count)),
                    "parameter_count": ansatz.param_count,
                }
            )
    return rows
