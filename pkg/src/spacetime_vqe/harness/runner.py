"""Experiment orchestration: run a validated config, write a deterministic
artifact tree (config snapshot, CSV traces and matrices, JSON summary)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import multigrid as mg
from .. import objective, optimize, qnpu, reference, spectral
from ..circuits import apply_circuit, count_resources
from ..fkham import (PdeProblem, assemble_hamiltonian, extract_solution,
                     history_state, rescale_constant)
from ..lattice import SpacetimeGrid
from . import config as config_mod
from .config import ExperimentConfig

FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Shot sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotSample:
    counts: np.ndarray  # per spacetime basis index
    shots: int
    seed: int
    reconstruction: np.ndarray  # |f_hat| from counts, (num_x, num_t)


def shot_sample(state, shots: int, seed: int, problem: PdeProblem) -> ShotSample:
    """Multinomial draw from |psi|^2 with magnitude-only reconstruction
    f_hat = M sqrt(count/shots); signs are unrecoverable from sampling."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    state = np.asarray(state, dtype=complex)
    probs = np.abs(state) ** 2
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    grid = problem.grid
    _, norm = problem.initial_samples()
    m = rescale_constant(state, norm, grid)
    reconstruction = m * np.sqrt(counts / shots).reshape(grid.num_x, grid.num_t)
    return ShotSample(counts, shots, seed, reconstruction)


# ---------------------------------------------------------------------------
# Artifact helpers (all output deterministic: no timestamps, fixed float fmt)
# ---------------------------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(FLOAT_FMT % cell)
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _write_matrix(path: Path, matrix) -> None:
    matrix = np.asarray(matrix)
    lines = [",".join(FLOAT_FMT % v for v in row) for row in matrix]
    path.write_text("\n".join(lines) + "\n")


def _write_state(path: Path, state) -> None:
    rows = [(i, float(np.real(a)), float(np.imag(a))) for i, a in enumerate(state)]
    _write_csv(path, ["index", "real", "imag"], rows)


def _write_summary(path: Path, summary: dict) -> None:
    path.write_text(json.dumps(summary, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON-serialisable: {type(value)}")


def _trace_rows(runs):
    rows = []
    for run in runs:
        for stage in run.stages:
            for i, cost in enumerate(stage.costs):
                rows.append((run.seed, stage.label, i, float(cost)))
    return rows


# ---------------------------------------------------------------------------
# Experiment kinds
# ---------------------------------------------------------------------------


def run(config: ExperimentConfig, output_dir=None, seed_override=None, jobs: int = 1) -> Path:
    """Execute one experiment; returns the artifact directory."""
    out = Path(output_dir or config.outputs.get("directory", "runs/experiment"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(config_mod.config_to_yaml(config))
    try:
        handler = _HANDLERS[config.kind]
    except KeyError:
        raise config_mod.ConfigError(f"no handler for kind {config.kind!r}")
    summary = handler(config, out, seed_override, jobs)
    summary["kind"] = config.kind
    _write_summary(out / "summary.json", summary)
    return out


def _solve_core(config, out, seed_override, jobs, tag=""):
    problem = config.build_problem()
    ansatz = config.build_ansatz(problem)
    schedule = config.build_schedule(problem)
    offset = 0 if seed_override is None else int(seed_override)
    result = optimize.run_protocol(
        problem, schedule, ansatz, config.seeds, config.mode, config.linearization,
        seed_offset=offset, jobs=jobs,
    )
    best = result.best
    state = apply_circuit(ansatz, best.final_params)
    ref = reference.integrate_reference(problem)
    infid = reference.infidelity(state, ref)
    prefix = f"{tag}_" if tag else ""
    _write_csv(out / f"{prefix}traces.csv", ["seed", "stage", "iteration", "cost"],
               _trace_rows(result.runs))
    _write_state(out / f"{prefix}best_state.csv", state)
    _write_matrix(out / f"{prefix}solution.csv", extract_solution(state, problem))
    _write_matrix(out / f"{prefix}reference.csv", ref.values)
    summary = {
        "best_seed": best.seed,
        "cost": best.final_cost,
        "breakdown": {
            "c0_term": best.final_report.c0_term,
            "c1": best.final_report.c1,
            "c2": best.final_report.c2,
            "c3_term": best.final_report.c3_term,
        },
        "rescale": best.final_report.rescale,
        "infidelity": infid,
        "iterations": best.total_iterations,
        "seeds": config.seeds,
        "per_seed_cost": {str(r.seed): r.final_cost for r in result.runs},
        "resources": count_resources(ansatz),
    }
    if config.protocol.get("normalize_by_gap"):
        bundle = assemble_hamiltonian(problem, state=state, linearization=config.linearization)
        values, _ = spectral.dense_eigs(bundle.hamiltonian, k=2)
        summary["e1"] = float(values[1])
        summary["cost_over_e1"] = best.final_cost / float(values[1])
    return summary, problem, ansatz, result


def _run_solve(config, out, seed_override, jobs):
    summary, _, _, _ = _solve_core(config, out, seed_override, jobs)
    return summary


def _run_sample(config, out, seed_override, jobs):
    summary, problem, ansatz, result = _solve_core(config, out, seed_override, jobs)
    state = apply_circuit(ansatz, result.best.final_params)
    shots = int(config.sampler.get("shots", 25_000))
    seed = int(config.sampler.get("seed", 0) if seed_override is None else seed_override)
    sample = shot_sample(state, shots, seed, problem)
    _write_csv(out / "counts.csv", ["index", "count"],
               [(i, int(c)) for i, c in enumerate(sample.counts)])
    _write_matrix(out / "reconstruction.csv", sample.reconstruction)
    summary.update({"shots": shots, "sampler_seed": seed})
    return summary


def _run_depth_sweep(config, out, seed_override, jobs):
    problem = config.build_problem()
    sweep = config.extra.get("sweep", {})
    layers_list = sweep.get("layers", [2, 3, 4, 5, 6, 7, 8])
    qmps_r = sweep.get("qmps_r", [1, 2, 3])
    orderings = sweep.get("orderings", ["sequential", "reversed_space"])
    families = sweep.get("families", ["brickwall", "qmps"])
    rows = []
    offset = 0 if seed_override is None else int(seed_override)
    for family in families:
        for ordering in orderings:
            variants = layers_list if family == "brickwall" else qmps_r
            for depth_param in variants:
                if family == "brickwall":
                    ansatz = config.build_ansatz(problem, family="brickwall",
                                                 layers=int(depth_param), ordering=ordering)
                else:
                    ansatz = config.build_ansatz(problem, family="qmps",
                                                 r=int(depth_param), ordering=ordering)
                schedule = config.build_schedule(problem)
                result = optimize.run_protocol(
                    problem, schedule, ansatz, config.seeds, config.mode,
                    config.linearization, seed_offset=offset, jobs=jobs,
                )
                res = count_resources(ansatz)
                for run_ in result.runs:
                    rows.append((
                        family, ordering, depth_param, res["cnot_count"],
                        float(res["reported_depth"]), run_.seed, run_.final_cost,
                    ))
    _write_csv(out / "depth_sweep.csv",
               ["family", "ordering", "depth_param", "cnots", "reported_depth", "seed", "cost"],
               rows)
    return {"rows": len(rows)}


def _run_scaling(config, out, seed_override, jobs):
    runs_spec = config.extra.get("runs", [])
    rows = []
    summaries = {}
    for entry in runs_spec:
        label = entry.get("label") or f"{entry['n_x']}x{entry['n_t']}"
        sub = config_mod.make_config(
            "solve",
            problem={**config.problem, **{k: entry[k] for k in ("n_x", "n_t", "dt") if k in entry},
                     **entry.get("problem", {})},
            ansatz={**config.ansatz, **entry.get("ansatz", {})},
            protocol={**config.protocol, **entry.get("protocol", {})},
        )
        sub_summary, problem, ansatz, result = _solve_core(sub, out, seed_override, jobs, tag=label)
        summaries[label] = sub_summary
        rows.append((label, problem.grid.n_x, problem.grid.n_t, ansatz.param_count,
                     sub_summary["cost"], sub_summary["infidelity"]))
    _write_csv(out / "scaling.csv",
               ["label", "n_x", "n_t", "parameters", "cost", "infidelity"], rows)
    return {"runs": summaries}


def _run_multigrid(config, out, seed_override, jobs):
    coarse_problem = config.build_problem()
    mg_spec = config.extra.get("multigrid", {})
    grid = coarse_problem.grid
    fine_grid = SpacetimeGrid(grid.n_x + 1, grid.n_t + 1, grid.domain_length, grid.dt / 2)
    if mg_spec.get("shift_profile", True):
        profile = mg.shifted_profile_for_refinement(coarse_problem.profile, fine_grid)
        coarse_problem = coarse_problem.replace(profile=profile)
    fine_problem = coarse_problem.replace(grid=fine_grid)

    coarse_ansatz = config.build_ansatz(coarse_problem, r=2)
    schedule = config.build_schedule(coarse_problem)
    offset = 0 if seed_override is None else int(seed_override)
    coarse_result = optimize.run_protocol(
        coarse_problem, schedule, coarse_ansatz, config.seeds, config.mode,
        config.linearization, seed_offset=offset, jobs=jobs,
    )
    coarse_best = coarse_result.best

    init_costs = {}
    plans = {}
    for style in mg.NEW_BLOCK_INITS:
        plan = mg.expand(coarse_ansatz, coarse_best.final_params, new_block_init=style)
        plans[style] = plan
        report = objective.cost(plan.initial_params, plan.fine_ansatz, fine_problem,
                                mode=config.mode, linearization=config.linearization)
        init_costs[style] = report.total
    # median over random re-draws of the new blocks
    random_costs = []
    for k in range(20):
        plan = mg.expand(coarse_ansatz, coarse_best.final_params,
                         new_block_init="random", rng_seed=k)
        random_costs.append(
            objective.cost(plan.initial_params, plan.fine_ansatz, fine_problem,
                           mode=config.mode, linearization=config.linearization).total
        )
    init_costs["random_median"] = float(np.median(random_costs))

    budgets = mg_spec.get("stage_budgets")
    staged = mg.staged_optimize(fine_problem, plans["step"],
                                tuple(budgets) if budgets else None,
                                mode=config.mode, linearization=config.linearization)

    rows = []
    for stage in staged.stages:
        for i, cost in enumerate(stage.costs):
            rows.append(("staged", stage.label, i, float(cost)))
    direct_summary = None
    if mg_spec.get("direct_comparison", True):
        fine_ansatz = config.build_ansatz(fine_problem, r=2)
        fine_schedule = config.build_schedule(fine_problem)
        direct = optimize.run_protocol(
            fine_problem, fine_schedule, fine_ansatz, config.seeds, config.mode,
            config.linearization, seed_offset=offset, jobs=jobs,
        )
        for stage in direct.best.stages:
            for i, cost in enumerate(stage.costs):
                rows.append(("direct", stage.label, i, float(cost)))
        direct_summary = {
            "cost": direct.best.final_cost,
            "iterations": direct.best.total_iterations,
        }
    _write_csv(out / "multigrid_traces.csv", ["method", "stage", "iteration", "cost"], rows)
    summary = {
        "coarse_cost": coarse_best.final_cost,
        "init_costs": init_costs,
        "staged_cost": staged.final_cost,
        "staged_iterations": staged.total_iterations,
    }
    if direct_summary:
        summary["direct"] = direct_summary
    return summary


def _run_spectral(config, out, seed_override, jobs):
    problem = config.build_problem()
    spec = config.extra.get("spectral", {})
    dts = spec.get("dts", [0.05, 0.1, 0.2])
    gap_nts = spec.get("gap_n_t", [2, 3, 4, 5])
    max_steps = int(spec.get("max_steps", 200_000))
    seed = 0 if seed_override is None else int(seed_override)
    grid = problem.grid

    stability_rows = []
    ite_rows = []
    for dt in dts:
        check = spectral.stability_check(problem.diffusion, problem.beta, dt, grid.dx)
        stability_rows.append((dt, int(check["stable"]), check["margin"], check["dt_max"]))
        p = problem.replace(grid=SpacetimeGrid(grid.n_x, grid.n_t, grid.domain_length, dt))
        result = spectral.ite_ground(p, spectral.IteConfig(max_steps=max_steps, seed=seed,
                                                           target=spec.get("target", 1e-12)))
        ite_rows.append((dt, result.energy, int(result.converged), int(result.unstable),
                         int(result.unphysical), result.steps))
    _write_csv(out / "stability.csv", ["dt", "stable", "margin", "dt_max"], stability_rows)
    _write_csv(out / "ite_ground.csv",
               ["dt", "energy", "converged", "unstable", "unphysical", "steps"], ite_rows)

    gap_rows = spectral.gap_scan(
        problem, gap_nts,
        spectral.IteConfig(max_steps=max_steps, seed=seed,
                           residual_target=spec.get("residual_target", 1e-8)),
    )
    _write_csv(out / "gap_scan.csv", ["n_t", "e1", "converged", "residual"],
               [(r["n_t"], r["e1"], int(r["converged"]), r["residual"]) for r in gap_rows])
    return {
        "stability": [dict(zip(("dt", "stable", "margin", "dt_max"), r)) for r in stability_rows],
        "ite": [dict(zip(("dt", "energy", "converged", "unstable", "unphysical", "steps"), r))
                for r in ite_rows],
        "gap_scan": gap_rows,
    }


def _run_qnpu_verify(config, out, seed_override, jobs):
    problem = config.build_problem()
    if problem.taylor_order != 1:
        problem = problem.replace(taylor_order=1)
    ansatz = config.build_ansatz(problem)
    spec = config.extra.get("qnpu", {})
    trials = int(spec.get("trials", 20))
    seed = 0 if seed_override is None else int(seed_override)
    rng = np.random.default_rng(seed)
    family = qnpu.compile_family(problem, order=1)
    rows = []
    worst = 0.0
    for trial in range(trials):
        params = rng.uniform(0, 2 * np.pi, ansatz.param_count)
        rep = qnpu.evaluate_family(family, ansatz, params)
        state = apply_circuit(ansatz, params)
        bundle = assemble_hamiltonian(problem, state=state, linearization="slice_amplitude")
        dense = bundle.expectation(state) + problem.c3 * objective.real_penalty(state)
        diff = abs(rep.total - dense)
        worst = max(worst, diff)
        rows.append((trial, rep.total, dense, diff))
    _write_csv(out / "equivalence.csv", ["trial", "family_cost", "dense_cost", "abs_diff"], rows)
    qnpu.export_family(family, out / "circuits", ansatz,
                       rng.uniform(0, 2 * np.pi, ansatz.param_count))
    report = qnpu.resource_report(family, ansatz)
    (out / "resources.json").write_text(
        json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n")
    truncated = qnpu.compile_family(problem, order=1, truncated=True)
    return {
        "family_size": len(family),
        "truncated_size": len(truncated),
        "worst_abs_diff": worst,
        "trials": trials,
    }


def _run_gradient_variance(config, out, seed_override, jobs):
    spec = config.extra.get("study", {})
    sizes = spec.get("sizes", [6, 8, 10])
    layers = int(spec.get("layers", config.ansatz.get("layers", 3)))
    seeds = int(spec.get("seeds", 20))
    base = config.problem

    def problem_for_size(n_qubits):
        half = n_qubits // 2
        sub = dict(base)
        sub.update({"n_x": half, "n_t": n_qubits - half})
        return config_mod.make_config("solve", problem=sub).build_problem()

    def ansatz_for_size(n_qubits):
        problem = problem_for_size(n_qubits)
        return config.build_ansatz(problem, layers=layers)

    rows = optimize.gradient_variance_study(
        problem_for_size, ansatz_for_size, sizes, seeds=seeds,
        steps_for_size=lambda n: int(spec.get("steps", optimize.default_steps(n))),
        mode=config.mode,
    )
    _write_csv(out / "gradient_variance.csv",
               ["n_qubits", "stage", "statistic", "parameter_count"],
               [(r["n_qubits"], r["stage"], r["statistic"], r["parameter_count"]) for r in rows])
    return {"rows": rows}


_HANDLERS = {
    "solve": _run_solve,
    "sample": _run_sample,
    "depth_sweep": _run_depth_sweep,
    "scaling": _run_scaling,
    "multigrid": _run_multigrid,
    "spectral": _run_spectral,
    "qnpu_verify": _run_qnpu_verify,
    "gradient_variance": _run_gradient_variance,
}
