"""Coarse-to-fine ansatz expansion with step-profile initialisation and
staged unfreezing.

Expansion adds one time qubit at the top of the wire stack and one space
qubit at the bottom (both the new finest-scale bits of their registers,
which is what the reversed-space layout makes possible).  The coarse
blocks land unchanged inside the fine brickwall, whose layers start with
the odd column; the brand-new blocks are initialised to the identity
except for the last rotation triple on each new wire, which is set to the
Euler angles of a Hadamard.  Each coarse amplitude then fans out equally
onto the four children of the new qubits: the "step" profile.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import objective, optimize
from .circuits import HADAMARD_EULER, Ansatz, build_brickwall
from .fkham import PdeProblem
from .lattice import InitialProfile, SpacetimeGrid

NEW_BLOCK_INITS = ("step", "zero", "random")


@dataclass(frozen=True)
class ExpansionPlan:
    coarse_ansatz: Ansatz
    coarse_params: np.ndarray
    fine_ansatz: Ansatz
    initial_params: np.ndarray
    new_block_indices: tuple  # indices into fine_ansatz.blocks
    stage_groups: tuple  # per optimisation stage: tuple of unfrozen block indices


def _block_key(block):
    return (block.layer, block.column, block.wires[0])


def expand(coarse_ansatz: Ansatz, coarse_params, new_block_init: str = "step",
           rng_seed: int = 0) -> ExpansionPlan:
    """Embed a converged coarse circuit into the (n+2)-wire fine ansatz."""
    if coarse_ansatz.ordering != "reversed_space":
        raise ValueError("expansion requires the reversed_space ordering")
    if coarse_ansatz.family != "brickwall" or coarse_ansatz.r != 2:
        raise ValueError("expansion requires the brickwall ansatz with r=2 blocks")
    if new_block_init not in NEW_BLOCK_INITS:
        raise ValueError(f"unknown new_block_init {new_block_init!r}")
    coarse_params = np.asarray(coarse_params, dtype=float)
    if coarse_params.shape != (coarse_ansatz.param_count,):
        raise ValueError("coarse parameter vector has the wrong length")

    n_fine = coarse_ansatz.n_qubits + 2
    fine = build_brickwall(
        n_fine,
        coarse_ansatz.layers,
        r=2,
        ordering="reversed_space",
        n_t=coarse_ansatz.n_t + 1,
        start_parity=1,
    )
    params = np.zeros(fine.param_count)

    fine_by_key = {_block_key(b): b for b in fine.blocks}
    embedded = set()
    for block in coarse_ansatz.blocks:
        target = fine_by_key[(block.layer, block.column, block.wires[0] + 1)]
        params[slice(*target.param_range)] = coarse_params[slice(*block.param_range)]
        embedded.add(_block_key(target))

    new_blocks = tuple(
        i for i, b in enumerate(fine.blocks) if _block_key(b) not in embedded
    )
    rng = np.random.default_rng(rng_seed)
    for i in new_blocks:
        block = fine.blocks[i]
        if new_block_init == "random":
            params[slice(*block.param_range)] = rng.uniform(0, 2 * np.pi, 12)
        # "zero" keeps zeros everywhere; "step" adds the Hadamard triples below
    if new_block_init == "step":
        last_layer = coarse_ansatz.layers - 1
        for i in new_blocks:
            block = fine.blocks[i]
            if block.layer != last_layer:
                continue
            start = block.param_range[0]
            if block.wires[0] == 0:  # new time wire on top: second-half top triple
                params[start + 6 : start + 9] = HADAMARD_EULER
            if block.wires[1] == n_fine - 1:  # new space wire at the bottom
                params[start + 9 : start + 12] = HADAMARD_EULER

    stage_groups = _stage_groups(fine, new_blocks)
    return ExpansionPlan(coarse_ansatz, coarse_params, fine, params, new_blocks, stage_groups)


def _stage_groups(fine: Ansatz, new_blocks) -> tuple:
    """Unfreeze schedule: new + adjacent-wire blocks, then the next wire pair
    inward, then everything."""
    n = fine.n_qubits

    def blocks_touching(wires):
        out = []
        for i, b in enumerate(fine.blocks):
            if set(b.wires) & wires:
                out.append(i)
        return set(out)

    stage1 = set(new_blocks) | blocks_touching({0, 1, n - 2, n - 1})
    stage2 = stage1 | blocks_touching({2, n - 3})
    stage3 = set(range(len(fine.blocks)))
    return (tuple(sorted(stage1)), tuple(sorted(stage2)), tuple(sorted(stage3)))


def free_parameter_indices(ansatz: Ansatz, block_indices) -> np.ndarray:
    idx = []
    for i in block_indices:
        block = ansatz.blocks[i]
        idx.extend(range(*block.param_range))
    return np.asarray(sorted(idx), dtype=int)


def masked_objective(fns: objective.ObjectiveFns, base_params, free_idx):
    """Cost/gradient in the subspace of unfrozen parameters."""
    base = np.asarray(base_params, dtype=float).copy()

    def unpack(sub):
        full = base.copy()
        full[free_idx] = sub
        return full

    def cost_fn(sub):
        return fns.cost(unpack(sub))

    def grad_fn(sub):
        return fns.grad(unpack(sub))[free_idx]

    return cost_fn, grad_fn, unpack


def staged_optimize(
    problem: PdeProblem,
    plan: ExpansionPlan,
    stage_budgets=None,
    mode: str = "self_consistent",
    linearization: str = "slice_real",
):
    """Quasi-Newton optimisation with the plan's staged unfreezing.

    Frozen parameters are bit-identical before and after each stage.
    """
    ansatz = plan.fine_ansatz
    if stage_budgets is None:
        total = optimize.default_steps(ansatz.n_qubits)
        stage_budgets = (total // 3,) * 3
    if len(stage_budgets) != len(plan.stage_groups):
        raise ValueError("one budget per stage required")
    params = plan.initial_params.copy()
    fns = objective.make_objective(ansatz, problem, mode=mode, linearization=linearization)
    stages = []
    for k, (group, budget) in enumerate(zip(plan.stage_groups, stage_budgets)):
        free_idx = free_parameter_indices(ansatz, group)
        cost_fn, grad_fn, unpack = masked_objective(fns, params, free_idx)
        stage = optimize.quasi_newton(
            cost_fn, grad_fn, params[free_idx], budget, label=f"multigrid-stage{k + 1}"
        )
        params = unpack(stage.params)
        stages.append(stage)
    report = objective.cost(params, ansatz, problem, mode=mode, linearization=linearization)
    return optimize.OptimRun(-1, plan.initial_params, tuple(stages), params, report)


def shifted_profile_for_refinement(profile: InitialProfile, fine_grid: SpacetimeGrid,
                                   shift_fraction: float = 0.5) -> InitialProfile:
    """Offset the profile by `shift_fraction` of a fine-grid spacing so the
    piecewise-constant step profile straddles the smooth curve."""
    if profile.kind == "custom":
        raise ValueError("x_offset is undefined for custom sample profiles")
    return dataclasses.replace(profile, x_offset=profile.x_offset + shift_fraction * fine_grid.dx)
