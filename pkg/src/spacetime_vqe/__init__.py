"""Variational spacetime ground-state solver for diffusion/Burgers dynamics.

Time-dependent (non)linear PDEs are discretised onto a space register plus
a clock (time) register; the solution at all times is the zero-energy
ground state of a clock-register Hamiltonian, found by optimising
parameterised circuits on a noiseless statevector simulator.  The package
also compiles and verifies the Hadamard-test measurement-circuit family
that would evaluate the same cost on hardware.
"""

from . import (circuits, fkham, lattice, multigrid, objective, optimize,
               qnpu, reference, spectral)
from .circuits import Ansatz, apply_circuit, build_brickwall, build_qmps, count_resources
from .fkham import (HamiltonianBundle, PdeProblem, assemble_hamiltonian,
                    extract_solution, history_state, rescale_constant)
from .lattice import InitialProfile, SpacetimeGrid, build_grid, sample_profile
from .objective import CostReport, cost, gradient, make_objective
from .optimize import (OptimRun, RampSchedule, adam, burgers_schedule,
                       diffusion_schedule, gradient_variance_study,
                       quasi_newton, run_protocol)
from .spectral import dense_eigs, gap_scan, ite_excited, ite_ground, stability_check

__all__ = [
    "Ansatz",
    "CostReport",
    "HamiltonianBundle",
    "InitialProfile",
    "OptimRun",
    "PdeProblem",
    "RampSchedule",
    "SpacetimeGrid",
    "adam",
    "apply_circuit",
    "assemble_hamiltonian",
    "build_brickwall",
    "build_grid",
    "build_qmps",
    "burgers_schedule",
    "circuits",
    "cost",
    "count_resources",
    "dense_eigs",
    "diffusion_schedule",
    "extract_solution",
    "fkham",
    "gap_scan",
    "gradient",
    "gradient_variance_study",
    "history_state",
    "ite_excited",
    "ite_ground",
    "lattice",
    "make_objective",
    "multigrid",
    "objective",
    "optimize",
    "qnpu",
    "quasi_newton",
    "reference",
    "rescale_constant",
    "run_protocol",
    "sample_profile",
    "spectral",
    "stability_check",
]
