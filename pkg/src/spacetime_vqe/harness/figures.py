"""Pre-baked configurations reproducing each figure's data at desk scale.

Every suite returns plot-ready CSV artifacts under the output directory.
`seeds`/`steps` overrides shrink the budgets for smoke runs; the defaults
are the published sizes.
"""

from __future__ import annotations

from pathlib import Path

from .config import make_config
from .runner import run

GAUSSIAN = {"kind": "gaussian"}
SINE_SHIFT2 = {"kind": "shifted_sine", "shift": 2.0}
SINE_SHIFT1 = {"kind": "shifted_sine", "shift": 1.0}

BURGERS_33 = {
    "n_x": 3, "n_t": 3, "dt": 0.05, "diffusion": 0.05, "beta": 1.0,
    "taylor_order": 2, "profile": GAUSSIAN,
}
DIFFUSION_33 = {
    "n_x": 3, "n_t": 3, "dt": 0.00625, "diffusion": 1.0, "beta": 0.0,
    "taylor_order": 2, "profile": SINE_SHIFT2,
}
DIFFUSION_33_UNIT = {**DIFFUSION_33, "profile": SINE_SHIFT1}


def _protocol(seeds, steps, **extra):
    out = dict(extra)
    if seeds is not None:
        out["seeds"] = seeds
    if steps is not None:
        out["steps"] = steps
    return out


def fig3(output_dir, seeds=20, steps=2500, shots=25_000):
    """Converged 3+3 solves plus shot-sampled reconstructions (the
    hardware-figure emulation: shot noise only, no device noise)."""
    out = Path(output_dir)
    paths = []
    paths.append(run(make_config(
        "sample",
        problem=BURGERS_33,
        ansatz={"family": "brickwall", "layers": 4, "ordering": "reversed_space"},
        protocol=_protocol(seeds, steps, schedule="burgers"),
        sampler={"shots": shots, "seed": 0},
    ), out / "burgers"))
    paths.append(run(make_config(
        "sample",
        problem=DIFFUSION_33,
        ansatz={"family": "brickwall", "layers": 3, "ordering": "reversed_space"},
        protocol=_protocol(seeds, steps, schedule="diffusion"),
        sampler={"shots": shots, "seed": 0},
    ), out / "diffusion"))
    return paths


def fig4(output_dir, seeds=20, steps=2500, layers=None, qmps_r=None):
    """Cost versus circuit depth at 3+3 for both ansatz families and both
    qubit orderings, both equations."""
    out = Path(output_dir)
    sweep = {}
    if layers is not None:
        sweep["layers"] = list(layers)
    if qmps_r is not None:
        sweep["qmps_r"] = list(qmps_r)
    paths = []
    for label, problem, schedule in (
        ("burgers", BURGERS_33, "burgers"),
        ("diffusion", DIFFUSION_33_UNIT, "diffusion"),
    ):
        paths.append(run(make_config(
            "depth_sweep",
            problem=problem,
            ansatz={"family": "brickwall"},
            protocol=_protocol(seeds, steps, schedule=schedule),
            extra={"sweep": sweep} if sweep else {},
        ), out / label))
    return paths


def fig5(output_dir, seeds=20, steps=None):
    """Diffusion scaling runs: 4+4 (dt=1/320, 4 layers) and 5+5 (dt=1/640,
    6 layers)."""
    cfg = make_config(
        "scaling",
        problem={**DIFFUSION_33_UNIT},
        ansatz={"family": "brickwall", "ordering": "reversed_space", "layers": 4},
        protocol=_protocol(seeds, None, schedule="diffusion", normalize_by_gap=True),
        extra={"runs": [
            {"label": "4x4", "n_x": 4, "n_t": 4, "dt": 1 / 320,
             "ansatz": {"layers": 4}, "protocol": {"steps": steps or 5000}},
            {"label": "5x5", "n_x": 5, "n_t": 5, "dt": 1 / 640,
             "ansatz": {"layers": 6}, "protocol": {"steps": steps or 10000}},
        ]},
    )
    return [run(cfg, Path(output_dir))]


def fig6(output_dir, seeds=20, steps=None, layers=(2, 3, 4, 5, 6, 7, 8)):
    """Gap-normalised cost against parameters/dimension for 6, 8, 10 qubits."""
    out = Path(output_dir)
    runs = []
    sizes = ((3, 3, 0.00625, 2500), (4, 4, 1 / 320, 5000), (5, 5, 1 / 640, 10000))
    for n_x, n_t, dt, default_steps in sizes:
        for n_layers in layers:
            runs.append({
                "label": f"{n_x}x{n_t}_L{n_layers}",
                "n_x": n_x, "n_t": n_t, "dt": dt,
                "ansatz": {"layers": n_layers},
                "protocol": {"steps": steps or default_steps},
            })
    cfg = make_config(
        "scaling",
        problem={**DIFFUSION_33_UNIT},
        ansatz={"family": "brickwall", "ordering": "reversed_space", "layers": 3},
        protocol=_protocol(seeds, None, schedule="diffusion", normalize_by_gap=True),
        extra={"runs": runs},
    )
    return [run(cfg, Path(out))]


def fig7(output_dir, seeds=20, steps=None, stage_budgets=None):
    """Multigrid study: expansion-initialisation costs and staged-vs-direct
    iteration comparison for diffusion 3+3 -> 4+4."""
    cfg = make_config(
        "multigrid",
        problem={**DIFFUSION_33_UNIT, "dt": 1 / 160, "diffusion": 1.0},
        ansatz={"family": "brickwall", "layers": 2, "ordering": "reversed_space"},
        protocol=_protocol(seeds, steps, schedule="diffusion"),
        extra={"multigrid": {
            "shift_profile": True,
            "direct_comparison": True,
            **({"stage_budgets": list(stage_budgets)} if stage_budgets else {}),
        }},
    )
    return [run(cfg, Path(output_dir))]


def fig9(output_dir, seeds=None, max_steps=200_000):
    """Stability/ITE table over dt in {0.05, 0.1, 0.2} and the E1 gap scan
    over the time-register size."""
    cfg = make_config(
        "spectral",
        problem=BURGERS_33,
        extra={"spectral": {"dts": [0.05, 0.1, 0.2], "gap_n_t": [2, 3, 4, 5],
                            "max_steps": max_steps}},
    )
    return [run(cfg, Path(output_dir))]


def fig10(output_dir, seeds=20, sizes=(6, 8, 10), layers=3, steps=None):
    """Gradient-variance (barren plateau) study for the diffusion problem."""
    extra = {"study": {"sizes": list(sizes), "layers": layers, "seeds": seeds}}
    if steps is not None:
        extra["study"]["steps"] = steps
    cfg = make_config(
        "gradient_variance",
        problem={**DIFFUSION_33_UNIT},
        ansatz={"family": "brickwall", "layers": layers, "ordering": "reversed_space"},
        extra=extra,
    )
    return [run(cfg, Path(output_dir))]


def fig13(output_dir, seeds=20, steps=2500, refinement=16):
    """Fine-grid discretisation-error comparison for both 3+3 problems."""
    from .. import reference
    from ..circuits import apply_circuit
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for label, problem_spec, layers, schedule in (
        ("diffusion", DIFFUSION_33, 3, "diffusion"),
        ("burgers", BURGERS_33, 4, "burgers"),
    ):
        cfg = make_config(
            "solve",
            problem=problem_spec,
            ansatz={"family": "brickwall", "layers": layers, "ordering": "reversed_space"},
            protocol=_protocol(seeds, steps, schedule=schedule),
        )
        run_dir = run(cfg, out / label)
        import json

        import numpy as np

        state_rows = np.loadtxt(run_dir / "best_state.csv", delimiter=",", skiprows=1)
        state = state_rows[:, 1] + 1j * state_rows[:, 2]
        problem = cfg.build_problem()
        report = reference.fine_grid_comparison(problem, refinement, state=state)
        (run_dir / "fine_grid.json").write_text(json.dumps({
            "refinement": report["refinement"],
            "discretisation_error": report["discretisation_error"],
            "variational_error": report["variational_error"],
        }, sort_keys=True, indent=2) + "\n")
        paths.append(run_dir)
    return paths


SUITES = {
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
    "fig7": fig7,
    "fig9": fig9,
    "fig10": fig10,
    "fig13": fig13,
}


def figure_suite(name: str, output_dir, **overrides):
    """Run one named figure suite; unknown names are rejected."""
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown figure suite {name!r}; known: {sorted(SUITES)}")
    return suite(output_dir, **overrides)
