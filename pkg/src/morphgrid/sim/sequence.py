"""Two-stage triggering simulation.

Stage A ramps the release drive and gravity together at instantaneous
stiffness: shrinkage is released, the network curls against its own weight.
Stage B holds the released eigenstrains exactly as they are — no further
drive — and relaxes the stiffness to the long-term moduli with gravity still
acting, capturing the sag the structure settles into after triggering.
Stage B warm-starts from the stage-A equilibrium.

With zero gravity the two stages coincide for statically determinate
networks: the frozen drive keeps every element's stress-free shape fixed, so
the stage-A equilibrium stays an equilibrium under any stiffness rescaling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from ..errors import NonConvergence
from ..grid import BeamMesh, GridDesign, MeshConfig, assign_eigenstrains, mesh_design
from ..materials import MaterialCard
from .element import P_EPS, P_KAPPA
from .solver import (
    DeformedState,
    SolverConfig,
    SystemArrays,
    build_system,
    solve_static,
    state_to_dict,
)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Outcome of the sequential simulation of one design."""

    mesh: BeamMesh              # instantaneous-resolved mesh (geometry + sections)
    system: SystemArrays        # stage-A arrays (connectivity for rendering/export)
    stage_a: DeformedState
    stage_b: DeformedState

    @property
    def states(self) -> dict[str, DeformedState]:
        return {"a": self.stage_a, "b": self.stage_b}


def sequential_simulate(design: GridDesign, cards: Mapping[str, MaterialCard],
                        mesh_config: MeshConfig = MeshConfig(),
                        solver_config: SolverConfig = SolverConfig()) -> SimulationResult:
    """Mesh, resolve, and run both stages of the triggering simulation."""
    mesh = mesh_design(design, mesh_config)

    mesh_inst = assign_eigenstrains(mesh, cards, "instantaneous")
    system_a = build_system(mesh_inst)
    config_a = replace(solver_config, stiffness_regime="instantaneous")
    state_a = solve_static(system_a, config_a)

    mesh_long = assign_eigenstrains(mesh, cards, "long_term")
    system_long = build_system(mesh_long)
    props_b = system_long.props.copy()
    props_b[:, P_EPS] = system_a.props[:, P_EPS]
    props_b[:, P_KAPPA] = system_a.props[:, P_KAPPA]
    system_b = replace(system_long, props=props_b)
    config_b = replace(solver_config, stiffness_regime="long_term")
    try:
        state_b = solve_static(system_b, config_b, init=state_a)
    except NonConvergence:
        state_b = solve_static(system_b, config_b)

    return SimulationResult(mesh=mesh_inst, system=system_a,
                            stage_a=state_a, stage_b=state_b)


def export_state_json(state: DeformedState) -> str:
    """Deterministic JSON document for a deformed state."""
    return json.dumps(state_to_dict(state), sort_keys=True, indent=2) + "\n"


def export_state_obj(state: DeformedState, system: SystemArrays) -> str:
    """Wavefront OBJ polyline of the deformed centerlines."""
    lines = ["# deformed beam network"]
    for p in state.positions:
        lines.append(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    for i, j in np.asarray(system.ij):
        lines.append(f"l {i + 1} {j + 1}")
    return "\n".join(lines) + "\n"
