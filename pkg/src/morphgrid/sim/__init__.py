"""Geometrically nonlinear beam-network solver (corotational, energy-based)."""

import jax

jax.config.update("jax_enable_x64", True)

from .element import element_energy  # noqa: E402,F401
from .solver import (  # noqa: E402,F401
    DeformedState,
    SolverConfig,
    SystemArrays,
    build_system,
    residual,
    solve_static,
    state_from_dict,
    state_to_dict,
    tangent,
    total_potential,
)
from .sequence import (  # noqa: E402,F401
    SimulationResult,
    export_state_json,
    export_state_obj,
    sequential_simulate,
)
