"""Static equilibrium of a resolved beam mesh.

Newton's method on the total potential (elastic energy minus gravity work),
with incremental load stepping — eigenstrain drive and gravity scale together
with the load factor — and a backtracking line search.  Node rotations live
on SO(3): each Newton update is applied multiplicatively with the full
exponential map, while gradients and Hessians come from the element energy
differentiated at the current configuration (see :mod:`.element`).

Fixed nodes are clamped in all six degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.linalg
from scipy.spatial.transform import Rotation

from ..errors import NonConvergence, SingularStiffness
from ..grid import BeamMesh
from .element import N_PROPS, P_EPS, P_KAPPA, energy_batch, grad_batch, hessian_batch

STATE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SolverConfig:
    load_steps: int = 20
    newton_tol: float = 1e-6
    max_newton_iter: int = 50
    line_search: bool = True
    stiffness_regime: str = "instantaneous"

    def __post_init__(self):
        if self.load_steps < 1:
            raise ValueError("load_steps must be >= 1")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.stiffness_regime not in ("instantaneous", "long_term"):
            raise ValueError(f"unknown stiffness regime {self.stiffness_regime!r}")


@dataclass(frozen=True, eq=False)
class SystemArrays:
    """Flat numeric view of a resolved mesh, ready for assembly."""

    node_ids: tuple[str, ...]
    x0: np.ndarray          # (n, 3) reference positions, mm
    fixed: np.ndarray       # (n,) bool
    ij: np.ndarray          # (nel, 2) int node indices
    frames: np.ndarray      # (nel, 3, 3) reference triads
    props: np.ndarray       # (nel, N_PROPS)
    f_gravity: np.ndarray   # (n, 3) dead load, N

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.repeat(~self.fixed, 6)
        return np.flatnonzero(mask)


def build_system(mesh: BeamMesh) -> SystemArrays:
    """Extract solver arrays from a material-resolved mesh."""
    if not mesh.resolved:
        raise ValueError("mesh has unresolved elements; run assign_eigenstrains first")
    nel = len(mesh.elements)
    ij = np.zeros((nel, 2), dtype=np.int64)
    frames = np.zeros((nel, 3, 3))
    props = np.zeros((nel, N_PROPS))
    f_gravity = np.zeros((mesh.n_nodes, 3))
    g_vec = np.asarray(mesh.gravity, dtype=float)
    for k, el in enumerate(mesh.elements):
        r = el.response
        ij[k] = (el.node_i, el.node_j)
        frames[k] = el.frame
        props[k] = (
            el.length,
            r.axial_stiffness,
            r.bending_stiffness,
            r.bending_stiffness_inplane,
            r.torsion_stiffness,
            r.effective_eigenstrain,
            r.eigencurvature,
        )
        half_weight = 0.5 * r.mass_per_length * el.length * 1e-3 * g_vec  # kg * m/s^2
        f_gravity[el.node_i] += half_weight
        f_gravity[el.node_j] += half_weight
    return SystemArrays(
        node_ids=mesh.node_ids,
        x0=np.array(mesh.positions, dtype=float),
        fixed=np.array(mesh.fixed, dtype=bool),
        ij=ij,
        frames=frames,
        props=props,
        f_gravity=f_gravity,
    )


def _scaled_props(system: SystemArrays, load_factor: float) -> np.ndarray:
    props = system.props.copy()
    props[:, P_EPS] *= load_factor
    props[:, P_KAPPA] *= load_factor
    return props


def _element_inputs(system: SystemArrays, positions: np.ndarray, rotations: np.ndarray,
                    props: np.ndarray):
    i, j = system.ij[:, 0], system.ij[:, 1]
    w = np.zeros((len(system.ij), 12))
    return (w, positions[i], positions[j], rotations[i], rotations[j],
            system.frames, props)


def total_potential(system: SystemArrays, positions: np.ndarray, rotations: np.ndarray,
                    load_factor: float) -> float:
    """Elastic energy minus gravity work, N·mm."""
    props = _scaled_props(system, load_factor)
    elastic = float(np.sum(np.asarray(
        energy_batch(*_element_inputs(system, positions, rotations, props)))))
    work = load_factor * float(np.sum(system.f_gravity * (positions - system.x0)))
    return elastic - work


def residual(system: SystemArrays, positions: np.ndarray, rotations: np.ndarray,
             load_factor: float) -> np.ndarray:
    """Gradient of the total potential, (6n,) — forces then moments per node."""
    props = _scaled_props(system, load_factor)
    ge = np.asarray(grad_batch(*_element_inputs(system, positions, rotations, props)))
    g = np.zeros((system.n_nodes, 6))
    np.add.at(g, system.ij[:, 0], ge[:, 0:6])
    np.add.at(g, system.ij[:, 1], ge[:, 6:12])
    g[:, 0:3] -= load_factor * system.f_gravity
    return g.ravel()


def tangent(system: SystemArrays, positions: np.ndarray, rotations: np.ndarray,
            load_factor: float) -> np.ndarray:
    """Hessian of the total potential, dense (6n, 6n)."""
    props = _scaled_props(system, load_factor)
    he = np.asarray(hessian_batch(*_element_inputs(system, positions, rotations, props)))
    ndof = 6 * system.n_nodes
    k = np.zeros((ndof, ndof))
    dofs = np.concatenate([
        6 * system.ij[:, :1] + np.arange(6),
        6 * system.ij[:, 1:2] + np.arange(6),
    ], axis=1)  # (nel, 12)
    rows = np.repeat(dofs[:, :, None], 12, axis=2)
    cols = np.repeat(dofs[:, None, :], 12, axis=1)
    np.add.at(k, (rows.ravel(), cols.ravel()), he.ravel())
    return k


@dataclass(frozen=True, eq=False)
class DeformedState:
    """Equilibrium configuration of a beam mesh."""

    node_ids: tuple[str, ...]
    positions: np.ndarray            # (n, 3) mm
    rotations: np.ndarray            # (n, 3, 3)
    reference_positions: np.ndarray  # (n, 3) mm
    load_factor: float
    newton_iterations: tuple[int, ...] = field(default_factory=tuple)
    energy: float = 0.0

    @property
    def displacements(self) -> np.ndarray:
        return self.positions - self.reference_positions

    def position_of(self, node_id: str) -> np.ndarray:
        return self.positions[self.node_ids.index(node_id)]


def _apply_update(positions, rotations, delta, alpha):
    d = (alpha * delta).reshape(-1, 6)
    new_pos = positions + d[:, 0:3]
    spin = Rotation.from_rotvec(d[:, 3:6]).as_matrix()
    return new_pos, spin @ rotations


def solve_static(system: SystemArrays, config: SolverConfig = SolverConfig(),
                 init: DeformedState | None = None,
                 load_factors: Iterable[float] | None = None,
                 on_accept: Callable[[int, int, np.ndarray, np.ndarray, float], None]
                 | None = None) -> DeformedState:
    """Ramp the drive and gravity to full scale and converge each step.

    ``init`` warm-starts from a previous state (its node ids must match), in
    which case the default schedule is a single full-load step.
    ``on_accept`` is invoked after every accepted Newton update with
    ``(step_index, iteration, positions, rotations, load_factor)`` — purely
    for convergence instrumentation.

    Raises
    ------
    NonConvergence
        A load step exceeded the Newton iteration budget.
    SingularStiffness
        The reduced tangent could not be factorized.
    """
    if init is not None:
        if init.node_ids != system.node_ids:
            raise ValueError("warm-start state does not match the mesh")
        positions = np.array(init.positions, dtype=float)
        rotations = np.array(init.rotations, dtype=float)
        default_schedule = [1.0]
    else:
        positions = np.array(system.x0, dtype=float)
        rotations = np.broadcast_to(np.eye(3), (system.n_nodes, 3, 3)).copy()
        default_schedule = list(np.linspace(1.0 / config.load_steps, 1.0,
                                            config.load_steps))
    schedule = list(load_factors) if load_factors is not None else default_schedule
    free = system.free_dofs
    if free.size == 0:
        raise ValueError("all nodes are fixed; nothing to solve")

    iterations_per_step: list[int] = []
    for step_index, lam in enumerate(schedule):
        r = residual(system, positions, rotations, lam)
        ref = max(1.0, float(np.max(np.abs(r[free]))))
        tol = config.newton_tol * ref
        converged = float(np.max(np.abs(r[free]))) <= config.newton_tol
        iters = 0
        while not converged:
            if iters >= config.max_newton_iter:
                raise NonConvergence(step=step_index, iteration=iters,
                                     residual=float(np.max(np.abs(r[free]))))
            k = tangent(system, positions, rotations, lam)
            kff = k[np.ix_(free, free)]
            if not np.all(np.isfinite(kff)):
                raise SingularStiffness("tangent contains non-finite entries")
            try:
                d_free = scipy.linalg.solve(kff, -r[free], assume_a="sym")
            except (scipy.linalg.LinAlgError, ValueError) as exc:
                raise SingularStiffness(str(exc)) from exc
            if not np.all(np.isfinite(d_free)):
                raise SingularStiffness("singular reduced tangent")
            delta = np.zeros(6 * system.n_nodes)
            delta[free] = d_free

            alpha = 1.0
            if config.line_search:
                base = total_potential(system, positions, rotations, lam)
                slope = float(r[free] @ d_free)
                for _ in range(40):
                    trial_pos, trial_rot = _apply_update(positions, rotations, delta, alpha)
                    trial = total_potential(system, trial_pos, trial_rot, lam)
                    if trial <= base + 1e-4 * alpha * slope:
                        break
                    alpha *= 0.5
            positions, rotations = _apply_update(positions, rotations, delta, alpha)
            r = residual(system, positions, rotations, lam)
            iters += 1
            if on_accept is not None:
                on_accept(step_index, iters, positions, rotations, lam)
            converged = float(np.max(np.abs(r[free]))) <= tol
        iterations_per_step.append(iters)

    return DeformedState(
        node_ids=system.node_ids,
        positions=positions,
        rotations=rotations,
        reference_positions=np.array(system.x0, dtype=float),
        load_factor=schedule[-1] if schedule else 0.0,
        newton_iterations=tuple(iterations_per_step),
        energy=total_potential(system, positions, rotations,
                               schedule[-1] if schedule else 0.0),
    )


def state_to_dict(state: DeformedState) -> dict:
    return {
        "format_version": STATE_FORMAT_VERSION,
        "kind": "deformed_state",
        "load_factor": state.load_factor,
        "energy_nmm": state.energy,
        "newton_iterations": list(state.newton_iterations),
        "nodes": [
            {
                "id": nid,
                "position_mm": [float(c) for c in state.positions[i]],
                "reference_position_mm": [float(c) for c in state.reference_positions[i]],
                "rotation": [float(c) for c in state.rotations[i].ravel()],
            }
            for i, nid in enumerate(state.node_ids)
        ],
    }


def state_from_dict(doc: dict) -> DeformedState:
    """Rebuild a deformed state from its JSON document."""
    from ..errors import InvalidDocument

    try:
        if doc.get("kind") != "deformed_state":
            raise InvalidDocument("not a deformed state document")
        if doc.get("format_version") != STATE_FORMAT_VERSION:
            raise InvalidDocument(
                f"unsupported state format_version {doc.get('format_version')!r}"
            )
        nodes = doc["nodes"]
        return DeformedState(
            node_ids=tuple(str(n["id"]) for n in nodes),
            positions=np.array([n["position_mm"] for n in nodes], dtype=float),
            rotations=np.array(
                [np.reshape(n["rotation"], (3, 3)) for n in nodes], dtype=float),
            reference_positions=np.array(
                [n["reference_position_mm"] for n in nodes], dtype=float),
            load_factor=float(doc.get("load_factor", 1.0)),
            newton_iterations=tuple(int(k) for k in doc.get("newton_iterations", ())),
            energy=float(doc.get("energy_nmm", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDocument(f"malformed deformed state: {exc}") from exc
