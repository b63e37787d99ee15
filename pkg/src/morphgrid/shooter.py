"""Residual-stress identification by shooting.

The printed-in residual stress of the actuator material cannot be measured
directly; it is identified by matching simulated end distances of triggered
calibration units against measurements.  Because the unloading definition is
itself selected by the residual stress, every trial re-selects the material
curve before simulating — the identification and the material definition
converge together.  A frozen-curve mode (selection pinned at the span
midpoint) exists as the uncoupled baseline; it settles on a measurably
different stress.

The unknown is a single scalar shared by all observations in a batch.  The
root of the mean signed mismatch is found with a bisection-safeguarded
secant over the calibrated family span, which is the stationarity condition
of the least-squares distance fit when the per-observation sensitivities are
comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .dma import DmaCurve
from .errors import InsufficientData, NoBracket
from .grid import BendingUnitSpec, MeshConfig
from .materials import (
    MaterialCard,
    SECANT_STRESS_FRACTION,
    loading_secant_modulus,
    select_unloading_curve,
)
from .unit import (
    Layer,
    LayeredSection,
    end_distance,
    section_response,
    shape_from_response,
    unit_shape,
)

if TYPE_CHECKING:  # pragma: no cover
    from .sim.solver import SolverConfig

DEFAULT_REFERENCE_TEMPERATURE = 20.0


@dataclass(frozen=True)
class TriggeringObservation:
    """One measured calibration unit: ratio, end distance, geometry."""

    actuator_ratio: float
    measured_end_distance: float  # mm
    geometry: BendingUnitSpec
    temperature: float = 80.0  # degrees C at triggering

    def __post_init__(self):
        if not (0.0 <= self.actuator_ratio <= 1.0):
            raise ValueError("actuator_ratio must lie in [0, 1]")
        if not (0.0 < self.measured_end_distance <= 1.1 * self.geometry.length):
            raise ValueError(
                "measured_end_distance must be positive and at most 1.1 x unit length"
            )


@dataclass(frozen=True)
class ShooterConfig:
    tol_mm: float = 0.5          # max per-observation mismatch at convergence
    max_iter: int = 60           # trial budget (mismatch evaluations)
    frozen_curve: bool = False   # uncoupled baseline: no per-trial re-selection
    high_fidelity: bool = False  # simulate trials on the beam solver, with gravity
    reference_temperature: float = DEFAULT_REFERENCE_TEMPERATURE
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)
    mesh_config: MeshConfig = field(default_factory=MeshConfig)
    solver_config: "SolverConfig | None" = None

    def __post_init__(self):
        if self.tol_mm <= 0:
            raise ValueError("tol_mm must be positive")
        if self.max_iter < 3:
            raise ValueError("max_iter must allow at least three trials")
        if self.frozen_curve and self.high_fidelity:
            raise ValueError("frozen_curve mode is closed-form only")


@dataclass(frozen=True)
class ShooterResult:
    sigma0: float                # MPa
    residual: float              # mm, max per-observation mismatch at sigma0
    iterations: int              # mismatch evaluations spent
    history: tuple[tuple[float, float], ...]  # (sigma0 trial, mean simulated distance)
    converged: bool


def _trial_spec(obs: TriggeringObservation, sigma0: float) -> BendingUnitSpec:
    return replace(obs.geometry, actuator_ratio=obs.actuator_ratio, sigma0=sigma0)


def _frozen_response(spec: BendingUnitSpec, cards: Mapping[str, MaterialCard],
                     curve: DmaCurve, delta_t: float):
    """Actuated-section response when the unloading curve is pinned.

    The trial stress slides along the pinned curve: release shrinkage is the
    strain travelled from the trial stress down to the curve's anchor, and
    the actuator secant is taken over the final stress fraction of that
    range.  Trials above the pinned curve's peak saturate at the peak.
    """
    act = cards[spec.actuator_material]
    con = cards[spec.constraint_material]
    stress_up = curve.stress[::-1]
    strain_up = curve.strain[::-1]
    anchor = float(curve.strain[-1])
    shrink = max(float(np.interp(spec.sigma0, stress_up, strain_up)) - anchor, 0.0)
    target = SECANT_STRESS_FRACTION * spec.sigma0
    strain_at_target = float(np.interp(target, stress_up, strain_up))
    if target > 0 and strain_at_target > anchor:
        e_act = target / (strain_at_target - anchor)
    else:
        e_act = act.marlow.initial_tangent()
    e_con = loading_secant_modulus(con, SECANT_STRESS_FRACTION * spec.sigma0)
    t_con = spec.total_thickness - spec.actuator_thickness
    section = LayeredSection(layers=(
        Layer(thickness=t_con, width=spec.width, tangent_modulus=e_con,
              eigenstrain=con.alpha_t * delta_t, density=con.density, poisson=con.poisson),
        Layer(thickness=spec.actuator_thickness, width=spec.width, tangent_modulus=e_act,
              eigenstrain=-shrink + act.alpha_t * delta_t, density=act.density,
              poisson=act.poisson),
    ))
    return section_response(section)


def simulated_end_distance(obs: TriggeringObservation, sigma0: float,
                           cards: Mapping[str, MaterialCard],
                           config: ShooterConfig = ShooterConfig(),
                           frozen_curve: DmaCurve | None = None) -> float:
    """Forward model for one observation at a trial residual stress."""
    spec = _trial_spec(obs, sigma0)
    delta_t = obs.temperature - config.reference_temperature
    if config.high_fidelity:
        return _solver_end_distance(spec, cards, obs.temperature, config)
    con = cards[spec.constraint_material]
    if frozen_curve is not None and spec.actuator_ratio > 0:
        resp = _frozen_response(spec, cards, frozen_curve, delta_t)
        shape = shape_from_response(spec, resp, con.alpha_t * delta_t)
    else:
        shape = unit_shape(spec, cards, delta_t)
    return end_distance(shape)


def _solver_end_distance(spec: BendingUnitSpec, cards: Mapping[str, MaterialCard],
                         temperature: float, config: ShooterConfig) -> float:
    from .grid import GridDesign, GridMember, GridNode, MemberKind, assign_eigenstrains, mesh_design
    from .sim.solver import SolverConfig, build_system, solve_static

    design = GridDesign(
        nodes=(
            GridNode("root", (0.0, 0.0, 0.0), fixed=True),
            GridNode("tip", (spec.length, 0.0, 0.0)),
        ),
        members=(GridMember("unit", MemberKind.BENDING_UNIT, "root", "tip", spec),),
        trigger_temperature=temperature,
        reference_temperature=config.reference_temperature,
        gravity=config.gravity,
    )
    mesh = assign_eigenstrains(mesh_design(design, config.mesh_config), cards,
                               "instantaneous")
    solver_config = config.solver_config
    if solver_config is None:
        solver_config = SolverConfig()
    state = solve_static(build_system(mesh), solver_config)
    tip = state.position_of("tip")
    root = state.position_of("root")
    return float(np.linalg.norm(tip - root))


def mismatch(obs: TriggeringObservation, sigma0: float,
             cards: Mapping[str, MaterialCard],
             config: ShooterConfig = ShooterConfig()) -> float:
    """Signed simulated-minus-measured end distance, mm."""
    return simulated_end_distance(obs, sigma0, cards, config) - obs.measured_end_distance


def shoot_residual_stress(observations: list[TriggeringObservation],
                          cards: Mapping[str, MaterialCard],
                          config: ShooterConfig = ShooterConfig()) -> ShooterResult:
    """Identify the shared residual stress from triggering measurements.

    Runs a bisection-safeguarded secant for the root of the mean signed
    mismatch over the actuator card's calibrated span.  Converged when the
    largest per-observation mismatch drops below ``config.tol_mm``; when the
    trial budget runs out the best trial so far is returned flagged
    unconverged.

    Raises
    ------
    NoBracket
        The mean mismatch has the same sign at both ends of the span.
    InsufficientData
        No observations were given.
    """
    if not observations:
        raise InsufficientData("no triggering observations")
    actuator_names = {o.geometry.actuator_material for o in observations}
    if len(actuator_names) != 1:
        raise ValueError("all observations must share one actuator material")
    card = cards[actuator_names.pop()]
    lo, hi = card.unloading.span
    frozen = None
    if config.frozen_curve:
        frozen = select_unloading_curve(card.unloading, 0.5 * (lo + hi))

    history: list[tuple[float, float]] = []
    best: tuple[float, float, float] | None = None  # (max |mismatch|, sigma, mean mismatch)

    def evaluate(sigma: float) -> tuple[float, float]:
        nonlocal best
        distances = [
            simulated_end_distance(o, sigma, cards, config, frozen_curve=frozen)
            for o in observations
        ]
        residuals = [d - o.measured_end_distance for d, o in zip(distances, observations)]
        mean_mismatch = float(np.mean(residuals))
        worst = max(abs(r) for r in residuals)
        history.append((sigma, float(np.mean(distances))))
        if best is None or worst < best[0]:
            best = (worst, sigma, mean_mismatch)
        return mean_mismatch, worst

    def result(sigma: float, worst: float, converged: bool) -> ShooterResult:
        return ShooterResult(sigma0=sigma, residual=worst, iterations=len(history),
                             history=tuple(history), converged=converged)

    f_lo, w_lo = evaluate(lo)
    if w_lo < config.tol_mm:
        return result(lo, w_lo, True)
    f_hi, w_hi = evaluate(hi)
    if w_hi < config.tol_mm:
        return result(hi, w_hi, True)
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise NoBracket(
            f"mean mismatch has the same sign at both ends of the calibrated span "
            f"[{lo:.6g}, {hi:.6g}] MPa: {f_lo:+.3g} mm and {f_hi:+.3g} mm"
        )

    a, fa, b, fb = lo, f_lo, hi, f_hi
    prev, f_prev = a, fa
    cur, f_cur = b, fb
    while len(history) < config.max_iter:
        x = None
        if f_cur != f_prev:
            x = cur - f_cur * (cur - prev) / (f_cur - f_prev)
        if x is None or not (a < x < b):
            x = 0.5 * (a + b)
        fx, wx = evaluate(x)
        if wx < config.tol_mm:
            return result(x, wx, True)
        if math.copysign(1.0, fx) == math.copysign(1.0, fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        prev, f_prev = cur, f_cur
        cur, f_cur = x, fx
        if b - a < 1e-12:
            break

    worst, sigma, _ = best
    return result(sigma, worst, False)
