"""Section-level mechanics of a bi-layer bending unit.

A bending unit is a slender block whose actuated portion carries two bonded
layers: an actuator layer printed longitudinally (it shrinks on triggering)
over a constraint layer printed laterally (it only expands thermally).  The
shrinkage mismatch makes the free section adopt an eigencurvature; the
actuated portion of the unit becomes a circular arc and the rest stays
straight.  This module integrates layered cross-sections, linearizes layer
moduli at the released state, and evaluates the closed-form triggered shape
used both directly and as the oracle for the beam-network solver.

Sign conventions: layers stack in list order along the local +z axis; a
positive eigencurvature curls the unit toward +z (toward the last layer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .errors import OutOfCalibrationRange
from .materials import (
    MaterialCard,
    SECANT_STRESS_FRACTION,
    loading_secant_modulus,
    long_term_modulus_fraction,
    recoverable_strain,
    unloading_secant_modulus,
)

if TYPE_CHECKING:  # pragma: no cover
    from .grid import BendingUnitSpec


@dataclass(frozen=True)
class Layer:
    """One lamina of a layered rectangular section."""

    thickness: float
    width: float
    tangent_modulus: float
    eigenstrain: float = 0.0
    density: float = 0.0
    poisson: float = 0.38

    def __post_init__(self):
        if self.thickness <= 0 or self.width <= 0:
            raise ValueError("layer dimensions must be positive")
        if self.tangent_modulus <= 0:
            raise ValueError("tangent modulus must be positive")


@dataclass(frozen=True)
class LayeredSection:
    """Stack of layers along local +z, bottom first."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a section needs at least one layer")

    @property
    def total_thickness(self) -> float:
        return sum(l.thickness for l in self.layers)

    @property
    def mass_per_length(self) -> float:
        """kg/m per mm^2 inputs: layers carry density in kg/m^3, dims in mm."""
        return sum(l.density * l.thickness * l.width * 1e-6 for l in self.layers)


@dataclass(frozen=True)
class SectionResponse:
    """Free-section equilibrium state and stiffnesses of a layered section."""

    effective_eigenstrain: float
    eigencurvature: float
    axial_stiffness: float
    bending_stiffness: float
    bending_stiffness_inplane: float
    torsion_stiffness: float
    mass_per_length: float
    centroid_offset: float


def section_response(section: LayeredSection) -> SectionResponse:
    """Integrate a layered section: eigen state and stiffnesses.

    Solves the free-section equilibrium (zero axial force, zero moment about
    the modulus-weighted centroid) for the per-layer stress
    ``E_k (eps0 + kappa_formula * d - e_k)``; the returned eigencurvature is
    the geometric curl rate (positive toward +z), i.e. the negative of the
    strain-gradient solution.

    Torsional stiffness uses the thin-rectangle engineering approximation on
    the overall outline with a thickness-weighted mean shear modulus; it only
    matters for out-of-plane grid coupling and is documented as approximate.
    """
    t = np.array([l.thickness for l in section.layers])
    w = np.array([l.width for l in section.layers])
    e_mod = np.array([l.tangent_modulus for l in section.layers])
    eig = np.array([l.eigenstrain for l in section.layers])
    area = t * w
    z_top = np.cumsum(t)
    z_mid = z_top - t / 2

    ea = float(np.sum(e_mod * area))
    z_c = float(np.sum(e_mod * area * z_mid) / ea)
    d = z_mid - z_c
    ei = float(np.sum(e_mod * (w * t**3 / 12 + area * d**2)))
    eps0 = float(np.sum(e_mod * area * eig) / ea)
    kappa = -float(np.sum(e_mod * area * eig * d) / ei)

    ei_inplane = float(np.sum(e_mod * t * w**3 / 12))
    g_mean = float(np.sum(t * e_mod / (2 * (1 + np.array([l.poisson for l in section.layers]))))
                   / np.sum(t))
    b = float(max(w.max(), z_top[-1]))
    h = float(min(w.max(), z_top[-1]))
    j = b * h**3 * (1 / 3 - 0.21 * (h / b) * (1 - h**4 / (12 * b**4)))
    mass = section.mass_per_length
    return SectionResponse(
        effective_eigenstrain=eps0,
        eigencurvature=kappa,
        axial_stiffness=ea,
        bending_stiffness=ei,
        bending_stiffness_inplane=ei_inplane,
        torsion_stiffness=g_mean * j,
        mass_per_length=mass,
        centroid_offset=z_c - z_top[-1] / 2,
    )


def resultants_at(section: LayeredSection, eps0: float, kappa_geometric: float,
                  ) -> tuple[float, float]:
    """Axial force and centroid moment at a given strain/curl state.

    Used to audit the zero-resultant contract of :func:`section_response`.
    """
    t = np.array([l.thickness for l in section.layers])
    w = np.array([l.width for l in section.layers])
    e_mod = np.array([l.tangent_modulus for l in section.layers])
    eig = np.array([l.eigenstrain for l in section.layers])
    area = t * w
    z_mid = np.cumsum(t) - t / 2
    ea = float(np.sum(e_mod * area))
    z_c = float(np.sum(e_mod * area * z_mid) / ea)
    d = z_mid - z_c
    kappa = -kappa_geometric
    strain = eps0 + kappa * d - eig
    n = float(np.sum(e_mod * area * strain))
    m = float(np.sum(e_mod * area * strain * d) + kappa * np.sum(e_mod * w * t**3 / 12))
    return n, m


# --- section factories ---------------------------------------------------------


def _regime_factor(card: MaterialCard, regime: str) -> float:
    if regime == "long_term":
        return long_term_modulus_fraction(card)
    if regime == "instantaneous":
        return 1.0
    raise ValueError(f"unknown stiffness regime {regime!r}")


def bilayer_section(spec: "BendingUnitSpec", cards: Mapping[str, MaterialCard],
                    delta_t: float, regime: str = "instantaneous",
                    released: bool = True) -> LayeredSection:
    """Actuated-portion section: constraint layer below, actuator on top.

    The actuator layer is linearized with the secant modulus of its selected
    unloading curve near full release; the constraint layer with the loading
    secant at the matching stress level.  ``released=False`` zeroes the
    release eigenstrain (thermal expansion only), used for un-triggered
    previews.
    """
    act = cards[spec.actuator_material]
    con = cards[spec.constraint_material]
    shrink = recoverable_strain(act, spec.sigma0) if released else 0.0
    e_act = unloading_secant_modulus(act, spec.sigma0) * _regime_factor(act, regime)
    e_con = loading_secant_modulus(con, SECANT_STRESS_FRACTION * spec.sigma0) \
        * _regime_factor(con, regime)
    t_con = spec.total_thickness - spec.actuator_thickness
    return LayeredSection(layers=(
        Layer(thickness=t_con, width=spec.width, tangent_modulus=e_con,
              eigenstrain=con.alpha_t * delta_t, density=con.density, poisson=con.poisson),
        Layer(thickness=spec.actuator_thickness, width=spec.width, tangent_modulus=e_act,
              eigenstrain=-shrink + act.alpha_t * delta_t, density=act.density,
              poisson=act.poisson),
    ))


def plain_section(spec: "BendingUnitSpec", cards: Mapping[str, MaterialCard],
                  delta_t: float, regime: str = "instantaneous") -> LayeredSection:
    """Non-actuated portion: uniform constraint material, full thickness."""
    con = cards[spec.constraint_material]
    e_con = loading_secant_modulus(con, SECANT_STRESS_FRACTION * spec.sigma0) \
        * _regime_factor(con, regime)
    return LayeredSection(layers=(
        Layer(thickness=spec.total_thickness, width=spec.width, tangent_modulus=e_con,
              eigenstrain=con.alpha_t * delta_t, density=con.density, poisson=con.poisson),
    ))


# --- closed-form unit shape ------------------------------------------------------


@dataclass(frozen=True)
class UnitShape:
    """Planar arc chain: (arc length, geometric curvature) per region.

    Arc lengths are deformed lengths (axial eigenstrain applied); the chain
    starts at ``start_point`` heading along ``start_tangent``.
    """

    arcs: tuple[tuple[float, float], ...]
    start_point: tuple[float, float] = (0.0, 0.0)
    start_tangent: float = 0.0  # angle from +x, radians

    def __post_init__(self):
        if any(not (math.isfinite(s) and math.isfinite(k)) or s < 0
               for s, k in self.arcs):
            raise ValueError("arc lengths must be finite and non-negative")

    @property
    def total_length(self) -> float:
        return sum(s for s, _ in self.arcs)

    def trace(self) -> list[tuple[float, float]]:
        """Endpoint of every arc, starting with the chain start point."""
        x, y = self.start_point
        theta = self.start_tangent
        pts = [(x, y)]
        for s, k in self.arcs:
            if abs(k) < 1e-14:
                x += s * math.cos(theta)
                y += s * math.sin(theta)
            else:
                turn = k * s
                chord = 2.0 / k * math.sin(turn / 2.0)
                x += chord * math.cos(theta + turn / 2.0)
                y += chord * math.sin(theta + turn / 2.0)
                theta += turn
            pts.append((x, y))
        return pts


def shape_from_response(spec: "BendingUnitSpec", actuated: SectionResponse | None,
                        plain_strain: float) -> UnitShape:
    """Arc chain for a unit given its actuated-section response.

    The actuated portion becomes a circular arc: its undeformed length
    ``actuator_ratio * length`` turns through the section eigencurvature
    (rotation per undeformed length) while contracting by the effective
    axial eigenstrain.  The remainder stays straight at ``plain_strain``.
    """
    arcs: list[tuple[float, float]] = []
    l_act = spec.actuator_ratio * spec.length
    l_plain = spec.length - l_act
    if l_act > 0:
        if actuated is None:
            raise ValueError("actuated response required when actuator_ratio > 0")
        turn = actuated.eigencurvature * l_act
        s_def = l_act * (1.0 + actuated.effective_eigenstrain)
        curvature = turn / s_def if s_def > 0 else 0.0
        arcs.append((s_def, curvature))
    if l_plain > 0:
        arcs.append((l_plain * (1.0 + plain_strain), 0.0))
    return UnitShape(arcs=tuple(arcs))


def unit_shape(spec: "BendingUnitSpec", cards: Mapping[str, MaterialCard],
               delta_t: float, regime: str = "instantaneous") -> UnitShape:
    """Closed-form triggered shape of one bending unit."""
    resp = None
    if spec.actuator_ratio > 0:
        resp = section_response(bilayer_section(spec, cards, delta_t, regime))
    con = cards[spec.constraint_material]
    return shape_from_response(spec, resp, con.alpha_t * delta_t)


def end_distance(shape: UnitShape) -> float:
    """Euclidean chord between the chain's first and last points."""
    pts = shape.trace()
    (x0, y0), (x1, y1) = pts[0], pts[-1]
    return math.hypot(x1 - x0, y1 - y0)
