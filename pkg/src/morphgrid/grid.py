"""Design representation and beam-network meshing.

A design is a graph: nodes at positions (some fixed), members between them.
Members are bending units (bi-layer, with an actuator ratio) or joints
(uniform constraint material).  Meshing subdivides every member into beam
segments such that each unit's actuator/constraint transition lands exactly
on a segment boundary, then a second pass resolves each segment's layered
section and eigenstrain drive against a set of material cards.

Geometry is millimetres; gravity is m/s^2; temperatures degrees Celsius.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import DisconnectedGraph, InvalidDocument, NoFixedNode
from .materials import MaterialCard, loading_secant_modulus
from .unit import (
    Layer,
    LayeredSection,
    SectionResponse,
    bilayer_section,
    plain_section,
    section_response,
    _regime_factor,
)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class BendingUnitSpec:
    """Geometry and material layout of one bending unit."""

    length: float
    width: float
    total_thickness: float
    actuator_thickness: float
    actuator_ratio: float
    actuator_material: str
    constraint_material: str
    sigma0: float = 0.0
    orientation: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if min(self.length, self.width, self.total_thickness) <= 0:
            raise ValueError("unit dimensions must be positive")
        if not (0 < self.actuator_thickness < self.total_thickness):
            raise ValueError("actuator thickness must lie strictly inside the total")
        if not (0.0 <= self.actuator_ratio <= 1.0):
            raise ValueError("actuator_ratio must lie in [0, 1]")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be >= 0")
        v = np.asarray(self.orientation, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm < 1e-12:
            raise ValueError("orientation must be a nonzero vector")
        object.__setattr__(self, "orientation", tuple(float(c) for c in v / norm))


@dataclass(frozen=True)
class JointSpec:
    """Uniform constraint-material connector between grid nodes."""

    width: float
    thickness: float
    material: str

    def __post_init__(self):
        if self.width <= 0 or self.thickness <= 0:
            raise ValueError("joint dimensions must be positive")


class MemberKind(str, enum.Enum):
    BENDING_UNIT = "bending_unit"
    JOINT = "joint"


@dataclass(frozen=True)
class GridNode:
    id: str
    position: tuple[float, float, float]
    fixed: bool = False


@dataclass(frozen=True)
class GridMember:
    id: str
    kind: MemberKind
    node_a: str
    node_b: str
    spec: BendingUnitSpec | JointSpec

    def __post_init__(self):
        expected = BendingUnitSpec if self.kind is MemberKind.BENDING_UNIT else JointSpec
        if not isinstance(self.spec, expected):
            raise ValueError(f"member {self.id}: spec type does not match kind {self.kind.value}")


@dataclass(frozen=True)
class GridDesign:
    """Node/member graph plus trigger conditions."""

    nodes: tuple[GridNode, ...]
    members: tuple[GridMember, ...]
    trigger_temperature: float = 80.0
    reference_temperature: float = 20.0
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        known = set(ids)
        member_ids = [m.id for m in self.members]
        if len(set(member_ids)) != len(member_ids):
            raise ValueError("duplicate member ids")
        for m in self.members:
            if m.node_a not in known or m.node_b not in known:
                raise ValueError(f"member {m.id} references an unknown node")
            if m.node_a == m.node_b:
                raise ValueError(f"member {m.id} connects a node to itself")

    @property
    def delta_t(self) -> float:
        return self.trigger_temperature - self.reference_temperature

    def node(self, node_id: str) -> GridNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True)
class MeshConfig:
    segments_per_member: int = 8

    def __post_init__(self):
        if self.segments_per_member < 1:
            raise ValueError("segments_per_member must be >= 1")


@dataclass(frozen=True, eq=False)
class BeamElement:
    """One beam segment of a meshed member.

    ``frame`` columns are the reference triad (axis, in-plane transverse,
    stack normal).  Section and response stay ``None`` until
    :func:`assign_eigenstrains` resolves materials.
    """

    member_id: str
    segment_index: int
    node_i: int
    node_j: int
    length: float
    frame: np.ndarray
    actuated: bool
    kind: MemberKind
    spec: BendingUnitSpec | JointSpec
    section: LayeredSection | None = None
    response: SectionResponse | None = None


@dataclass(frozen=True, eq=False)
class BeamMesh:
    """Beam-network discretization of a design."""

    node_ids: tuple[str, ...]
    positions: np.ndarray  # (n, 3) mm
    fixed: np.ndarray  # (n,) bool
    elements: tuple[BeamElement, ...]
    trigger_temperature: float
    reference_temperature: float
    gravity: tuple[float, float, float]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def delta_t(self) -> float:
        return self.trigger_temperature - self.reference_temperature

    @property
    def resolved(self) -> bool:
        return all(e.section is not None for e in self.elements)

    def node_index(self, node_id: str) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            raise KeyError(node_id) from None


def _member_frame(axis: np.ndarray, stack_normal: np.ndarray) -> np.ndarray:
    e1 = axis / np.linalg.norm(axis)
    e3 = stack_normal - (stack_normal @ e1) * e1
    n = np.linalg.norm(e3)
    if n < 1e-9:
        raise InvalidDocument("section orientation is parallel to the member axis")
    e3 = e3 / n
    e2 = np.cross(e3, e1)
    return np.column_stack([e1, e2, e3])


def _joint_normal(axis: np.ndarray) -> np.ndarray:
    for trial in (np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])):
        if np.linalg.norm(trial - (trial @ axis) * axis / (axis @ axis)) > 1e-6:
            perp = trial - (trial @ axis) * axis / (axis @ axis)
            return perp / np.linalg.norm(perp)
    raise InvalidDocument("degenerate joint axis")  # pragma: no cover


def _segment_lengths(spec: BendingUnitSpec | JointSpec, kind: MemberKind,
                     n: int) -> list[tuple[float, bool]]:
    """(length, actuated) per segment, transition exactly on a boundary."""
    if kind is MemberKind.JOINT:
        raise AssertionError("joints handled by caller")
    ratio = spec.actuator_ratio
    length = spec.length
    if ratio <= 0.0:
        return [(length / n, False)] * n
    if ratio >= 1.0:
        return [(length / n, True)] * n
    n_act = min(max(round(ratio * n), 1), n - 1)
    n_plain = n - n_act
    return [(ratio * length / n_act, True)] * n_act \
        + [((1.0 - ratio) * length / n_plain, False)] * n_plain


def mesh_design(design: GridDesign, config: MeshConfig = MeshConfig()) -> BeamMesh:
    """Discretize a design into beam segments.

    Units are split so the actuator/constraint transition falls exactly on a
    segment boundary; joints subdivide uniformly.  Material resolution is a
    separate pass (:func:`assign_eigenstrains`).

    Raises
    ------
    DisconnectedGraph
        The member graph does not reach every node.
    NoFixedNode
        Gravity is nonzero but no node is fixed.
    InvalidDocument
        A unit's recorded length disagrees with its node distance.
    """
    if not design.members:
        raise DisconnectedGraph("design has no members")
    adjacency: dict[str, set[str]] = {n.id: set() for n in design.nodes}
    for m in design.members:
        adjacency[m.node_a].add(m.node_b)
        adjacency[m.node_b].add(m.node_a)
    seen = {design.nodes[0].id}
    stack = [design.nodes[0].id]
    while stack:
        for nb in adjacency[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != len(design.nodes):
        raise DisconnectedGraph("member graph does not connect all nodes")
    if np.linalg.norm(design.gravity) > 0 and not any(n.fixed for n in design.nodes):
        raise NoFixedNode("gravity requires at least one fixed node")

    node_ids = [n.id for n in design.nodes]
    positions = [np.asarray(n.position, dtype=float) for n in design.nodes]
    fixed = [n.fixed for n in design.nodes]
    index = {nid: i for i, nid in enumerate(node_ids)}
    elements: list[BeamElement] = []

    for m in design.members:
        pa = positions[index[m.node_a]]
        pb = positions[index[m.node_b]]
        axis = pb - pa
        geo_len = float(np.linalg.norm(axis))
        if geo_len <= 0:
            raise InvalidDocument(f"member {m.id}: coincident end nodes")
        n = config.segments_per_member
        if m.kind is MemberKind.BENDING_UNIT:
            if abs(geo_len - m.spec.length) > 1e-6 * m.spec.length:
                raise InvalidDocument(
                    f"member {m.id}: node distance {geo_len:.6g} mm disagrees with "
                    f"spec length {m.spec.length:.6g} mm"
                )
            segments = _segment_lengths(m.spec, m.kind, n)
            frame = _member_frame(axis, np.asarray(m.spec.orientation, dtype=float))
        else:
            segments = [(geo_len / n, False)] * n
            frame = _member_frame(axis, _joint_normal(axis / geo_len))

        prev_index = index[m.node_a]
        cum = 0.0
        for k, (seg_len, actuated) in enumerate(segments):
            cum += seg_len
            if k == len(segments) - 1:
                next_index = index[m.node_b]
            else:
                nid = f"{m.id}#{k + 1}"
                node_ids.append(nid)
                positions.append(pa + axis * (cum / geo_len))
                fixed.append(False)
                next_index = len(node_ids) - 1
            elements.append(BeamElement(
                member_id=m.id, segment_index=k, node_i=prev_index, node_j=next_index,
                length=seg_len, frame=frame, actuated=actuated, kind=m.kind, spec=m.spec,
            ))
            prev_index = next_index

    if len(set(node_ids)) != len(node_ids):
        raise InvalidDocument("generated mesh node ids collide with design node ids")
    return BeamMesh(
        node_ids=tuple(node_ids),
        positions=np.vstack(positions),
        fixed=np.array(fixed, dtype=bool),
        elements=tuple(elements),
        trigger_temperature=design.trigger_temperature,
        reference_temperature=design.reference_temperature,
        gravity=tuple(float(g) for g in design.gravity),
    )


def _joint_section(spec: JointSpec, cards: Mapping[str, MaterialCard],
                   delta_t: float, regime: str) -> LayeredSection:
    card = cards[spec.material]
    modulus = loading_secant_modulus(card, 0.0) * _regime_factor(card, regime)
    return LayeredSection(layers=(
        Layer(thickness=spec.thickness, width=spec.width, tangent_modulus=modulus,
              eigenstrain=card.alpha_t * delta_t, density=card.density,
              poisson=card.poisson),
    ))


def assign_eigenstrains(mesh: BeamMesh, cards: Mapping[str, MaterialCard],
                        regime: str = "instantaneous",
                        released: bool = True) -> BeamMesh:
    """Resolve sections and eigen drive for every element.

    Actuated segments get the bi-layer section whose actuator layer carries
    the release shrinkage plus thermal expansion; everything else gets a
    uniform constraint section with thermal expansion only.  Element
    eigencurvature comes from the section integrator.  ``released=False``
    keeps thermal expansion but drops the release shrinkage.

    Raises
    ------
    OutOfCalibrationRange
        Some unit's sigma0 falls outside its actuator card's family span.
    KeyError
        A referenced material card is missing from ``cards``.
    """
    delta_t = mesh.delta_t
    cache: dict[tuple, tuple[LayeredSection, SectionResponse]] = {}
    resolved: list[BeamElement] = []
    for el in mesh.elements:
        if el.kind is MemberKind.JOINT:
            key = ("joint", el.spec, regime)
        else:
            key = ("unit", el.spec, el.actuated, regime)
        if key not in cache:
            if el.kind is MemberKind.JOINT:
                section = _joint_section(el.spec, cards, delta_t, regime)
            elif el.actuated:
                section = bilayer_section(el.spec, cards, delta_t, regime, released=released)
            else:
                section = plain_section(el.spec, cards, delta_t, regime)
            cache[key] = (section, section_response(section))
        section, response = cache[key]
        resolved.append(replace(el, section=section, response=response))
    return replace(mesh, elements=tuple(resolved))


def mesh_to_dict(mesh: BeamMesh) -> dict:
    """JSON view of the mesh: nodes, segment connectivity, lengths."""
    return {
        "format_version": FORMAT_VERSION,
        "kind": "beam_mesh",
        "trigger_temperature_c": mesh.trigger_temperature,
        "reference_temperature_c": mesh.reference_temperature,
        "gravity_m_s2": list(mesh.gravity),
        "nodes": [
            {
                "id": nid,
                "position_mm": [float(c) for c in mesh.positions[i]],
                "fixed": bool(mesh.fixed[i]),
            }
            for i, nid in enumerate(mesh.node_ids)
        ],
        "elements": [
            {
                "member": el.member_id,
                "segment": el.segment_index,
                "node_i": mesh.node_ids[el.node_i],
                "node_j": mesh.node_ids[el.node_j],
                "length_mm": el.length,
                "kind": el.kind.value,
                "actuated": el.actuated,
            }
            for el in mesh.elements
        ],
    }


# --- serialization ----------------------------------------------------------------


def _unit_spec_to_dict(spec: BendingUnitSpec) -> dict:
    return {
        "length_mm": spec.length,
        "width_mm": spec.width,
        "total_thickness_mm": spec.total_thickness,
        "actuator_thickness_mm": spec.actuator_thickness,
        "actuator_ratio": spec.actuator_ratio,
        "actuator_material": spec.actuator_material,
        "constraint_material": spec.constraint_material,
        "sigma0_mpa": spec.sigma0,
        "orientation": list(spec.orientation),
    }


def _unit_spec_from_dict(doc: dict) -> BendingUnitSpec:
    return BendingUnitSpec(
        length=float(doc["length_mm"]),
        width=float(doc["width_mm"]),
        total_thickness=float(doc["total_thickness_mm"]),
        actuator_thickness=float(doc["actuator_thickness_mm"]),
        actuator_ratio=float(doc["actuator_ratio"]),
        actuator_material=str(doc["actuator_material"]),
        constraint_material=str(doc["constraint_material"]),
        sigma0=float(doc.get("sigma0_mpa", 0.0)),
        orientation=tuple(float(c) for c in doc.get("orientation", (0.0, 0.0, 1.0))),
    )


def design_to_dict(design: GridDesign, materials: Mapping[str, str] | None = None) -> dict:
    """JSON document for a design; ``materials`` maps card names to files."""
    return {
        "format_version": FORMAT_VERSION,
        "kind": "grid_design",
        "trigger_temperature_c": design.trigger_temperature,
        "reference_temperature_c": design.reference_temperature,
        "gravity_m_s2": list(design.gravity),
        "materials": dict(materials or {}),
        "nodes": [
            {"id": n.id, "position_mm": list(n.position), "fixed": n.fixed}
            for n in design.nodes
        ],
        "members": [
            {
                "id": m.id,
                "kind": m.kind.value,
                "node_a": m.node_a,
                "node_b": m.node_b,
                "spec": _unit_spec_to_dict(m.spec) if m.kind is MemberKind.BENDING_UNIT
                else {"width_mm": m.spec.width, "thickness_mm": m.spec.thickness,
                      "material": m.spec.material},
            }
            for m in design.members
        ],
    }


def design_from_dict(doc: dict) -> tuple[GridDesign, dict[str, str]]:
    """Parse a design document; returns the design and its materials map."""
    try:
        if doc.get("kind") != "grid_design":
            raise InvalidDocument("not a grid design document")
        if doc.get("format_version") != FORMAT_VERSION:
            raise InvalidDocument(
                f"unsupported design format_version {doc.get('format_version')!r}"
            )
        nodes = tuple(
            GridNode(
                id=str(n["id"]),
                position=tuple(float(c) for c in n["position_mm"]),
                fixed=bool(n.get("fixed", False)),
            )
            for n in doc["nodes"]
        )
        members = []
        for m in doc["members"]:
            kind = MemberKind(m["kind"])
            if kind is MemberKind.BENDING_UNIT:
                spec = _unit_spec_from_dict(m["spec"])
            else:
                s = m["spec"]
                spec = JointSpec(width=float(s["width_mm"]),
                                 thickness=float(s["thickness_mm"]),
                                 material=str(s["material"]))
            members.append(GridMember(id=str(m["id"]), kind=kind,
                                      node_a=str(m["node_a"]), node_b=str(m["node_b"]),
                                      spec=spec))
        design = GridDesign(
            nodes=nodes,
            members=tuple(members),
            trigger_temperature=float(doc.get("trigger_temperature_c", 80.0)),
            reference_temperature=float(doc.get("reference_temperature_c", 20.0)),
            gravity=tuple(float(g) for g in doc.get("gravity_m_s2", (0.0, 0.0, -9.81))),
        )
        materials = {str(k): str(v) for k, v in doc.get("materials", {}).items()}
        return design, materials
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDocument(f"malformed grid design: {exc}") from exc


def save_design(design: GridDesign, path, materials: Mapping[str, str] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(design_to_dict(design, materials), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_design(path) -> tuple[GridDesign, dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidDocument(f"{path}: invalid JSON: {exc}") from exc
    return design_from_dict(doc)
