/**
 * Grid-design documents: parsing, byte-compatible serialization, immutable
 * edits with the same inline validation the service applies on upload, and
 * the 2D flat-layout rendering used by the editor panel.
 */
import {
  BendingUnitSpec,
  GridDesign,
  GridDesignSchema,
  GridMember,
  GridNode,
  Vec3,
  bendingUnitSpecIssues,
} from "./schemas.js";
import { Float, JsonTree, dumpSorted, floatRepr } from "./pyjson.js";

export class DesignValidationError extends Error {
  constructor(
    message: string,
    readonly issues: string[],
  ) {
    super(message);
    this.name = "DesignValidationError";
  }
}

export function parseDesign(text: string): GridDesign {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (exc) {
    throw new DesignValidationError(`invalid JSON: ${(exc as Error).message}`, []);
  }
  const result = GridDesignSchema.safeParse(raw);
  if (!result.success) {
    const issues = result.error.issues.map((i) =>
      i.path.length ? `${i.path.join(".")}: ${i.message}` : i.message,
    );
    throw new DesignValidationError(`malformed grid design: ${issues[0]}`, issues);
  }
  return result.data;
}

function vec3Tree(v: Vec3): JsonTree {
  return [new Float(v[0]), new Float(v[1]), new Float(v[2])];
}

function designToTree(design: GridDesign): JsonTree {
  return {
    format_version: design.format_version,
    gravity_m_s2: vec3Tree(design.gravity_m_s2),
    kind: design.kind,
    materials: { ...design.materials },
    members: design.members.map((m): JsonTree => ({
      id: m.id,
      kind: m.kind,
      node_a: m.node_a,
      node_b: m.node_b,
      spec:
        m.kind === "bending_unit"
          ? {
              actuator_material: m.spec.actuator_material,
              actuator_ratio: new Float(m.spec.actuator_ratio),
              actuator_thickness_mm: new Float(m.spec.actuator_thickness_mm),
              constraint_material: m.spec.constraint_material,
              length_mm: new Float(m.spec.length_mm),
              orientation: vec3Tree(m.spec.orientation),
              sigma0_mpa: new Float(m.spec.sigma0_mpa),
              total_thickness_mm: new Float(m.spec.total_thickness_mm),
              width_mm: new Float(m.spec.width_mm),
            }
          : {
              material: m.spec.material,
              thickness_mm: new Float(m.spec.thickness_mm),
              width_mm: new Float(m.spec.width_mm),
            },
    })),
    nodes: design.nodes.map((n): JsonTree => ({
      fixed: n.fixed,
      id: n.id,
      position_mm: vec3Tree(n.position_mm),
    })),
    reference_temperature_c: new Float(design.reference_temperature_c),
    trigger_temperature_c: new Float(design.trigger_temperature_c),
  };
}

/** Byte-for-byte the form the service's own writer produces. */
export function serializeDesign(design: GridDesign): string {
  return dumpSorted(designToTree(design));
}

// --- edits -------------------------------------------------------------------

export type EditField = "actuator_ratio" | "sigma0" | "orientation" | "material";

export interface MemberEdit {
  memberId: string;
  field: EditField;
  value: number | Vec3 | string;
}

export class InlineValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "InlineValidationError";
  }
}

function nodeById(design: GridDesign, id: string): GridNode {
  const node = design.nodes.find((n) => n.id === id);
  if (!node) throw new InlineValidationError(`member references an unknown node ${id}`);
  return node;
}

function normalizeOrientation(value: Vec3): Vec3 {
  const norm = Math.sqrt(value[0] * value[0] + value[1] * value[1] + value[2] * value[2]);
  if (norm < 1e-12) {
    throw new InlineValidationError("orientation must be a nonzero vector");
  }
  return [value[0] / norm, value[1] / norm, value[2] / norm];
}

function checkOrientationAgainstAxis(design: GridDesign, member: GridMember, unit: Vec3): void {
  const a = nodeById(design, member.node_a).position_mm;
  const b = nodeById(design, member.node_b).position_mm;
  const axis: Vec3 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
  const axisNorm = Math.sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (axisNorm === 0) return; // coincident nodes surface as their own error
  const e1: Vec3 = [axis[0] / axisNorm, axis[1] / axisNorm, axis[2] / axisNorm];
  const dot = unit[0] * e1[0] + unit[1] * e1[1] + unit[2] * e1[2];
  const residual: Vec3 = [unit[0] - dot * e1[0], unit[1] - dot * e1[1], unit[2] - dot * e1[2]];
  const n = Math.sqrt(
    residual[0] * residual[0] + residual[1] * residual[1] + residual[2] * residual[2],
  );
  if (n < 1e-9) {
    throw new InlineValidationError("section orientation is parallel to the member axis");
  }
}

function editedSpec(
  design: GridDesign,
  member: GridMember & { kind: "bending_unit" },
  edit: MemberEdit,
): BendingUnitSpec {
  const spec = { ...member.spec };
  switch (edit.field) {
    case "actuator_ratio": {
      if (typeof edit.value !== "number") {
        throw new InlineValidationError("actuator_ratio must be a number");
      }
      spec.actuator_ratio = edit.value;
      break;
    }
    case "sigma0": {
      if (typeof edit.value !== "number") {
        throw new InlineValidationError("sigma0 must be a number");
      }
      spec.sigma0_mpa = edit.value;
      break;
    }
    case "orientation": {
      if (!Array.isArray(edit.value) || edit.value.length !== 3) {
        throw new InlineValidationError("orientation must be a 3-vector");
      }
      const unit = normalizeOrientation(edit.value as Vec3);
      checkOrientationAgainstAxis(design, member, unit);
      spec.orientation = unit;
      break;
    }
    case "material": {
      if (typeof edit.value !== "string") {
        throw new InlineValidationError("material must be a material-card name");
      }
      if (!(edit.value in design.materials)) {
        throw new InlineValidationError(
          `member material '${edit.value}' missing from the materials map`,
        );
      }
      spec.actuator_material = edit.value;
      break;
    }
  }
  const issues = bendingUnitSpecIssues(spec);
  if (issues.length) {
    throw new InlineValidationError(issues[0]!);
  }
  return spec;
}

/**
 * Apply one field edit to one member, returning a new design. Invalid values
 * raise `InlineValidationError` with the same message the service would put
 * in its 422 response, and leave the design untouched.
 */
export function applyEdit(design: GridDesign, edit: MemberEdit): GridDesign {
  const index = design.members.findIndex((m) => m.id === edit.memberId);
  if (index < 0) {
    throw new InlineValidationError(`no member with id '${edit.memberId}'`);
  }
  const member = design.members[index]!;
  let next: GridMember;
  if (member.kind === "bending_unit") {
    next = { ...member, spec: editedSpec(design, member, edit) };
  } else if (edit.field === "material") {
    if (typeof edit.value !== "string") {
      throw new InlineValidationError("material must be a material-card name");
    }
    if (!(edit.value in design.materials)) {
      throw new InlineValidationError(
        `member material '${edit.value}' missing from the materials map`,
      );
    }
    next = { ...member, spec: { ...member.spec, material: edit.value } };
  } else {
    throw new InlineValidationError(
      `field '${edit.field}' applies only to bending units (member '${member.id}' is a joint)`,
    );
  }
  const members = design.members.slice();
  members[index] = next;
  return { ...design, members };
}

// --- 2D layout view ----------------------------------------------------------

export interface LayoutOptions {
  width?: number;
  height?: number;
  margin?: number;
}

/**
 * Flat print layout (top view, x–y plane) as an SVG string: bending units as
 * solid struts with an id/coverage badge, joints as dashed connectors.
 */
export function renderLayoutSvg(design: GridDesign, options: LayoutOptions = {}): string {
  const width = options.width ?? 640;
  const height = options.height ?? 360;
  const margin = options.margin ?? 40;
  const xs = design.nodes.map((n) => n.position_mm[0]);
  const ys = design.nodes.map((n) => n.position_mm[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const px = (x: number) => margin + (x - minX) * scale;
  const py = (y: number) => height - margin - (y - minY) * scale;

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}">`,
  ];
  for (const member of design.members) {
    const a = nodeById(design, member.node_a).position_mm;
    const b = nodeById(design, member.node_b).position_mm;
    const x1 = px(a[0]);
    const y1 = py(a[1]);
    const x2 = px(b[0]);
    const y2 = py(b[1]);
    const mx = (x1 + x2) / 2;
    const my = (y1 + y2) / 2;
    if (member.kind === "bending_unit") {
      parts.push(
        `<line class="member unit" data-member="${member.id}" ` +
          `x1="${x1.toFixed(1)}" y1="${y1.toFixed(1)}" x2="${x2.toFixed(1)}" y2="${y2.toFixed(1)}" ` +
          `stroke="#c2571a" stroke-width="6"/>`,
        `<text class="badge" data-member="${member.id}" x="${mx.toFixed(1)}" y="${(my - 8).toFixed(1)}" ` +
          `font-size="12" text-anchor="middle">${member.id} ` +
          `ratio=${floatRepr(member.spec.actuator_ratio)} ` +
          `sigma0=${floatRepr(member.spec.sigma0_mpa)} ${member.spec.actuator_material}</text>`,
      );
    } else {
      parts.push(
        `<line class="member joint" data-member="${member.id}" ` +
          `x1="${x1.toFixed(1)}" y1="${y1.toFixed(1)}" x2="${x2.toFixed(1)}" y2="${y2.toFixed(1)}" ` +
          `stroke="#4a4a4a" stroke-width="4" stroke-dasharray="6 4"/>`,
        `<text class="badge" data-member="${member.id}" x="${mx.toFixed(1)}" y="${(my - 8).toFixed(1)}" ` +
          `font-size="12" text-anchor="middle">${member.id} joint</text>`,
      );
    }
  }
  for (const node of design.nodes) {
    const x = px(node.position_mm[0]);
    const y = py(node.position_mm[1]);
    parts.push(
      `<circle class="node${node.fixed ? " fixed" : ""}" data-node="${node.id}" ` +
        `cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="${node.fixed ? 7 : 5}" ` +
        `fill="${node.fixed ? "#1a56c2" : "#ffffff"}" stroke="#1a1a1a"/>`,
      `<text class="node-label" x="${(x + 9).toFixed(1)}" y="${(y - 9).toFixed(1)}" ` +
        `font-size="11">${node.id}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}
