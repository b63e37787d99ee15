/**
 * Zod schemas for every document the workbench HTTP API exchanges.
 *
 * The grid-design schema enforces the same document-level rules the service
 * applies on PUT, so an upload the studio accepts is an upload the service
 * accepts, and the shared design corpus parses under both validators.
 */
import { z } from "zod";

export const FORMAT_VERSION = 1;

const vec3 = z.tuple([z.number(), z.number(), z.number()]);
export type Vec3 = z.infer<typeof vec3>;

// --- grid designs -----------------------------------------------------------

export const BendingUnitSpecSchema = z
  .strictObject({
    actuator_material: z.string().min(1),
    actuator_ratio: z.number(),
    actuator_thickness_mm: z.number(),
    constraint_material: z.string().min(1),
    length_mm: z.number(),
    orientation: vec3,
    sigma0_mpa: z.number(),
    total_thickness_mm: z.number(),
    width_mm: z.number(),
  })
  .superRefine((spec, ctx) => {
    for (const issue of bendingUnitSpecIssues(spec)) {
      ctx.addIssue({ code: "custom", message: issue });
    }
  });
export type BendingUnitSpec = z.infer<typeof BendingUnitSpecSchema>;

/** The unit-spec rules the service enforces, as human-readable messages. */
export function bendingUnitSpecIssues(spec: {
  actuator_ratio: number;
  actuator_thickness_mm: number;
  length_mm: number;
  orientation: readonly [number, number, number];
  sigma0_mpa: number;
  total_thickness_mm: number;
  width_mm: number;
}): string[] {
  const issues: string[] = [];
  if (Math.min(spec.length_mm, spec.width_mm, spec.total_thickness_mm) <= 0) {
    issues.push("unit dimensions must be positive");
  }
  if (!(spec.actuator_thickness_mm > 0 && spec.actuator_thickness_mm < spec.total_thickness_mm)) {
    issues.push("actuator thickness must lie strictly inside the total");
  }
  if (!(spec.actuator_ratio >= 0 && spec.actuator_ratio <= 1)) {
    issues.push("actuator_ratio must lie in [0, 1]");
  }
  if (spec.sigma0_mpa < 0) {
    issues.push("sigma0 must be >= 0");
  }
  const [x, y, z_] = spec.orientation;
  if (Math.sqrt(x * x + y * y + z_ * z_) < 1e-12) {
    issues.push("orientation must be a nonzero vector");
  }
  return issues;
}

export const JointSpecSchema = z
  .strictObject({
    material: z.string().min(1),
    thickness_mm: z.number(),
    width_mm: z.number(),
  })
  .refine((s) => s.thickness_mm > 0 && s.width_mm > 0, {
    message: "joint dimensions must be positive",
  });
export type JointSpec = z.infer<typeof JointSpecSchema>;

const memberBase = {
  id: z.string().min(1),
  node_a: z.string().min(1),
  node_b: z.string().min(1),
};

export const GridMemberSchema = z
  .discriminatedUnion("kind", [
    z.strictObject({ ...memberBase, kind: z.literal("bending_unit"), spec: BendingUnitSpecSchema }),
    z.strictObject({ ...memberBase, kind: z.literal("joint"), spec: JointSpecSchema }),
  ])
  .refine((m) => m.node_a !== m.node_b, {
    message: "member connects a node to itself",
  });
export type GridMember = z.infer<typeof GridMemberSchema>;

export const GridNodeSchema = z.strictObject({
  fixed: z.boolean(),
  id: z.string().min(1),
  position_mm: vec3,
});
export type GridNode = z.infer<typeof GridNodeSchema>;

export const GridDesignSchema = z
  .strictObject({
    format_version: z.literal(FORMAT_VERSION),
    gravity_m_s2: vec3,
    kind: z.literal("grid_design"),
    materials: z.record(z.string(), z.string()),
    members: z.array(GridMemberSchema).min(1),
    nodes: z.array(GridNodeSchema).min(1),
    reference_temperature_c: z.number(),
    trigger_temperature_c: z.number(),
  })
  .superRefine((design, ctx) => {
    const nodeIds = new Set<string>();
    for (const node of design.nodes) {
      if (nodeIds.has(node.id)) {
        ctx.addIssue({ code: "custom", message: "duplicate node ids" });
      }
      nodeIds.add(node.id);
    }
    const memberIds = new Set<string>();
    for (const member of design.members) {
      if (memberIds.has(member.id)) {
        ctx.addIssue({ code: "custom", message: "duplicate member ids" });
      }
      memberIds.add(member.id);
      if (!nodeIds.has(member.node_a) || !nodeIds.has(member.node_b)) {
        ctx.addIssue({
          code: "custom",
          message: `member ${member.id} references an unknown node`,
        });
      }
      const needed =
        member.kind === "bending_unit"
          ? [member.spec.actuator_material, member.spec.constraint_material]
          : [member.spec.material];
      for (const material of needed) {
        if (!(material in design.materials)) {
          ctx.addIssue({
            code: "custom",
            message: `member material '${material}' missing from the materials map`,
          });
        }
      }
    }
  });
export type GridDesign = z.infer<typeof GridDesignSchema>;

// --- material cards (read for display; never written by the studio) ---------

export const MaterialCardSchema = z
  .looseObject({
    format_version: z.literal(FORMAT_VERSION),
    kind: z.literal("material_card"),
    name: z.string().min(1),
    viscoelastic_enabled: z.boolean(),
  });
export type MaterialCard = z.infer<typeof MaterialCardSchema>;

// --- simulation results ------------------------------------------------------

export const DeformedStateSchema = z.strictObject({
  energy_nmm: z.number(),
  format_version: z.literal(FORMAT_VERSION),
  kind: z.literal("deformed_state"),
  load_factor: z.number(),
  newton_iterations: z.array(z.number().int()),
  nodes: z.array(
    z.strictObject({
      id: z.string().min(1),
      position_mm: vec3,
      reference_position_mm: vec3,
      rotation: z.array(z.number()).length(9),
    }),
  ),
});
export type DeformedState = z.infer<typeof DeformedStateSchema>;

export const MeshElementSchema = z.strictObject({
  actuated: z.boolean(),
  kind: z.enum(["bending_unit", "joint"]),
  length_mm: z.number(),
  member: z.string().min(1),
  node_i: z.string().min(1),
  node_j: z.string().min(1),
  segment: z.number().int(),
});
export type MeshElement = z.infer<typeof MeshElementSchema>;

const meshBody = {
  elements: z.array(MeshElementSchema),
  format_version: z.literal(FORMAT_VERSION),
  gravity_m_s2: vec3,
  nodes: z.array(GridNodeSchema),
  reference_temperature_c: z.number(),
  trigger_temperature_c: z.number(),
};

export const BeamMeshSchema = z.strictObject({
  ...meshBody,
  kind: z.literal("beam_mesh"),
});
export type BeamMesh = z.infer<typeof BeamMeshSchema>;

/** `GET /states/{id}/mesh`: the mesh with deformed node positions substituted. */
export const DeformedMeshSchema = z.strictObject({
  ...meshBody,
  kind: z.literal("deformed_mesh"),
  state_id: z.string().min(1),
});
export type DeformedMesh = z.infer<typeof DeformedMeshSchema>;

// --- accuracy reports --------------------------------------------------------

export const PairResultSchema = z.strictObject({
  accuracy: z.number(),
  computed_error_percent: z.number(),
  discrepant: z.boolean(),
  error_percent: z.number(),
  experiment_mm: z.number(),
  label: z.string().min(1),
  simulation_mm: z.number(),
});
export type PairResult = z.infer<typeof PairResultSchema>;

export const AccuracyReportSchema = z.strictObject({
  ci95: z.tuple([z.number(), z.number()]),
  format_version: z.literal(FORMAT_VERSION),
  kind: z.literal("accuracy_report"),
  mean_accuracy: z.number(),
  n: z.number().int().min(2),
  pairs: z.array(PairResultSchema).min(2),
});
export type AccuracyReport = z.infer<typeof AccuracyReportSchema>;

// --- service envelopes -------------------------------------------------------

export const DocumentListSchema = z.strictObject({
  format_version: z.literal(FORMAT_VERSION),
  kind: z.literal("document_list"),
  names: z.array(z.string()),
});
export type DocumentList = z.infer<typeof DocumentListSchema>;

export const PutResultSchema = z.strictObject({
  format_version: z.literal(FORMAT_VERSION),
  kind: z.literal("put_result"),
  name: z.string(),
  etag: z.string().regex(/^[0-9a-f]{64}$/),
});
export type PutResult = z.infer<typeof PutResultSchema>;

export const JobStatusSchema = z.enum(["queued", "running", "done", "failed"]);
export type JobStatus = z.infer<typeof JobStatusSchema>;

export const JobKindSchema = z.enum([
  "ingest",
  "calibrate",
  "shoot",
  "simulate",
  "measure",
  "report",
]);
export type JobKind = z.infer<typeof JobKindSchema>;

export const JobRecordSchema = z.strictObject({
  format_version: z.literal(FORMAT_VERSION),
  kind: z.literal("job_record"),
  id: z.string().min(1),
  job: z.strictObject({
    kind: JobKindSchema,
    status: JobStatusSchema,
    inputs_hash: z.string().regex(/^[0-9a-f]{64}$/),
    params: z.looseObject({}),
    outputs: z.looseObject({}),
    log: z.string(),
  }),
});
export type JobRecord = z.infer<typeof JobRecordSchema>;

/** Outputs of a finished simulate job. */
export const SimulateOutputsSchema = z.looseObject({
  states: z.strictObject({ a: z.string(), b: z.string() }),
  mesh: z.string(),
});

/** Outputs of a finished measure or report job. */
export const ReportOutputsSchema = z.looseObject({
  report: z.string(),
  report_doc: AccuracyReportSchema,
});
