/**
 * 3D result viewer: renders the deformed beam network of each simulation
 * stage as member polylines, with an optional target-shape overlay for visual
 * fit checking. Geometry comes straight from the API's deformed-mesh
 * documents; the viewer keeps the full-precision coordinates alongside the
 * float32 render buffers so measurements are not degraded by the GPU format.
 */
import * as THREE from "three";
import { DeformedMesh, Vec3 } from "./schemas.js";

export type StageId = "a" | "b";

export interface MemberPolyline {
  member: string;
  nodeIds: string[];
  /** Full-precision positions, one per polyline vertex, straight from the API. */
  positions: Vec3[];
}

/** Order each member's mesh segments into a node chain. */
export function memberPolylines(mesh: DeformedMesh): MemberPolyline[] {
  const positionById = new Map<string, Vec3>();
  for (const node of mesh.nodes) {
    positionById.set(node.id, node.position_mm);
  }
  const byMember = new Map<string, typeof mesh.elements>();
  for (const element of mesh.elements) {
    const list = byMember.get(element.member);
    if (list) list.push(element);
    else byMember.set(element.member, [element]);
  }
  const polylines: MemberPolyline[] = [];
  for (const [member, elements] of byMember) {
    const ordered = elements.slice().sort((p, q) => p.segment - q.segment);
    const nodeIds = [ordered[0]!.node_i, ...ordered.map((e) => e.node_j)];
    const positions = nodeIds.map((id) => {
      const p = positionById.get(id);
      if (!p) throw new Error(`mesh element references unknown node ${id}`);
      return p;
    });
    polylines.push({ member, nodeIds, positions });
  }
  return polylines;
}

function polylineObject(polyline: MemberPolyline, color: number): THREE.Line {
  const flat = new Float32Array(polyline.positions.length * 3);
  polyline.positions.forEach((p, i) => {
    flat[3 * i] = p[0];
    flat[3 * i + 1] = p[1];
    flat[3 * i + 2] = p[2];
  });
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.BufferAttribute(flat, 3));
  const line = new THREE.Line(geometry, new THREE.LineBasicMaterial({ color }));
  line.name = `member:${polyline.member}`;
  return line;
}

const STAGE_COLORS: Record<StageId, number> = { a: 0xc2571a, b: 0x1a56c2 };
const TARGET_COLOR = 0x3a9c3a;

export class ResultViewer {
  readonly scene = new THREE.Scene();
  private stageGroups = new Map<StageId, THREE.Group>();
  private stageMeshes = new Map<StageId, DeformedMesh>();
  private targetGroup: THREE.Group | null = null;
  private visibleStage: StageId = "b";

  /** Replace the rendered geometry with a freshly fetched pair of stages. */
  setStages(meshes: { a: DeformedMesh; b: DeformedMesh }): void {
    for (const group of this.stageGroups.values()) {
      this.scene.remove(group);
    }
    this.stageGroups.clear();
    this.stageMeshes.clear();
    for (const stage of ["a", "b"] as const) {
      const mesh = meshes[stage];
      const group = new THREE.Group();
      group.name = `stage-${stage}`;
      for (const polyline of memberPolylines(mesh)) {
        group.add(polylineObject(polyline, STAGE_COLORS[stage]));
      }
      group.visible = stage === this.visibleStage;
      this.scene.add(group);
      this.stageGroups.set(stage, group);
      this.stageMeshes.set(stage, mesh);
    }
  }

  /** Toggle between the trigger-time shape (a) and the settled shape (b). */
  showStage(stage: StageId): void {
    this.visibleStage = stage;
    for (const [id, group] of this.stageGroups) {
      group.visible = id === stage;
    }
  }

  get activeStage(): StageId {
    return this.visibleStage;
  }

  stageMesh(stage: StageId): DeformedMesh {
    const mesh = this.stageMeshes.get(stage);
    if (!mesh) throw new Error(`no geometry loaded for stage ${stage}`);
    return mesh;
  }

  /** Full-precision deformed position of a mesh node, as the API reported it. */
  nodePosition(stage: StageId, nodeId: string): Vec3 {
    const node = this.stageMesh(stage).nodes.find((n) => n.id === nodeId);
    if (!node) throw new Error(`stage ${stage} has no node ${nodeId}`);
    return node.position_mm;
  }

  /**
   * Chord distance between two rendered nodes, in mm. This is the same
   * Euclidean distance over the same API-reported coordinates the measuring
   * service uses, so it agrees with a measure job to full precision.
   */
  chordMm(stage: StageId, nodeA: string, nodeB: string): number {
    const a = this.nodePosition(stage, nodeA);
    const b = this.nodePosition(stage, nodeB);
    return Math.sqrt(
      (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2,
    );
  }

  /** Optional reference shape (e.g. a scanned target) as plain polylines. */
  loadTargetOverlay(polylines: Vec3[][]): void {
    if (this.targetGroup) this.scene.remove(this.targetGroup);
    const group = new THREE.Group();
    group.name = "target-overlay";
    polylines.forEach((positions, index) => {
      group.add(
        polylineObject(
          { member: `target-${index}`, nodeIds: [], positions },
          TARGET_COLOR,
        ),
      );
    });
    this.scene.add(group);
    this.targetGroup = group;
  }

  clearTargetOverlay(): void {
    if (this.targetGroup) {
      this.scene.remove(this.targetGroup);
      this.targetGroup = null;
    }
  }

  get hasTargetOverlay(): boolean {
    return this.targetGroup !== null;
  }
}
