/**
 * Point-pair measuring: snap viewport picks to nodes or parametric member
 * points, store the pair set as a measurement document, and display the
 * service's accuracy report. Every displayed number is the API's value passed
 * through display rounding; the panel never recomputes an error or interval.
 */
import { WaitOptions, WorkbenchClient } from "./api.js";
import { floatRepr } from "./pyjson.js";
import {
  formatAccuracy,
  formatAccuracyDelta,
  formatErrorPercent,
  formatMm,
  formatSummaryLine,
} from "./format.js";
import { AccuracyReport, DeformedMesh, PairResult, Vec3 } from "./schemas.js";

// --- snapping ------------------------------------------------------------------

export interface SnappedPoint {
  /** Reference the measuring service understands: a node id or `member@fraction`. */
  ref: string;
  /** Where the snapped point sits in the rendered (deformed) shape. */
  position: Vec3;
}

function distance(a: Vec3, b: Vec3): number {
  return Math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2);
}

/**
 * Snap a picked viewport point to the mesh: a node when one is within
 * `nodeTolMm`, otherwise the nearest point on a member within `memberTolMm`
 * (expressed as a fraction of the member's undeformed arc length, which is
 * the convention measurement references use). Returns null when nothing is
 * close enough — the UI then asks for a re-pick.
 */
export function snapPick(
  mesh: DeformedMesh,
  point: Vec3,
  nodeTolMm = 3.0,
  memberTolMm = 3.0,
): SnappedPoint | null {
  let bestNode: { id: string; position: Vec3; d: number } | null = null;
  for (const node of mesh.nodes) {
    const d = distance(node.position_mm, point);
    if (d <= nodeTolMm && (!bestNode || d < bestNode.d)) {
      bestNode = { id: node.id, position: node.position_mm, d };
    }
  }
  if (bestNode) {
    return { ref: bestNode.id, position: bestNode.position };
  }

  const positionById = new Map(mesh.nodes.map((n) => [n.id, n.position_mm]));
  const byMember = new Map<string, typeof mesh.elements>();
  for (const element of mesh.elements) {
    const list = byMember.get(element.member);
    if (list) list.push(element);
    else byMember.set(element.member, [element]);
  }
  let best: { ref: string; position: Vec3; d: number } | null = null;
  for (const [member, elements] of byMember) {
    const ordered = elements.slice().sort((p, q) => p.segment - q.segment);
    const total = ordered.reduce((sum, e) => sum + e.length_mm, 0);
    let walked = 0;
    for (const element of ordered) {
      const a = positionById.get(element.node_i);
      const b = positionById.get(element.node_j);
      if (!a || !b) continue;
      const ab: Vec3 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
      const abLen2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
      const t =
        abLen2 === 0
          ? 0
          : Math.max(
              0,
              Math.min(
                1,
                ((point[0] - a[0]) * ab[0] +
                  (point[1] - a[1]) * ab[1] +
                  (point[2] - a[2]) * ab[2]) /
                  abLen2,
              ),
            );
      const closest: Vec3 = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
      const d = distance(closest, point);
      if (d <= memberTolMm && (!best || d < best.d)) {
        const fraction = total === 0 ? 0 : (walked + t * element.length_mm) / total;
        best = { ref: `${member}@${floatRepr(fraction)}`, position: closest, d };
      }
      walked += element.length_mm;
    }
  }
  return best ? { ref: best.ref, position: best.position } : null;
}

// --- measurement documents -------------------------------------------------------

export interface PointReferencePair {
  label: string;
  experimentMm: number;
  pointA: string;
  pointB: string;
}

export interface EnteredPair {
  label: string;
  experimentMm: number;
  simulationMm: number;
  reportedErrorPercent?: number;
}

function safeLabel(label: string): string {
  if (/[",\r\n]/.test(label) || label.length === 0) {
    throw new Error(`measurement label ${JSON.stringify(label)} must be plain text without commas`);
  }
  return label;
}

/** CSV of point references, resolved against a state by a measure job. */
export function referencesCsv(entries: PointReferencePair[]): string {
  const lines = ["label,experiment_mm,point_a,point_b"];
  for (const e of entries) {
    lines.push(`${safeLabel(e.label)},${floatRepr(e.experimentMm)},${e.pointA},${e.pointB}`);
  }
  return lines.join("\n") + "\n";
}

/** CSV of already-measured pairs, pooled by a report job. */
export function pairsCsv(entries: EnteredPair[]): string {
  const withReported = entries.some((e) => e.reportedErrorPercent !== undefined);
  const header = withReported
    ? "label,experiment_mm,simulation_mm,reported_error_percent"
    : "label,experiment_mm,simulation_mm";
  const lines = [header];
  for (const e of entries) {
    let row = `${safeLabel(e.label)},${floatRepr(e.experimentMm)},${floatRepr(e.simulationMm)}`;
    if (withReported) {
      if (e.reportedErrorPercent === undefined) {
        throw new Error("either all pairs or none must carry a recorded error percentage");
      }
      row += `,${floatRepr(e.reportedErrorPercent)}`;
    }
    lines.push(row);
  }
  return lines.join("\n") + "\n";
}

// --- display -----------------------------------------------------------------------

export interface DisplayRow {
  label: string;
  experimentMm: string;
  simulationMm: string;
  errorPercent: string;
  accuracy: string;
  /** True when the recorded error disagrees with the one recomputed from the distances. */
  flagged: boolean;
}

export function displayRows(report: AccuracyReport): DisplayRow[] {
  return report.pairs.map((pair: PairResult) => ({
    label: pair.label,
    experimentMm: formatMm(pair.experiment_mm),
    simulationMm: formatMm(pair.simulation_mm),
    errorPercent: formatErrorPercent(pair.error_percent),
    accuracy: formatAccuracy(pair.accuracy),
    flagged: pair.discrepant,
  }));
}

export interface ReportView {
  report: AccuracyReport;
  rows: DisplayRow[];
  summaryLine: string;
}

function view(report: AccuracyReport): ReportView {
  return { report, rows: displayRows(report), summaryLine: formatSummaryLine(report) };
}

export interface PairDelta {
  label: string;
  before: string;
  after: string;
  delta: string;
}

/** Per-pair accuracy movement between two iterations of the same pair set. */
export function compareReports(before: AccuracyReport, after: AccuracyReport): PairDelta[] {
  const previous = new Map(before.pairs.map((p) => [p.label, p]));
  const deltas: PairDelta[] = [];
  for (const pair of after.pairs) {
    const old = previous.get(pair.label);
    if (!old) continue;
    deltas.push({
      label: pair.label,
      before: formatAccuracy(old.accuracy),
      after: formatAccuracy(pair.accuracy),
      delta: formatAccuracyDelta(pair.accuracy - old.accuracy),
    });
  }
  return deltas;
}

// --- panel -------------------------------------------------------------------------

export class MeasurePanel {
  constructor(private readonly client: WorkbenchClient) {}

  /**
   * Store point references as a measurement document and resolve them against
   * a simulated state with a measure job.
   */
  async measureReferences(
    stateId: string,
    documentName: string,
    entries: PointReferencePair[],
    wait: WaitOptions = {},
  ): Promise<ReportView> {
    await this.client.putDocument("measurements", documentName, referencesCsv(entries));
    const { report } = await this.client.measureState(stateId, documentName, wait);
    return view(report);
  }

  /** Store manually entered experiment/simulation pairs and report on them. */
  async reportEnteredPairs(
    documentName: string,
    entries: EnteredPair[],
    wait: WaitOptions = {},
  ): Promise<ReportView> {
    await this.client.putDocument("measurements", documentName, pairsCsv(entries));
    const { report } = await this.client.poolReport([documentName], wait);
    return view(report);
  }

  /** Pool existing measurement documents (e.g. one per printed structure). */
  async reportPooled(names: string[], wait: WaitOptions = {}): Promise<ReportView> {
    const { report } = await this.client.poolReport(names, wait);
    return view(report);
  }
}
