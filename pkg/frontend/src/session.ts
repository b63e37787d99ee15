/**
 * One sitting of the iterative design loop: an open design, saves with
 * optimistic concurrency, simulate-and-view runs, and an append-only history
 * of iterations with their result states and accuracy summaries.
 */
import { ConflictError, WaitOptions, WorkbenchClient } from "./api.js";
import { GridDesign, AccuracyReport, JobRecord } from "./schemas.js";
import { MemberEdit, applyEdit, parseDesign, serializeDesign } from "./design.js";
import { ResultViewer } from "./viewer.js";
import { formatSummaryLine } from "./format.js";
import { PointReferencePair, referencesCsv } from "./measure.js";

export interface OpenDesign {
  name: string;
  design: GridDesign;
  etag: string;
  dirty: boolean;
}

export interface IterationEntry {
  readonly sequence: number;
  readonly designName: string;
  /** The exact bytes that were simulated. */
  readonly designSnapshot: string;
  readonly jobId: string;
  /** Resolvable via `GET /states/{stateRef}`. */
  readonly stateRef: string;
  readonly report: AccuracyReport | null;
  readonly accuracySummary: string | null;
}

export type SaveResult =
  | { status: "clean" }
  | { status: "saved"; etag: string }
  | { status: "conflict"; message: string };

export interface RunResult {
  record: JobRecord;
  entry: IterationEntry;
}

export class StudioSession {
  private current: OpenDesign | null = null;
  private readonly entries: IterationEntry[] = [];
  private pairs: PointReferencePair[] = [];

  constructor(
    readonly client: WorkbenchClient,
    readonly viewer: ResultViewer | null = null,
  ) {}

  /** The point pairs measured on each run (kept across iterations). */
  get selectedPairs(): readonly PointReferencePair[] {
    return this.pairs.slice();
  }

  get openDesign(): OpenDesign {
    if (!this.current) throw new Error("no design is open");
    return this.current;
  }

  /** Append-only record of (design snapshot, result state, accuracy summary). */
  get history(): readonly IterationEntry[] {
    return this.entries.slice();
  }

  async listDesigns(): Promise<string[]> {
    return this.client.listDocuments("designs");
  }

  async open(name: string): Promise<OpenDesign> {
    const { text, etag } = await this.client.getDocument("designs", name);
    this.current = { name, design: parseDesign(text), etag, dirty: false };
    return this.current;
  }

  /** Re-fetch the open design, discarding local (unsaved) edits. */
  async refresh(): Promise<OpenDesign> {
    const open = this.openDesign;
    const { text, etag } = await this.client.getDocument("designs", open.name);
    this.current = { name: open.name, design: parseDesign(text), etag, dirty: false };
    return this.current;
  }

  /**
   * Apply one member edit locally. Invalid values raise InlineValidationError
   * and leave the design untouched; changes reach the server only on save().
   */
  edit(edit: MemberEdit): GridDesign {
    const open = this.openDesign;
    const design = applyEdit(open.design, edit);
    this.current = { ...open, design, dirty: true };
    return design;
  }

  /** Optimistic save: PUT with If-Match, surfacing a 409 as a conflict. */
  async save(): Promise<SaveResult> {
    const open = this.openDesign;
    if (!open.dirty) return { status: "clean" };
    try {
      const result = await this.client.putDocument(
        "designs",
        open.name,
        serializeDesign(open.design),
        open.etag,
      );
      this.current = { ...open, etag: result.etag, dirty: false };
      return { status: "saved", etag: result.etag };
    } catch (exc) {
      if (exc instanceof ConflictError) {
        return { status: "conflict", message: String(exc.detail) };
      }
      throw exc;
    }
  }

  /**
   * Simulate the saved design, show both stages in the viewer, optionally
   * measure a pair set against the settled stage, and append the iteration to
   * the history. Requires a clean (saved) design so the snapshot in the
   * history is exactly what the service simulated.
   */
  async runAndView(
    measure?: {
      documentName: string;
      references?: PointReferencePair[];
    },
    wait: WaitOptions = {},
  ): Promise<RunResult> {
    const open = this.openDesign;
    if (open.dirty) {
      throw new Error("design has unsaved changes; save before running");
    }
    const run = await this.client.simulateDesign(open.name, wait);
    if (this.viewer) {
      this.viewer.setStages({ a: run.meshA, b: run.meshB });
    }
    const stateRef = `${run.record.id}-b`;
    let report: AccuracyReport | null = null;
    if (measure) {
      if (measure.references) {
        this.pairs = measure.references.slice();
        await this.client.putDocument(
          "measurements",
          measure.documentName,
          referencesCsv(measure.references),
        );
      }
      report = (await this.client.measureState(stateRef, measure.documentName, wait)).report;
    }
    const entry: IterationEntry = Object.freeze({
      sequence: this.entries.length + 1,
      designName: open.name,
      designSnapshot: serializeDesign(open.design),
      jobId: run.record.id,
      stateRef,
      report,
      accuracySummary: report ? formatSummaryLine(report) : null,
    });
    this.entries.push(entry);
    return { record: run.record, entry };
  }

  /** Check the history invariant: every entry's state is fetchable. */
  async historyResolves(): Promise<boolean> {
    for (const entry of this.entries) {
      await this.client.getState(entry.stateRef);
    }
    return true;
  }
}
