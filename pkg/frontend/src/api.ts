/**
 * Typed client for the workbench HTTP JSON API. All responses are validated
 * against the shared schemas; all numeric results flow through untouched.
 */
import {
  AccuracyReport,
  DeformedMesh,
  DeformedMeshSchema,
  DeformedState,
  DeformedStateSchema,
  DocumentListSchema,
  JobKind,
  JobRecord,
  JobRecordSchema,
  PutResult,
  PutResultSchema,
  ReportOutputsSchema,
  SimulateOutputsSchema,
} from "./schemas.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export type DocumentCategory = "materials" | "designs" | "observations" | "measurements";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
    message?: string,
  ) {
    super(message ?? `API error ${status}: ${JSON.stringify(detail)}`);
    this.name = "ApiError";
  }
}

/** 409 on PUT: someone else changed the document since we fetched it. */
export class ConflictError extends ApiError {
  constructor(status: number, detail: unknown) {
    super(status, detail, `document changed on the server: ${String(detail)}`);
    this.name = "ConflictError";
  }
}

/** 422 on PUT or job submission: the service rejected the document. */
export class ValidationRejection extends ApiError {
  constructor(status: number, detail: unknown) {
    super(status, detail, String(detail));
    this.name = "ValidationRejection";
  }
}

/** A submitted job finished with status "failed". */
export class JobFailedError extends Error {
  constructor(
    readonly jobId: string,
    readonly logExcerpt: string,
  ) {
    super(`job ${jobId} failed:\n${logExcerpt}`);
    this.name = "JobFailedError";
  }
}

async function errorDetail(response: Response): Promise<unknown> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    return body.detail ?? body;
  } catch {
    return response.statusText;
  }
}

export interface WaitOptions {
  pollMs?: number;
  timeoutMs?: number;
}

export class WorkbenchClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => globalThis.fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.url(path), init);
    if (response.ok) return response;
    const detail = await errorDetail(response);
    if (response.status === 409) throw new ConflictError(response.status, detail);
    if (response.status === 422) throw new ValidationRejection(response.status, detail);
    throw new ApiError(response.status, detail);
  }

  // --- documents ------------------------------------------------------------

  async listDocuments(category: DocumentCategory): Promise<string[]> {
    const response = await this.request(`/${category}`);
    return DocumentListSchema.parse(await response.json()).names;
  }

  /** Raw document bytes plus the server's content ETag. */
  async getDocument(
    category: DocumentCategory,
    name: string,
  ): Promise<{ text: string; etag: string }> {
    const response = await this.request(`/${category}/${name}`);
    const etag = response.headers.get("ETag") ?? "";
    return { text: await response.text(), etag };
  }

  async putDocument(
    category: DocumentCategory,
    name: string,
    body: string,
    ifMatch?: string,
  ): Promise<PutResult> {
    const headers: Record<string, string> = {};
    if (ifMatch) headers["If-Match"] = ifMatch;
    const response = await this.request(`/${category}/${name}`, {
      method: "PUT",
      headers,
      body,
    });
    return PutResultSchema.parse(await response.json());
  }

  // --- jobs -------------------------------------------------------------------

  async postJob(
    kind: JobKind,
    inputs: Record<string, unknown>,
    options: Record<string, unknown> = {},
  ): Promise<JobRecord> {
    const response = await this.request("/jobs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ kind, inputs, options }),
    });
    return JobRecordSchema.parse(await response.json());
  }

  async getJob(jobId: string): Promise<JobRecord> {
    const response = await this.request(`/jobs/${jobId}`);
    return JobRecordSchema.parse(await response.json());
  }

  /** Poll until the job reaches a terminal state; throw on failure. */
  async waitForJob(record: JobRecord, options: WaitOptions = {}): Promise<JobRecord> {
    const pollMs = options.pollMs ?? 250;
    const deadline = Date.now() + (options.timeoutMs ?? 300_000);
    let current = record;
    while (current.job.status === "queued" || current.job.status === "running") {
      if (Date.now() > deadline) {
        throw new Error(`timed out waiting for job ${current.id}`);
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
      current = await this.getJob(current.id);
    }
    if (current.job.status === "failed") {
      throw new JobFailedError(current.id, current.job.log);
    }
    return current;
  }

  // --- results ----------------------------------------------------------------

  async getState(stateId: string): Promise<DeformedState> {
    const response = await this.request(`/states/${stateId}`);
    return DeformedStateSchema.parse(await response.json());
  }

  async getStateMesh(stateId: string): Promise<DeformedMesh> {
    const response = await this.request(`/states/${stateId}/mesh`);
    return DeformedMeshSchema.parse(await response.json());
  }

  // --- high-level flows ---------------------------------------------------------

  /** Run a simulate job to completion and fetch both stage results. */
  async simulateDesign(
    designName: string,
    options: WaitOptions & { jobOptions?: Record<string, unknown> } = {},
  ): Promise<{
    record: JobRecord;
    stageA: DeformedState;
    stageB: DeformedState;
    meshA: DeformedMesh;
    meshB: DeformedMesh;
  }> {
    const submitted = await this.postJob("simulate", { design: designName }, options.jobOptions ?? {});
    const record = await this.waitForJob(submitted, options);
    SimulateOutputsSchema.parse(record.job.outputs);
    const [stageA, stageB, meshA, meshB] = await Promise.all([
      this.getState(`${record.id}-a`),
      this.getState(`${record.id}-b`),
      this.getStateMesh(`${record.id}-a`),
      this.getStateMesh(`${record.id}-b`),
    ]);
    return { record, stageA, stageB, meshA, meshB };
  }

  /** Measure stored point references against a simulated state. */
  async measureState(
    stateId: string,
    measurementsName: string,
    options: WaitOptions = {},
  ): Promise<{ record: JobRecord; report: AccuracyReport }> {
    const submitted = await this.postJob("measure", {
      state: stateId,
      measurements: measurementsName,
    });
    const record = await this.waitForJob(submitted, options);
    const outputs = ReportOutputsSchema.parse(record.job.outputs);
    return { record, report: outputs.report_doc };
  }

  /** Pool one or more measurement documents into a single report. */
  async poolReport(
    measurementNames: string[],
    options: WaitOptions = {},
  ): Promise<{ record: JobRecord; report: AccuracyReport }> {
    const submitted = await this.postJob("report", { measurements: measurementNames });
    const record = await this.waitForJob(submitted, options);
    const outputs = ReportOutputsSchema.parse(record.job.outputs);
    return { record, report: outputs.report_doc };
  }
}
