/**
 * Replay server for the golden network-intercept tests.
 *
 * `manifest.json` holds request/response exchanges captured from the real
 * workbench service (see golden/capture.py). GoldenServer hands the studio a
 * fetch implementation that serves only those recorded responses, keyed by
 * method + path + body (and If-Match for PUTs), so:
 *
 *  - every number a test sees necessarily came from the service, and
 *  - every PUT body is byte-checked against what the service actually
 *    received, proving the studio writes the same bytes.
 *
 * Requests with several recorded responses (re-fetched documents, job polls)
 * are served first-in-first-out, repeating the last response once the queue
 * drains, which is how a stable terminal job record behaves.
 */
import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

import type { FetchLike } from "../src/api.js";

export interface Exchange {
  key: string;
  method: string;
  path: string;
  if_match: string | null;
  request_body_b64: string | null;
  status: number;
  content_type: string | null;
  etag: string | null;
  response_body_b64: string;
  synthetic: boolean;
}

const MANIFEST_URL = new URL("./golden/manifest.json", import.meta.url);

export function loadManifest(): Exchange[] {
  return JSON.parse(readFileSync(MANIFEST_URL, "utf-8")) as Exchange[];
}

export function responseJson<T = any>(exchange: Exchange): T {
  return JSON.parse(Buffer.from(exchange.response_body_b64, "base64").toString("utf-8")) as T;
}

export function requestText(exchange: Exchange): string {
  if (exchange.request_body_b64 === null) {
    throw new Error(`exchange ${exchange.key} recorded no request body`);
  }
  return Buffer.from(exchange.request_body_b64, "base64").toString("utf-8");
}

function deepSort(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(deepSort);
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as Record<string, unknown>).sort()) {
      out[key] = deepSort((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

/** Same canonical form capture.py uses to key POST bodies. */
export function canonicalJson(text: string): string {
  return JSON.stringify(deepSort(JSON.parse(text)));
}

export function keyFor(method: string, path: string, body: string | null, ifMatch: string | null): string {
  if (method === "GET") return `GET ${path}`;
  if (method === "PUT") {
    const digest = createHash("sha256").update(Buffer.from(body ?? "", "utf-8")).digest("hex");
    return `PUT ${path} if-match=${ifMatch ?? ""} body=${digest}`;
  }
  if (method === "POST") return `POST ${path} ${canonicalJson(body ?? "{}")}`;
  throw new Error(`unsupported method ${method}`);
}

export class GoldenServer {
  readonly manifest: Exchange[];
  private readonly queues = new Map<string, Exchange[]>();
  private readonly cursors = new Map<string, number>();
  /** Every replay key served, in order — the audit trail of studio traffic. */
  readonly served: string[] = [];

  constructor(manifest: Exchange[] = loadManifest()) {
    this.manifest = manifest;
    for (const exchange of manifest) {
      const queue = this.queues.get(exchange.key);
      if (queue) queue.push(exchange);
      else this.queues.set(exchange.key, [exchange]);
    }
  }

  /** All recorded exchanges for a method + path, in capture order. */
  findAll(method: string, path: string): Exchange[] {
    return this.manifest.filter((e) => e.method === method && e.path === path);
  }

  /** The terminal (non-synthetic) record of the job a POST body maps to. */
  finalJobRecord(postBody: { kind: string; inputs: unknown; options?: unknown }): any {
    const key = `POST /jobs ${canonicalJson(JSON.stringify({ options: {}, ...postBody }))}`;
    const queue = this.queues.get(key);
    if (!queue) throw new Error(`no recorded job for ${key}`);
    const id = responseJson(queue[0]!).id as string;
    const finals = this.findAll("GET", `/jobs/${id}`).filter((e) => !e.synthetic);
    if (!finals.length) throw new Error(`no terminal record for job ${id}`);
    return responseJson(finals[finals.length - 1]!);
  }

  private explainMiss(method: string, path: string, key: string): never {
    const near = this.manifest.filter((e) => e.method === method && e.path === path).map((e) => e.key);
    const hint = near.length
      ? `recorded keys for ${method} ${path}:\n  ${near.join("\n  ")}`
      : `nothing recorded for ${method} ${path}`;
    throw new Error(`studio sent unrecorded traffic: ${key}\n${hint}`);
  }

  private next(key: string, method: string, path: string): Exchange {
    const queue = this.queues.get(key);
    if (!queue) this.explainMiss(method, path, key);
    const cursor = this.cursors.get(key) ?? 0;
    const exchange = queue[Math.min(cursor, queue.length - 1)]!;
    this.cursors.set(key, cursor + 1);
    this.served.push(key);
    return exchange;
  }

  /** How many responses were served for keys starting with a prefix. */
  servedCount(prefix: string): number {
    return this.served.filter((key) => key.startsWith(prefix)).length;
  }

  makeFetch(): FetchLike {
    return async (url: string, init?: RequestInit): Promise<Response> => {
      const method = (init?.method ?? "GET").toUpperCase();
      const path = new URL(url).pathname;
      let body: string | null = null;
      if (init?.body !== undefined && init?.body !== null) {
        if (typeof init.body !== "string") {
          throw new Error("golden fetch only handles string request bodies");
        }
        body = init.body;
      }
      const headers = new Headers(init?.headers);
      const ifMatch = headers.get("If-Match");
      const key = keyFor(method, path, body, ifMatch);
      const exchange = this.next(key, method, path);
      if (method === "PUT") {
        // The key already hashes the body; compare bytes anyway so a failure
        // reports the first diverging content instead of a missing key.
        const recorded = requestText(exchange);
        if (recorded !== body) {
          throw new Error(`PUT ${path}: body differs from the recorded bytes`);
        }
      }
      const responseHeaders = new Headers();
      if (exchange.content_type) responseHeaders.set("Content-Type", exchange.content_type);
      if (exchange.etag) responseHeaders.set("ETag", exchange.etag);
      return new Response(Buffer.from(exchange.response_body_b64, "base64"), {
        status: exchange.status,
        headers: responseHeaders,
      });
    };
  }
}
