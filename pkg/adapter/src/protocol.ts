/**
 * Wire protocol types and canonical JSON serialization.
 *
 * The protocol is documented bit-exactly in ../docs/protocol.md; golden
 * fixtures in ../docs/protocol/goldens are shared with the engine's test
 * suite, so serialization here must match the engine byte for byte.
 */

import { createHash } from "node:crypto";

export const PROTO_VERSION = 1;

export interface WireToken {
  text: string;
  start: number;
  end: number;
}

export interface WireSentence {
  text: string;
  tokens: WireToken[];
}

export interface PredictRequest {
  proto_version: number;
  request_id: string;
  doc_id: string;
  language_code: string;
  sentences: WireSentence[];
  op?: string;
}

export interface PredictResponse {
  proto_version: number;
  request_id: string;
  model_id: string;
  latency_ms: number;
  sentences: { tags: string[] }[];
}

export interface ErrorResponse {
  proto_version: number;
  error: {
    code: string;
    message: string;
    sentence_index?: number;
  };
}

export interface HealthResponse {
  proto_version: number;
  model_id: string;
  label_set_hash: string;
  max_batch: number;
  labels: string[];
}

/** Canonical JSON: keys sorted, no whitespace, UTF-8 unescaped. */
export function canonicalJson(value: unknown): string {
  return JSON.stringify(sortKeys(value));
}

function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeys);
  }
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as Record<string, unknown>).sort()) {
      out[key] = sortKeys((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

/**
 * Hash of the sorted canonical model label names joined by newlines,
 * lowercase hex SHA-256. Must equal the engine's hash for the same labels.
 */
export function labelSetHash(labels: string[]): string {
  const payload = [...labels].sort().join("\n");
  return createHash("sha256").update(payload, "utf8").digest("hex");
}

export function errorResponse(
  code: string,
  message: string,
  sentenceIndex?: number,
): ErrorResponse {
  const error: ErrorResponse["error"] = { code, message };
  if (sentenceIndex !== undefined) {
    error.sentence_index = sentenceIndex;
  }
  return { proto_version: PROTO_VERSION, error };
}
