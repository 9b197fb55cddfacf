/**
 * Request handling shared by both transports.
 *
 * MOCK mode answers from the published deterministic rule and needs no model
 * artifacts. MODEL mode loads a pluggable token classifier (a JS module); the
 * adapter owns the burden of mapping any subword predictions back onto the
 * request's word tokens so the engine stays model-agnostic.
 */

import {
  ENGLISH_MODEL_LABELS,
  MOCK_MAX_BATCH,
  MOCK_MODEL_ID,
  mockTags,
} from "./mockModel.js";
import {
  ErrorResponse,
  HealthResponse,
  PROTO_VERSION,
  PredictRequest,
  PredictResponse,
  errorResponse,
  labelSetHash,
} from "./protocol.js";

/** A pluggable classifier: token texts per sentence in, tags per token out. */
export type TokenClassifier = (sentences: string[][]) => string[][] | Promise<string[][]>;

export interface AdapterConfig {
  mode: "MOCK" | "MODEL";
  labels: string[];
  modelId: string;
  maxBatch: number;
  classifier?: TokenClassifier;
}

export function mockConfig(labels: string[] = ENGLISH_MODEL_LABELS): AdapterConfig {
  return {
    mode: "MOCK",
    labels,
    modelId: MOCK_MODEL_ID,
    maxBatch: MOCK_MAX_BATCH,
  };
}

export interface SubwordPrediction {
  wordIndex: number;
  tag: string;
}

/**
 * Collapse subword-level predictions onto word tokens by first-subword vote:
 * the tag of a word is the tag predicted for its first subword.
 */
export function firstSubwordVote(
  predictions: SubwordPrediction[],
  wordCount: number,
): string[] {
  const tags: string[] = new Array(wordCount).fill("O");
  const seen = new Set<number>();
  for (const prediction of predictions) {
    if (
      prediction.wordIndex >= 0 &&
      prediction.wordIndex < wordCount &&
      !seen.has(prediction.wordIndex)
    ) {
      tags[prediction.wordIndex] = prediction.tag;
      seen.add(prediction.wordIndex);
    }
  }
  return tags;
}

export async function handlePredict(
  payload: PredictRequest,
  config: AdapterConfig,
): Promise<PredictResponse | ErrorResponse> {
  if (payload.proto_version !== PROTO_VERSION) {
    return errorResponse(
      "unsupported_version",
      `unsupported proto_version ${JSON.stringify(payload.proto_version)}`,
    );
  }
  if (!Array.isArray(payload.sentences)) {
    return errorResponse("bad_request", "sentences must be an array");
  }
  if (payload.sentences.length > config.maxBatch) {
    return errorResponse(
      "batch_too_large",
      `${payload.sentences.length} sentences exceed max_batch ${config.maxBatch}`,
    );
  }
  for (let index = 0; index < payload.sentences.length; index += 1) {
    const sentence = payload.sentences[index];
    if (!sentence || !Array.isArray(sentence.tokens)) {
      return errorResponse("bad_request", "sentence missing tokens", index);
    }
  }

  const tokenTexts = payload.sentences.map((s) => s.tokens.map((t) => t.text));
  let tagged: string[][];
  if (config.mode === "MOCK") {
    tagged = tokenTexts.map((texts) => mockTags(texts, config.labels));
  } else {
    if (!config.classifier) {
      return errorResponse("no_model", "MODEL mode without a loaded classifier");
    }
    tagged = await config.classifier(tokenTexts);
  }

  // Never send a response whose tag counts disagree with the request.
  for (let index = 0; index < tokenTexts.length; index += 1) {
    if (!tagged[index] || tagged[index].length !== tokenTexts[index].length) {
      return errorResponse(
        "model_error",
        `classifier produced ${tagged[index]?.length ?? 0} tags for ` +
          `${tokenTexts[index].length} tokens`,
        index,
      );
    }
  }

  return {
    proto_version: PROTO_VERSION,
    request_id: payload.request_id ?? "",
    model_id: config.modelId,
    latency_ms: 0,
    sentences: tagged.map((tags) => ({ tags })),
  };
}

export function handleHealth(config: AdapterConfig): HealthResponse {
  return {
    proto_version: PROTO_VERSION,
    model_id: config.modelId,
    label_set_hash: labelSetHash(config.labels),
    max_batch: config.maxBatch,
    labels: [...config.labels].sort(),
  };
}

export interface CliOptions {
  port: number;
  labelsPath?: string;
  mode: "MOCK" | "MODEL";
  modelPath?: string;
}

export function parseCliArgs(argv: string[]): CliOptions {
  const options: CliOptions = { port: 8601, mode: "MOCK" };
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    if (arg === "--port") {
      options.port = Number(argv[++i]);
    } else if (arg === "--labels") {
      options.labelsPath = argv[++i];
    } else if (arg === "--mode") {
      const value = argv[++i];
      if (value !== "MOCK" && value !== "MODEL") {
        throw new Error(`unknown mode ${value}`);
      }
      options.mode = value;
    } else if (arg === "--model") {
      options.modelPath = argv[++i];
    } else {
      throw new Error(`unknown argument ${arg}`);
    }
  }
  return options;
}

export async function configFromCli(options: CliOptions): Promise<AdapterConfig> {
  let labels = ENGLISH_MODEL_LABELS;
  if (options.labelsPath) {
    const { readFile } = await import("node:fs/promises");
    labels = JSON.parse(await readFile(options.labelsPath, "utf8"));
  }
  if (options.mode === "MODEL") {
    if (!options.modelPath) {
      throw new Error("MODEL mode requires --model <module.js>");
    }
    const loaded = await import(options.modelPath);
    const classifier: TokenClassifier = loaded.default ?? loaded.classify;
    if (typeof classifier !== "function") {
      throw new Error(`${options.modelPath} does not export a classifier`);
    }
    return {
      mode: "MODEL",
      labels,
      modelId: loaded.modelId ?? "custom-model",
      maxBatch: MOCK_MAX_BATCH,
      classifier,
    };
  }
  return mockConfig(labels);
}
