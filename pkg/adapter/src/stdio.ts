/**
 * NDJSON transport: one JSON message per line on stdin/stdout.
 *
 * Requests route on their "op" field ("predict" or "health"). Any line the
 * adapter cannot handle is answered with a structured error line; the loop
 * never exits on bad input, only on EOF.
 */

import { createInterface } from "node:readline";

import { configFromCli, handleHealth, handlePredict, parseCliArgs } from "./adapter.js";
import { canonicalJson, errorResponse } from "./protocol.js";

async function main(): Promise<void> {
  const options = parseCliArgs(process.argv.slice(2));
  const config = await configFromCli(options);
  const lines = createInterface({ input: process.stdin, crlfDelay: Infinity });
  for await (const line of lines) {
    if (!line.trim()) {
      continue;
    }
    let response: unknown;
    try {
      const payload = JSON.parse(line);
      if (payload.op === "health") {
        response = handleHealth(config);
      } else if (payload.op === "predict") {
        response = await handlePredict(payload, config);
      } else {
        response = errorResponse("bad_request", `unknown op ${JSON.stringify(payload.op)}`);
      }
    } catch (err) {
      response = errorResponse("bad_json", String(err));
    }
    process.stdout.write(canonicalJson(response) + "\n");
  }
}

main().catch((err) => {
  process.stderr.write(`fatal: ${err}\n`);
  process.exit(1);
});
