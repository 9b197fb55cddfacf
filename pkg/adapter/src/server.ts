/**
 * HTTP transport: POST /v1/predict, GET /v1/health.
 *
 * Responses use canonical JSON. Protocol violations are answered with a
 * structured error object, never by dropping the connection. Prints
 * "listening on <port>" to stdout once bound (port 0 picks a free port).
 */

import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";

import { AdapterConfig, configFromCli, handleHealth, handlePredict, parseCliArgs } from "./adapter.js";
import { canonicalJson, errorResponse } from "./protocol.js";

function send(res: ServerResponse, status: number, payload: unknown): void {
  const body = canonicalJson(payload) + "\n";
  res.writeHead(status, {
    "Content-Type": "application/json; charset=utf-8",
    "Content-Length": Buffer.byteLength(body),
  });
  res.end(body);
}

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (chunk) => chunks.push(chunk));
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf8")));
    req.on("error", reject);
  });
}

export function buildServer(config: AdapterConfig): Server {
  return createServer(async (req, res) => {
    try {
      if (req.method === "GET" && req.url === "/v1/health") {
        send(res, 200, handleHealth(config));
        return;
      }
      if (req.method === "POST" && req.url === "/v1/predict") {
        const body = await readBody(req);
        let payload;
        try {
          payload = JSON.parse(body);
        } catch {
          send(res, 400, errorResponse("bad_json", "request body is not valid JSON"));
          return;
        }
        const response = await handlePredict(payload, config);
        send(res, "error" in response ? 400 : 200, response);
        return;
      }
      send(res, 404, errorResponse("not_found", `no route ${req.method} ${req.url}`));
    } catch (err) {
      send(res, 500, errorResponse("internal", String(err)));
    }
  });
}

async function main(): Promise<void> {
  const options = parseCliArgs(process.argv.slice(2));
  const config = await configFromCli(options);
  const server = buildServer(config);
  server.listen(options.port, "127.0.0.1", () => {
    const address = server.address();
    const port = typeof address === "object" && address ? address.port : options.port;
    process.stdout.write(`listening on ${port}\n`);
  });
}

if (import.meta.url === `file://${process.argv[1]}`) {
  main().catch((err) => {
    process.stderr.write(`fatal: ${err}\n`);
    process.exit(1);
  });
}
