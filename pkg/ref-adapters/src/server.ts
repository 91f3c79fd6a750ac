/**
 * JSON-lines adapter server: reads requests from stdin, writes responses to
 * stdout, one request in flight at a time.
 *
 * Startup emits a handshake line {"role", "version"}. A malformed request
 * line yields an error response when an id can be recovered, otherwise a
 * protocol-error line (an object without "id" that clients are expected to
 * skip). No request ever crashes the process; every emitted response is
 * schema-validated, and align responses additionally satisfy the word-count
 * and interval contract before they leave the process.
 */

import * as readline from "node:readline";

import type { Engine } from "./engines.js";
import {
  AdapterResponse,
  RequestSchema,
  ResponseSchema,
  Task,
  requestProblem,
  wordsProblem,
} from "./protocol.js";

export interface ServeOptions {
  role: Task;
  engine: Engine;
  input?: NodeJS.ReadableStream;
  output?: NodeJS.WritableStream;
}

export const PROTOCOL_VERSION = 1;

export async function serve(options: ServeOptions): Promise<void> {
  const input = options.input ?? process.stdin;
  const output = options.output ?? process.stdout;

  const emit = (payload: object) => {
    output.write(JSON.stringify(payload) + "\n");
  };
  const emitResponse = (response: AdapterResponse) => {
    emit(ResponseSchema.parse(response));
  };

  emit({ role: options.role, version: PROTOCOL_VERSION });

  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  for await (const line of rl) {
    const trimmed = line.trim();
    if (!trimmed) continue;

    let raw: unknown;
    try {
      raw = JSON.parse(trimmed);
    } catch {
      emit({ error: "protocol: unparseable request line" });
      continue;
    }
    const recoveredId =
      raw && typeof raw === "object" && typeof (raw as any).id === "string"
        ? ((raw as any).id as string)
        : null;

    const parsed = RequestSchema.safeParse(raw);
    if (!parsed.success) {
      if (recoveredId) {
        emitResponse({ id: recoveredId, error: `protocol: ${parsed.error.issues[0]?.message}` });
      } else {
        emit({ error: "protocol: request does not match schema" });
      }
      continue;
    }
    const request = parsed.data;
    if (request.task !== options.role) {
      emitResponse({ id: request.id, error: `this adapter serves ${options.role}, not ${request.task}` });
      continue;
    }
    const problem = requestProblem(request);
    if (problem) {
      emitResponse({ id: request.id, error: problem });
      continue;
    }

    try {
      emitResponse(await handle(options.role, options.engine, request));
    } catch (err) {
      emitResponse({ id: request.id, error: String(err instanceof Error ? err.message : err) });
    }
  }
}

async function handle(
  role: Task,
  engine: Engine,
  request: { id: string; audio_path?: string; text?: string },
): Promise<AdapterResponse> {
  switch (role) {
    case "transcribe":
      return { id: request.id, text: await engine.transcribe(request.audio_path!) };
    case "punctuate":
      return { id: request.id, text: await engine.punctuate(request.text!) };
    case "normalize_numbers":
      return { id: request.id, text: await engine.normalizeNumbers(request.text!) };
    case "align": {
      const words = await engine.align(request.audio_path!, request.text!);
      const problem = wordsProblem(words, request.text!);
      if (problem) {
        return { id: request.id, error: problem };
      }
      return { id: request.id, words };
    }
  }
}
