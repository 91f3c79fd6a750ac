#!/usr/bin/env node
/**
 * Start one adapter process.
 *
 *   ref-adapters --task transcribe --model <id> --engine command \
 *       --command 'my-asr --model {model} --audio {audio}'
 *   ref-adapters --task align --engine stub
 *
 * No model is hardcoded; the model id and the wrapping command are arguments.
 * With --engine command the template's {audio}/{model} placeholders are
 * substituted and any request text is piped to the child's stdin; the child
 * prints {"text": ...} or {"words": [...]} on stdout.
 */

import { CommandEngine, StubEngine } from "./engines.js";
import { TASKS, Task } from "./protocol.js";
import { serve } from "./server.js";

interface Args {
  task: Task;
  engine: "stub" | "command";
  model: string;
  command?: string;
  timeoutMs: number;
}

function parseArgs(argv: string[]): Args {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const key = argv[i];
    if (!key.startsWith("--")) {
      throw new Error(`unexpected argument ${key}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`missing value for ${key}`);
    }
    args[key.slice(2)] = value;
    i++;
  }
  const task = args["task"] as Task;
  if (!TASKS.includes(task)) {
    throw new Error(`--task must be one of ${TASKS.join(", ")}`);
  }
  const engine = (args["engine"] ?? "stub") as Args["engine"];
  if (engine !== "stub" && engine !== "command") {
    throw new Error("--engine must be stub or command");
  }
  if (engine === "command" && !args["command"]) {
    throw new Error("--engine command requires --command <template>");
  }
  return {
    task,
    engine,
    model: args["model"] ?? "stub",
    command: args["command"],
    timeoutMs: args["timeout-ms"] ? Number(args["timeout-ms"]) : 300_000,
  };
}

async function main(): Promise<void> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    console.error(
      "usage: ref-adapters --task <transcribe|punctuate|normalize_numbers|align> " +
        "[--engine stub|command] [--model <id>] [--command <template>] [--timeout-ms <n>]",
    );
    process.exit(2);
  }
  const engine =
    args.engine === "stub"
      ? new StubEngine()
      : new CommandEngine({ template: args.command!, model: args.model, timeoutMs: args.timeoutMs });
  await serve({ role: args.task, engine });
}

main().catch((err) => {
  console.error("fatal:", err);
  process.exit(1);
});
