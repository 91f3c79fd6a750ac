/**
 * Model engines behind the adapter servers.
 *
 * CommandEngine wraps a real model CLI: the command template gets {audio} and
 * {model} substituted, any request text arrives on the child's stdin, and the
 * child must print a JSON object on stdout ({"text": ...} for text tasks,
 * {"words": [{"w","s","e"}, ...]} for alignment). StubEngine is the
 * deterministic offline fallback used by the conformance tests.
 */

import { spawn } from "node:child_process";
import { basename } from "node:path";

import type { AlignedWord } from "./protocol.js";
import { readWavInfo } from "./wav.js";

export interface Engine {
  transcribe(audioPath: string): Promise<string>;
  punctuate(text: string): Promise<string>;
  normalizeNumbers(text: string): Promise<string>;
  align(audioPath: string, text: string): Promise<AlignedWord[]>;
}

export class StubEngine implements Engine {
  async transcribe(audioPath: string): Promise<string> {
    const info = await readWavInfo(audioPath);
    const stem = basename(audioPath).replace(/\.[^.]*$/, "").replace(/[^\p{L}\p{N}]+/gu, " ").trim();
    const tenths = Math.round(info.durationS * 10);
    return `${stem || "ban ghi"} dai ${tenths} phan muoi giay`;
  }

  async punctuate(text: string): Promise<string> {
    const trimmed = text.trim();
    if (!trimmed) return "";
    const capped = trimmed[0].toUpperCase() + trimmed.slice(1);
    return /[.!?]$/.test(capped) ? capped : capped + ".";
  }

  async normalizeNumbers(text: string): Promise<string> {
    return text;
  }

  async align(audioPath: string, text: string): Promise<AlignedWord[]> {
    const words = text.split(/\s+/).filter((w) => w.length > 0);
    if (words.length === 0) throw new Error("empty text for alignment");
    const info = await readWavInfo(audioPath);
    const step = info.durationS / words.length;
    return words.map((w, i) => ({
      w,
      s: round3(i * step),
      e: round3(i === words.length - 1 ? info.durationS : (i + 1) * step),
    }));
  }
}

function round3(x: number): number {
  return Math.round(x * 1000) / 1000;
}

export interface CommandEngineOptions {
  /** Template with {audio} and {model} placeholders, run via the shell. */
  template: string;
  model: string;
  timeoutMs?: number;
}

export class CommandEngine implements Engine {
  constructor(private readonly options: CommandEngineOptions) {}

  private async run(audioPath: string | null, text: string | null): Promise<unknown> {
    const cmd = this.options.template
      .replaceAll("{audio}", audioPath ? shellQuote(audioPath) : "")
      .replaceAll("{model}", shellQuote(this.options.model));
    const stdout = await runShell(cmd, text ?? "", this.options.timeoutMs ?? 300_000);
    try {
      return JSON.parse(stdout);
    } catch {
      // Tolerate plain-text transcribers.
      return { text: stdout.trim() };
    }
  }

  async transcribe(audioPath: string): Promise<string> {
    return expectText(await this.run(audioPath, null));
  }

  async punctuate(text: string): Promise<string> {
    return expectText(await this.run(null, text));
  }

  async normalizeNumbers(text: string): Promise<string> {
    return expectText(await this.run(null, text));
  }

  async align(audioPath: string, text: string): Promise<AlignedWord[]> {
    const payload = await this.run(audioPath, text);
    if (payload && typeof payload === "object" && Array.isArray((payload as any).words)) {
      return (payload as any).words as AlignedWord[];
    }
    throw new Error("model command did not produce a words array");
  }
}

function expectText(payload: unknown): string {
  if (payload && typeof payload === "object" && typeof (payload as any).text === "string") {
    return (payload as any).text;
  }
  throw new Error("model command did not produce a text field");
}

function shellQuote(value: string): string {
  return "'" + value.replaceAll("'", "'\\''") + "'";
}

function runShell(cmd: string, stdin: string, timeoutMs: number): Promise<string> {
  return new Promise((resolve, reject) => {
    const child = spawn("/bin/sh", ["-c", cmd], { stdio: ["pipe", "pipe", "inherit"] });
    const chunks: Buffer[] = [];
    const timer = setTimeout(() => {
      child.kill("SIGKILL");
      reject(new Error(`model command timed out after ${timeoutMs}ms`));
    }, timeoutMs);
    child.stdout.on("data", (chunk: Buffer) => chunks.push(chunk));
    child.on("error", (err) => {
      clearTimeout(timer);
      reject(err);
    });
    child.on("close", (code) => {
      clearTimeout(timer);
      if (code !== 0) {
        reject(new Error(`model command exited with code ${code}`));
        return;
      }
      resolve(Buffer.concat(chunks).toString("utf-8"));
    });
    child.stdin.write(stdin);
    child.stdin.end();
  });
}
