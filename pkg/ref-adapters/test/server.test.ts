import { PassThrough } from "node:stream";

import { describe, expect, it } from "vitest";

import { StubEngine, type Engine } from "../src/engines.js";
import { HandshakeSchema, ResponseSchema, type Task } from "../src/protocol.js";
import { serve } from "../src/server.js";
import { tempWav } from "./helpers.js";

/** Drive serve() in-process: feed lines, collect emitted lines. */
async function drive(role: Task, engine: Engine, lines: string[]): Promise<string[]> {
  const input = new PassThrough();
  const output = new PassThrough();
  const done = serve({ role, engine, input, output });
  for (const line of lines) input.write(line + "\n");
  input.end();
  await done;
  return output.read().toString("utf-8").trim().split("\n");
}

describe("serve", () => {
  it("emits a handshake first", async () => {
    const out = await drive("punctuate", new StubEngine(), []);
    expect(HandshakeSchema.parse(JSON.parse(out[0]))).toEqual({ role: "punctuate", version: 1 });
  });

  it("answers punctuate requests", async () => {
    const out = await drive("punctuate", new StubEngine(), [
      JSON.stringify({ id: "p1", task: "punctuate", text: "xin chao ban" }),
    ]);
    const response = ResponseSchema.parse(JSON.parse(out[1]));
    expect(response).toEqual({ id: "p1", text: "Xin chao ban." });
  });

  it("aligns words uniformly over the clip", async () => {
    const wav = tempWav(2.0);
    const out = await drive("align", new StubEngine(), [
      JSON.stringify({ id: "a1", task: "align", audio_path: wav, text: "mot hai ba bon" }),
    ]);
    const response = ResponseSchema.parse(JSON.parse(out[1]));
    expect(response.words!.map((w) => w.w)).toEqual(["mot", "hai", "ba", "bon"]);
    expect(response.words![0]).toEqual({ w: "mot", s: 0, e: 0.5 });
    expect(response.words![3].e).toBe(2.0);
  });

  it("rejects empty align text with an error response", async () => {
    const wav = tempWav(1.0);
    const out = await drive("align", new StubEngine(), [
      JSON.stringify({ id: "a2", task: "align", audio_path: wav, text: "   " }),
    ]);
    const response = ResponseSchema.parse(JSON.parse(out[1]));
    expect(response.error).toMatch(/empty text/);
  });

  it("enforces the word-count contract before emission", async () => {
    const wav = tempWav(1.0);
    const broken: Engine = {
      ...new StubEngine(),
      async align() {
        return [{ w: "solo", s: 0, e: 1 }];
      },
      async transcribe() {
        return "";
      },
      async punctuate(t: string) {
        return t;
      },
      async normalizeNumbers(t: string) {
        return t;
      },
    };
    const out = await drive("align", broken, [
      JSON.stringify({ id: "a3", task: "align", audio_path: wav, text: "hai tu" }),
    ]);
    const response = ResponseSchema.parse(JSON.parse(out[1]));
    expect(response.error).toMatch(/1 words for 2-word text/);
    expect(response.words).toBeUndefined();
  });

  it("rejects requests for another task", async () => {
    const out = await drive("punctuate", new StubEngine(), [
      JSON.stringify({ id: "x", task: "transcribe", audio_path: "a.wav" }),
    ]);
    const response = ResponseSchema.parse(JSON.parse(out[1]));
    expect(response.error).toMatch(/serves punctuate/);
  });

  it("keeps serving after engine failures", async () => {
    const out = await drive("transcribe", new StubEngine(), [
      JSON.stringify({ id: "bad", task: "transcribe", audio_path: "/does/not/exist.wav" }),
      JSON.stringify({ id: "good", task: "transcribe", audio_path: tempWav(1.0) }),
    ]);
    const bad = ResponseSchema.parse(JSON.parse(out[1]));
    const good = ResponseSchema.parse(JSON.parse(out[2]));
    expect(bad.error).toBeTruthy();
    expect(good.text).toBeTruthy();
  });
});
