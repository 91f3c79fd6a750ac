import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { CommandEngine, StubEngine } from "../src/engines.js";
import { readWavInfo } from "../src/wav.js";
import { tempWav, writeWav } from "./helpers.js";

const FAKE = join(__dirname, "fixtures", "fake_model.cjs");


describe("wav header reading", () => {
  it("reads rate, channels, and duration", async () => {
    const path = tempWav(2.5, 16000);
    const info = await readWavInfo(path);
    expect(info.sampleRateHz).toBe(16000);
    expect(info.channels).toBe(1);
    expect(info.durationS).toBeCloseTo(2.5, 6);
  });

  it("rejects non-wav files", async () => {
    const path = tempWav(0.1);
    const bogus = path.replace("clip.wav", "bogus.wav");
    const { writeFileSync } = await import("node:fs");
    writeFileSync(bogus, "not a wav at all");
    await expect(readWavInfo(bogus)).rejects.toThrow(/RIFF/);
  });
});

describe("stub engine", () => {
  it("is deterministic per file", async () => {
    const path = tempWav(1.2);
    const engine = new StubEngine();
    expect(await engine.transcribe(path)).toBe(await engine.transcribe(path));
  });

  it("punctuates without editing words", async () => {
    const engine = new StubEngine();
    expect(await engine.punctuate("xin chao ban")).toBe("Xin chao ban.");
    expect(await engine.punctuate("")).toBe("");
  });
});

describe("command engine", () => {
  it("substitutes {model} and pipes text on stdin", async () => {
    const engine = new CommandEngine({
      template: `node ${FAKE} text {model}`,
      model: "demo-v1",
    });
    expect(await engine.punctuate("xin chao")).toBe("[demo-v1] xin chao");
  });

  it("parses words arrays for alignment", async () => {
    const engine = new CommandEngine({
      template: `node ${FAKE} align {model}`,
      model: "demo-v1",
    });
    const words = await engine.align("unused.wav", "mot hai ba");
    expect(words).toEqual([
      { w: "mot", s: 0, e: 0.5 },
      { w: "hai", s: 0.5, e: 1.0 },
      { w: "ba", s: 1.0, e: 1.5 },
    ]);
  });

  it("tolerates plain-text transcribers", async () => {
    const engine = new CommandEngine({
      template: `node ${FAKE} plain {model}`,
      model: "demo-v1",
    });
    expect(await engine.transcribe(tempWav(0.2))).toBe("plain transcript from demo-v1");
  });

  it("surfaces nonzero exits as errors", async () => {
    const engine = new CommandEngine({ template: `node ${FAKE} explode {model}`, model: "m" });
    await expect(engine.punctuate("x")).rejects.toThrow(/exited with code 3/);
  });
});
