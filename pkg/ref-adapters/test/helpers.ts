import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Write a mono PCM16 silence WAV of the given duration. */
export function writeWav(path: string, seconds: number, rateHz = 16000): void {
  const frames = Math.round(seconds * rateHz);
  const dataBytes = frames * 2;
  const buffer = Buffer.alloc(44 + dataBytes);
  buffer.write("RIFF", 0, "ascii");
  buffer.writeUInt32LE(36 + dataBytes, 4);
  buffer.write("WAVE", 8, "ascii");
  buffer.write("fmt ", 12, "ascii");
  buffer.writeUInt32LE(16, 16);
  buffer.writeUInt16LE(1, 20); // PCM
  buffer.writeUInt16LE(1, 22); // mono
  buffer.writeUInt32LE(rateHz, 24);
  buffer.writeUInt32LE(rateHz * 2, 28);
  buffer.writeUInt16LE(2, 32);
  buffer.writeUInt16LE(16, 34);
  buffer.write("data", 36, "ascii");
  buffer.writeUInt32LE(dataBytes, 40);
  writeFileSync(path, buffer);
}

export function tempWav(seconds: number, rateHz = 16000): string {
  const dir = mkdtempSync(join(tmpdir(), "refadapters-"));
  const path = join(dir, "clip.wav");
  writeWav(path, seconds, rateHz);
  return path;
}
