/** Minimal RIFF/WAV header reading; enough to get a clip's duration. */

import { open } from "node:fs/promises";

export interface WavInfo {
  sampleRateHz: number;
  channels: number;
  bitsPerSample: number;
  frames: number;
  durationS: number;
}

export async function readWavInfo(path: string): Promise<WavInfo> {
  const handle = await open(path, "r");
  try {
    const header = Buffer.alloc(12);
    await handle.read(header, 0, 12, 0);
    if (header.toString("ascii", 0, 4) !== "RIFF" || header.toString("ascii", 8, 12) !== "WAVE") {
      throw new Error(`${path} is not a RIFF/WAVE file`);
    }
    let offset = 12;
    let sampleRateHz = 0;
    let channels = 0;
    let bitsPerSample = 0;
    let dataBytes = -1;
    const chunkHeader = Buffer.alloc(8);
    // Walk chunks until both fmt and data have been seen.
    for (;;) {
      const { bytesRead } = await handle.read(chunkHeader, 0, 8, offset);
      if (bytesRead < 8) break;
      const chunkId = chunkHeader.toString("ascii", 0, 4);
      const chunkSize = chunkHeader.readUInt32LE(4);
      if (chunkId === "fmt ") {
        const fmt = Buffer.alloc(16);
        await handle.read(fmt, 0, 16, offset + 8);
        channels = fmt.readUInt16LE(2);
        sampleRateHz = fmt.readUInt32LE(4);
        bitsPerSample = fmt.readUInt16LE(14);
      } else if (chunkId === "data") {
        dataBytes = chunkSize;
      }
      if (sampleRateHz > 0 && dataBytes >= 0) break;
      offset += 8 + chunkSize + (chunkSize % 2); // chunks are word-aligned
    }
    if (sampleRateHz <= 0 || channels <= 0 || bitsPerSample <= 0 || dataBytes < 0) {
      throw new Error(`${path} is missing fmt or data chunks`);
    }
    const frames = dataBytes / (channels * (bitsPerSample / 8));
    return {
      sampleRateHz,
      channels,
      bitsPerSample,
      frames,
      durationS: frames / sampleRateHz,
    };
  } finally {
    await handle.close();
  }
}
