/**
 * Wire protocol shared with the pipeline: one JSON object per line.
 *
 *   request:  {"id", "task", "audio_path"?, "text"?}
 *   response: {"id", "text"? | "words"? | "error"?}   (exactly one payload)
 *
 * Words carry {"w", "s", "e"} with times in decimal seconds.
 */

import { z } from "zod";

export const TASKS = ["transcribe", "punctuate", "normalize_numbers", "align"] as const;
export type Task = (typeof TASKS)[number];

export const RequestSchema = z
  .object({
    id: z.string().min(1),
    task: z.enum(TASKS),
    audio_path: z.string().optional(),
    text: z.string().optional(),
  })
  .strict();

export type AdapterRequest = z.infer<typeof RequestSchema>;

export const WordSchema = z
  .object({
    w: z.string().min(1),
    s: z.number().nonnegative(),
    e: z.number().nonnegative(),
  })
  .strict();

export type AlignedWord = z.infer<typeof WordSchema>;

export const ResponseSchema = z
  .object({
    id: z.string().min(1),
    text: z.string().optional(),
    words: z.array(WordSchema).optional(),
    error: z.string().optional(),
  })
  .strict()
  .refine(
    (r) => [r.text, r.words, r.error].filter((x) => x !== undefined).length === 1,
    { message: "exactly one of text/words/error must be populated" },
  );

export type AdapterResponse = z.infer<typeof ResponseSchema>;

export const HandshakeSchema = z
  .object({ role: z.enum(TASKS), version: z.number().int().positive() })
  .strict();

export type Handshake = z.infer<typeof HandshakeSchema>;

/** Task-specific required fields; returns a problem description or null. */
export function requestProblem(request: AdapterRequest): string | null {
  if ((request.task === "transcribe" || request.task === "align") && !request.audio_path) {
    return `task ${request.task} requires audio_path`;
  }
  if (
    (request.task === "punctuate" ||
      request.task === "normalize_numbers" ||
      request.task === "align") &&
    request.text === undefined
  ) {
    return `task ${request.task} requires text`;
  }
  return null;
}

/**
 * Alignment output contract: the word sequence must equal the request
 * text's words, and intervals must be sorted, non-overlapping, and ordered
 * start <= end. Returns a problem description or null.
 */
export function wordsProblem(words: AlignedWord[], requestText: string): string | null {
  const expected = requestText.split(/\s+/).filter((w) => w.length > 0);
  if (words.length !== expected.length) {
    return `aligner produced ${words.length} words for ${expected.length}-word text`;
  }
  for (let i = 0; i < words.length; i++) {
    if (words[i].w !== expected[i]) {
      return `word ${i} mismatch: expected ${JSON.stringify(expected[i])}, got ${JSON.stringify(words[i].w)}`;
    }
    if (words[i].s > words[i].e) {
      return `word ${i} has start ${words[i].s} after end ${words[i].e}`;
    }
    if (i > 0 && words[i].s < words[i - 1].e) {
      return `word ${i} overlaps its predecessor`;
    }
  }
  return null;
}
