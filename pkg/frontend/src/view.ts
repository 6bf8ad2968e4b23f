// Presentation logic: turn a wire payload into styled sentence segments.
// The differing material arrives as character spans and is rendered bold;
// a payload with unusable offsets falls back to plain text plus a warning.

import type { NextItem } from "./api.js";

export interface Segment {
  text: string;
  bold: boolean;
}

export interface SentenceView {
  segments: Segment[];
  direction: "rtl" | "auto";
}

export interface PresentationView {
  pairId: string;
  sentenceA: SentenceView;
  sentenceB: SentenceView;
  judged: number;
  total: number;
  batchNumber: number;
  batchCount: number;
  warning: string | null;
}

export const TASK_INSTRUCTIONS =
  "One of these two sentences was written by a bilingual speaker; " +
  "the other one was altered. Pick the sentence the bilingual wrote.";

const RTL_CHARS = /[֐-ࣿיִ-﷿ﹰ-﻿]/;

export function detectDirection(text: string): "rtl" | "auto" {
  return RTL_CHARS.test(text) ? "rtl" : "auto";
}

export function segmentize(
  text: string,
  span: [number, number] | null | undefined,
): { segments: Segment[]; ok: boolean } {
  const plain = { segments: [{ text, bold: false }], ok: false };
  if (!span || span.length !== 2) {
    return plain;
  }
  const [start, end] = span;
  if (!Number.isInteger(start) || !Number.isInteger(end)) {
    return plain;
  }
  if (start < 0 || end > text.length || start >= end) {
    return plain;
  }
  const segments: Segment[] = [];
  if (start > 0) {
    segments.push({ text: text.slice(0, start), bold: false });
  }
  segments.push({ text: text.slice(start, end), bold: true });
  if (end < text.length) {
    segments.push({ text: text.slice(end), bold: false });
  }
  return { segments, ok: true };
}

export function renderPair(item: NextItem): PresentationView {
  if (item.status !== "item" || !item.pair_id) {
    throw new Error("renderPair needs an item payload");
  }
  const textA = item.sentence_a ?? "";
  const textB = item.sentence_b ?? "";
  const a = segmentize(textA, item.span_a ?? null);
  const b = segmentize(textB, item.span_b ?? null);
  const warning = a.ok && b.ok
    ? null
    : "Could not highlight the differing words; showing plain text.";
  return {
    pairId: item.pair_id,
    sentenceA: { segments: a.segments, direction: detectDirection(textA) },
    sentenceB: { segments: b.segments, direction: detectDirection(textB) },
    judged: item.progress.judged,
    total: item.progress.total,
    batchNumber: item.progress.batch_index + 1,
    batchCount: item.progress.batch_count,
    warning,
  };
}

export function progressLabel(view: PresentationView): string {
  return `${view.judged}/${view.total} · batch ${view.batchNumber} of ${view.batchCount}`;
}
