/**
 * Pure overlay geometry and text-span logic.
 *
 * The service returns entities (label, pixel box, optional mask id) and
 * matches (entity index, character span into the reply). This module turns
 * those into renderable pieces: reply text cut into plain/highlighted
 * segments, and percent-based box positions that survive display scaling.
 */

import type { Box, WireMatch } from "./types.js";

export interface Segment {
  text: string;
  entityIndex: number | null;
}

/**
 * Cut reply text into segments, tagging each matched span with its entity.
 * Spans are clamped to the text, sorted by start; overlapping spans keep the
 * earlier one. An entity mentioned twice yields two tagged segments.
 */
export function segmentReply(text: string, matches: WireMatch[]): Segment[] {
  const spans = matches
    .map((m) => ({
      start: Math.max(0, m.span[0]),
      end: Math.min(text.length, m.span[1]),
      entityIndex: m.entity_index,
    }))
    .filter((s) => s.start < s.end)
    .sort((a, b) => a.start - b.start || b.end - a.end);

  const out: Segment[] = [];
  let cursor = 0;
  for (const span of spans) {
    if (span.start < cursor) continue; // overlaps a span already emitted
    if (span.start > cursor) out.push({ text: text.slice(cursor, span.start), entityIndex: null });
    out.push({ text: text.slice(span.start, span.end), entityIndex: span.entityIndex });
    cursor = span.end;
  }
  if (cursor < text.length) out.push({ text: text.slice(cursor), entityIndex: null });
  return out;
}

export interface PercentRect {
  left: string;
  top: string;
  width: string;
  height: string;
}

/** Pixel box -> percentages of the image, so CSS scaling keeps it aligned. */
export function boxPercent(box: Box, imageWidth: number, imageHeight: number): PercentRect {
  const pct = (v: number, total: number) => `${((v / total) * 100).toFixed(4)}%`;
  return {
    left: pct(box.x_min, imageWidth),
    top: pct(box.y_min, imageHeight),
    width: pct(box.x_max - box.x_min, imageWidth),
    height: pct(box.y_max - box.y_min, imageHeight),
  };
}

// one tint per entity index, cycling; alpha baked in for the mask fill
const PALETTE = [
  "rgba(59, 130, 246, 0.55)",
  "rgba(234, 88, 12, 0.55)",
  "rgba(22, 163, 74, 0.55)",
  "rgba(168, 85, 247, 0.55)",
  "rgba(220, 38, 38, 0.55)",
  "rgba(8, 145, 178, 0.55)",
];

export function entityColor(index: number): string {
  return PALETTE[((index % PALETTE.length) + PALETTE.length) % PALETTE.length] as string;
}
