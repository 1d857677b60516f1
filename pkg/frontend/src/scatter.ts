/** PCA scatter rendering: pure scaling/coloring helpers plus an SVG builder.
 *
 * Rendering is string-based SVG so the scaling logic stays testable without a
 * DOM; the app attaches hover handlers after insertion.
 */

import type { PcaPoint, Rating } from './types.js';
import { RATING_COLORS, RATING_ORDER, RATING_TEXT, UNRATED_COLOR } from './types.js';

export interface ViewBox {
  width: number;
  height: number;
  margin: number;
}

export interface ScreenPoint {
  candidateId: string;
  cx: number;
  cy: number;
  color: string;
  rating: Rating | null;
}

export const DEFAULT_VIEW: ViewBox = { width: 560, height: 380, margin: 28 };

export function colorFor(rating: Rating | null | undefined): string {
  return rating ? RATING_COLORS[rating] : UNRATED_COLOR;
}

/**
 * Map data coordinates into the view box, preserving aspect per axis and
 * flipping y (SVG grows downward). A degenerate axis (all equal) centers.
 */
export function projectPoints(points: PcaPoint[], view: ViewBox = DEFAULT_VIEW): ScreenPoint[] {
  if (points.length === 0) return [];
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const innerW = view.width - 2 * view.margin;
  const innerH = view.height - 2 * view.margin;
  const scale = (v: number, lo: number, hi: number, extent: number): number =>
    hi === lo ? extent / 2 : ((v - lo) / (hi - lo)) * extent;
  return points.map((p) => ({
    candidateId: p.candidate_id,
    cx: view.margin + scale(p.x, xMin, xMax, innerW),
    cy: view.height - view.margin - scale(p.y, yMin, yMax, innerH),
    color: colorFor(p.feedback_label),
    rating: p.feedback_label ?? null,
  }));
}

export function legendEntries(): { rating: Rating | null; color: string; text: string }[] {
  const entries: { rating: Rating | null; color: string; text: string }[] = RATING_ORDER.map(
    (rating) => ({ rating, color: RATING_COLORS[rating], text: RATING_TEXT[rating] }),
  );
  entries.push({ rating: null, color: UNRATED_COLOR, text: 'unrated' });
  return entries;
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Build the scatter SVG; `titles` supplies the hover tooltip text per point. */
export function buildScatterSvg(
  points: PcaPoint[],
  titles: Map<string, string>,
  explained: number[],
  view: ViewBox = DEFAULT_VIEW,
): string {
  const screen = projectPoints(points, view);
  const circles = screen
    .map((p) => {
      const title = titles.get(p.candidateId) ?? p.candidateId;
      return (
        `<circle cx="${p.cx.toFixed(1)}" cy="${p.cy.toFixed(1)}" r="5" ` +
        `fill="${p.color}" fill-opacity="0.85" data-id="${escapeXml(p.candidateId)}">` +
        `<title>${escapeXml(title)}</title></circle>`
      );
    })
    .join('');
  const evLabel = explained.length
    ? `PC1 ${(explained[0] * 100).toFixed(1)}% / PC2 ${((explained[1] ?? 0) * 100).toFixed(1)}%`
    : '';
  return (
    `<svg viewBox="0 0 ${view.width} ${view.height}" xmlns="http://www.w3.org/2000/svg">` +
    `<rect width="${view.width}" height="${view.height}" fill="#fafafa" stroke="#e0e0e0"/>` +
    circles +
    `<text x="${view.margin}" y="${view.height - 8}" font-size="11" fill="#616161">` +
    `${escapeXml(evLabel)}</text>` +
    `</svg>`
  );
}
