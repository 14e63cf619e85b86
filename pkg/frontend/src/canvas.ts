/** Canvas gesture helpers: turning drags into metadata rectangles and
 *  drawing the annotation overlay. Pure geometry lives here so it can be
 *  unit-tested without a DOM. */

import type { Rect } from './types.js';

export interface Point {
  x: number;
  y: number;
}

/** Normalize a drag (any corner to any corner) into an integer Rect,
 *  or null when the dragged area is empty along either axis. */
export function dragToRect(start: Point, end: Point): Rect | null {
  const x = Math.round(Math.min(start.x, end.x));
  const y = Math.round(Math.min(start.y, end.y));
  const w = Math.round(Math.abs(end.x - start.x));
  const h = Math.round(Math.abs(end.y - start.y));
  if (w === 0 || h === 0) {
    return null;
  }
  return [x, y, w, h];
}

export function rectsOverlap(a: Rect, b: Rect): boolean {
  const [ax, ay, aw, ah] = a;
  const [bx, by, bw, bh] = b;
  return ax < bx + bw && bx < ax + aw && ay < by + bh && by < ay + ah;
}

/** Convert a mouse event position into reference-image pixels, given the
 *  on-screen scale of the displayed image. */
export function toImageCoords(
  clientX: number,
  clientY: number,
  bounds: { left: number; top: number },
  scale: number,
): Point {
  return {
    x: (clientX - bounds.left) / scale,
    y: (clientY - bounds.top) / scale,
  };
}

export interface BoxStyle {
  stroke: string;
  lineWidth: number;
}

export const QUESTION_COLORS = [
  '#2563eb',
  '#16a34a',
  '#d97706',
  '#dc2626',
  '#7c3aed',
  '#0891b2',
];

export function colorForQuestion(questionIndex: number): string {
  return QUESTION_COLORS[questionIndex % QUESTION_COLORS.length];
}

export function drawBox(
  ctx: CanvasRenderingContext2D,
  rect: Rect,
  style: BoxStyle,
  scale: number,
): void {
  const [x, y, w, h] = rect;
  ctx.beginPath();
  ctx.rect(x * scale, y * scale, w * scale, h * scale);
  ctx.strokeStyle = style.stroke;
  ctx.lineWidth = style.lineWidth;
  ctx.stroke();
}

export function drawLabel(
  ctx: CanvasRenderingContext2D,
  rect: Rect,
  text: string,
  color: string,
  scale: number,
): void {
  const [x, y] = rect;
  ctx.font = '12px sans-serif';
  ctx.fillStyle = color;
  ctx.fillText(text, x * scale + 2, y * scale - 4);
}
