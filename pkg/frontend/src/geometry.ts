/** Pure mapping between floor-plan meters and canvas pixels.
 *
 * The plan is fit into the canvas with a uniform scale (no distortion) and
 * centered, so canvasToWorld(worldToCanvas(p)) === p inside the plan.
 */

import type { FloorPlan } from "./types.js";

export interface Bounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

export interface Viewport {
  width: number;
  height: number;
  padding: number;
}

export function planBounds(plan: Pick<FloorPlan, "rooms">): Bounds {
  let minX = Infinity,
    minY = Infinity,
    maxX = -Infinity,
    maxY = -Infinity;
  for (const room of plan.rooms) {
    for (const [x, y] of room.polygon) {
      minX = Math.min(minX, x);
      minY = Math.min(minY, y);
      maxX = Math.max(maxX, x);
      maxY = Math.max(maxY, y);
    }
  }
  if (!isFinite(minX)) throw new Error("floor plan has no rooms");
  return { minX, minY, maxX, maxY };
}

export function scaleFor(bounds: Bounds, view: Viewport): number {
  const w = bounds.maxX - bounds.minX;
  const h = bounds.maxY - bounds.minY;
  const availW = view.width - 2 * view.padding;
  const availH = view.height - 2 * view.padding;
  if (w <= 0 || h <= 0) throw new Error("degenerate floor plan bounds");
  if (availW <= 0 || availH <= 0) throw new Error("viewport smaller than padding");
  return Math.min(availW / w, availH / h);
}

function offsets(bounds: Bounds, view: Viewport, s: number) {
  const w = (bounds.maxX - bounds.minX) * s;
  const h = (bounds.maxY - bounds.minY) * s;
  return {
    ox: (view.width - w) / 2,
    oy: (view.height - h) / 2,
  };
}

/** Meters -> pixels. The y axis is flipped: plan y grows up, canvas y down. */
export function worldToCanvas(
  p: { x: number; y: number },
  bounds: Bounds,
  view: Viewport,
): { x: number; y: number } {
  const s = scaleFor(bounds, view);
  const { ox, oy } = offsets(bounds, view, s);
  return {
    x: ox + (p.x - bounds.minX) * s,
    y: view.height - oy - (p.y - bounds.minY) * s,
  };
}

/** Pixels -> meters: exact inverse of worldToCanvas. */
export function canvasToWorld(
  p: { x: number; y: number },
  bounds: Bounds,
  view: Viewport,
): { x: number; y: number } {
  const s = scaleFor(bounds, view);
  const { ox, oy } = offsets(bounds, view, s);
  return {
    x: bounds.minX + (p.x - ox) / s,
    y: bounds.minY + (view.height - oy - p.y) / s,
  };
}

export function insideCanvas(p: { x: number; y: number }, view: Viewport): boolean {
  return p.x >= 0 && p.y >= 0 && p.x <= view.width && p.y <= view.height;
}
