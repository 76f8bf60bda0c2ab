/** Drag-to-force mapping: a corrective force is literally a dragged vector.
 *
 * The mapping is linear and displayed numerically next to the cursor:
 * NEWTONS_PER_PIXEL newtons per CSS pixel of drag length, so a 60 px drag
 * is a 15 N force.
 */

export const NEWTONS_PER_PIXEL = 0.25;

export interface DragForce {
  fx: number;
  fy: number;
  magnitude: number;
  clearsThreshold: boolean;
}

/**
 * Force for a drag from (x0, y0) to (x1, y1) in screen pixels. Screen y
 * grows downward while world y grows upward, so the y component flips.
 */
export function dragToForce(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  thresholdNewtons: number,
  newtonsPerPixel: number = NEWTONS_PER_PIXEL,
): DragForce {
  const fx = (x1 - x0) * newtonsPerPixel;
  const fy = -(y1 - y0) * newtonsPerPixel;
  const magnitude = Math.hypot(fx, fy);
  return { fx, fy, magnitude, clearsThreshold: magnitude > thresholdNewtons };
}

/** Label shown live during a drag, e.g. "15.0 N" or "8.0 N (below 10 N)". */
export function dragLabel(force: DragForce, thresholdNewtons: number): string {
  const newtons = `${force.magnitude.toFixed(1)} N`;
  return force.clearsThreshold
    ? newtons
    : `${newtons} (below ${thresholdNewtons.toFixed(0)} N)`;
}
