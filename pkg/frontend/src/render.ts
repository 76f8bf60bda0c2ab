/** Canvas painter for the view model plus per-frame overlays. */

import type { ScreenPoint, ViewModel } from "./view";

export interface DragOverlay {
  fromX: number;
  fromY: number;
  toX: number;
  toY: number;
  label: string;
  clears: boolean;
}

export interface Overlays {
  cursor: ScreenPoint | null;
  drag: DragOverlay | null;
}

function strokePath(
  ctx: CanvasRenderingContext2D,
  path: ScreenPoint[],
  style: string,
  width: number,
  dash: number[] = [],
): void {
  if (path.length < 2) return;
  ctx.save();
  ctx.strokeStyle = style;
  ctx.lineWidth = width;
  ctx.setLineDash(dash);
  ctx.beginPath();
  ctx.moveTo(path[0]![0], path[0]![1]);
  for (let i = 1; i < path.length; i += 1) {
    ctx.lineTo(path[i]![0], path[i]![1]);
  }
  ctx.stroke();
  ctx.restore();
}

export function paint(
  canvas: HTMLCanvasElement,
  model: ViewModel | null,
  overlays: Overlays,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !model) return;

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  if (model.band && model.band.length > 2) {
    ctx.save();
    ctx.fillStyle = "rgba(70, 130, 180, 0.18)";
    ctx.beginPath();
    ctx.moveTo(model.band[0]![0], model.band[0]![1]);
    for (const [x, y] of model.band.slice(1)) ctx.lineTo(x, y);
    ctx.closePath();
    ctx.fill();
    ctx.restore();
  }

  for (const actual of model.actuals) {
    strokePath(ctx, actual, "rgba(120, 120, 120, 0.35)", 1);
  }
  strokePath(ctx, model.desired, "#1a1a1a", 2);
  if (model.preferenceMean) {
    strokePath(ctx, model.preferenceMean, "rgba(70, 130, 180, 0.9)", 1.5);
  }
  strokePath(ctx, model.reference, "#c0392b", 2, [8, 5]);

  for (const kp of model.keypoints) {
    ctx.fillStyle = "#1a1a1a";
    ctx.fillRect(kp.x - 4, kp.y - 4, 8, 8);
  }

  for (const via of model.vias) {
    ctx.save();
    ctx.fillStyle = "#e67e22";
    ctx.strokeStyle = "#7d4a12";
    ctx.beginPath();
    ctx.arc(via.x, via.y, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
    ctx.fillStyle = "#333";
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(`${via.t.toFixed(2)} s`, via.x + 9, via.y - 6);
    ctx.restore();
  }

  if (overlays.cursor) {
    ctx.save();
    ctx.fillStyle = "#2c7a2c";
    ctx.beginPath();
    ctx.arc(overlays.cursor[0], overlays.cursor[1], 7, 0, 2 * Math.PI);
    ctx.fill();
    ctx.restore();
  }

  if (overlays.drag) {
    const { fromX, fromY, toX, toY, label, clears } = overlays.drag;
    ctx.save();
    ctx.strokeStyle = clears ? "#c0392b" : "#999";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(fromX, fromY);
    ctx.lineTo(toX, toY);
    ctx.stroke();
    const angle = Math.atan2(toY - fromY, toX - fromX);
    ctx.beginPath();
    ctx.moveTo(toX, toY);
    ctx.lineTo(
      toX - 10 * Math.cos(angle - 0.4),
      toY - 10 * Math.sin(angle - 0.4),
    );
    ctx.moveTo(toX, toY);
    ctx.lineTo(
      toX - 10 * Math.cos(angle + 0.4),
      toY - 10 * Math.sin(angle + 0.4),
    );
    ctx.stroke();
    ctx.fillStyle = "#333";
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText(label, toX + 10, toY + 4);
    ctx.restore();
  }
}
