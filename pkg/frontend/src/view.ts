/** Pure geometry: service state -> screen-space view model.
 *
 * The canvas painter consumes this verbatim, so tests can assert on the
 * rendered state without a real canvas. Rebuilding from the same snapshot
 * yields the identical view model — the console holds no session truth.
 */

import type { ProbTrajectoryDto, StateDto, TrajectoryDto } from "./types";

export interface Projection {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export type ScreenPoint = [number, number];

export interface ViaMarker {
  x: number;
  y: number;
  t: number;
  iteration: number;
}

export interface KeypointMarker {
  x: number;
  y: number;
  t: number;
}

export interface ViewModel {
  projection: Projection;
  desired: ScreenPoint[];
  reference: ScreenPoint[];
  preferenceMean: ScreenPoint[] | null;
  /** Closed polygon around the preference mean at ±2 sigma across-path. */
  band: ScreenPoint[] | null;
  actuals: ScreenPoint[][];
  vias: ViaMarker[];
  keypoints: KeypointMarker[];
}

export function worldToScreen(p: Projection, x: number, y: number): ScreenPoint {
  return [p.offsetX + x * p.scale, p.offsetY - y * p.scale];
}

export function screenToWorld(p: Projection, sx: number, sy: number): ScreenPoint {
  return [(sx - p.offsetX) / p.scale, (p.offsetY - sy) / p.scale];
}

/** Uniform scale centering all drawable points in a width-by-height canvas. */
export function fitProjection(
  worldPoints: number[][],
  width: number,
  height: number,
  margin = 40,
): Projection {
  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const pt of worldPoints) {
    const [x, y] = [pt[0]!, pt[1]!];
    if (x < xMin) xMin = x;
    if (x > xMax) xMax = x;
    if (y < yMin) yMin = y;
    if (y > yMax) yMax = y;
  }
  if (!Number.isFinite(xMin)) {
    return { scale: 1, offsetX: width / 2, offsetY: height / 2 };
  }
  const spanX = Math.max(xMax - xMin, 1e-9);
  const spanY = Math.max(yMax - yMin, 1e-9);
  const scale = Math.min(
    (width - 2 * margin) / spanX,
    (height - 2 * margin) / spanY,
  );
  const cx = (xMin + xMax) / 2;
  const cy = (yMin + yMax) / 2;
  return {
    scale,
    offsetX: width / 2 - cx * scale,
    offsetY: height / 2 + cy * scale,
  };
}

function projectPath(p: Projection, traj: TrajectoryDto): ScreenPoint[] {
  return traj.points.map((pt) => worldToScreen(p, pt[0]!, pt[1]!));
}

function timeAt(traj: TrajectoryDto, index: number): number {
  return index * traj.dt;
}

function interpolate(traj: TrajectoryDto, t: number): [number, number] {
  const n = traj.points.length;
  const idx = Math.min(Math.max(traj.dt > 0 ? t / traj.dt : 0, 0), n - 1);
  const lo = Math.floor(idx);
  const hi = Math.min(lo + 1, n - 1);
  const w = idx - lo;
  const a = traj.points[lo]!;
  const b = traj.points[hi]!;
  return [a[0]! * (1 - w) + b[0]! * w, a[1]! * (1 - w) + b[1]! * w];
}

/**
 * Across-path standard deviation at waypoint i: sqrt(n^T Sigma n) for the
 * unit normal n of the path. Covariance rows arrive flattened row-major.
 */
function acrossPathSigma(pref: ProbTrajectoryDto, i: number): [number, number, number] {
  const n = pref.points.length;
  const prev = pref.points[Math.max(i - 1, 0)]!;
  const next = pref.points[Math.min(i + 1, n - 1)]!;
  let tx = next[0]! - prev[0]!;
  let ty = next[1]! - prev[1]!;
  const len = Math.hypot(tx, ty);
  if (len < 1e-12) {
    tx = 1;
    ty = 0;
  } else {
    tx /= len;
    ty /= len;
  }
  const nx = -ty;
  const ny = tx;
  const cov = pref.covs[i]!;
  const quad =
    nx * (cov[0]! * nx + cov[1]! * ny) + ny * (cov[2]! * nx + cov[3]! * ny);
  return [nx, ny, Math.sqrt(Math.max(quad, 0))];
}

function bandPolygon(
  p: Projection,
  pref: ProbTrajectoryDto,
  sigmas: number,
): ScreenPoint[] {
  const upper: ScreenPoint[] = [];
  const lower: ScreenPoint[] = [];
  for (let i = 0; i < pref.points.length; i += 1) {
    const [x, y] = [pref.points[i]![0]!, pref.points[i]![1]!];
    const [nx, ny, sigma] = acrossPathSigma(pref, i);
    const off = sigmas * sigma;
    upper.push(worldToScreen(p, x + nx * off, y + ny * off));
    lower.push(worldToScreen(p, x - nx * off, y - ny * off));
  }
  lower.reverse();
  return upper.concat(lower);
}

export function buildViewModel(
  state: StateDto,
  width: number,
  height: number,
  sigmas = 2,
): ViewModel {
  const world: number[][] = [...state.task.desired.points];
  world.push(...state.reference.points);
  if (state.preference) world.push(...state.preference.points);
  const projection = fitProjection(world, width, height);

  const vias: ViaMarker[] = state.via_points.map((via) => {
    const [x, y] = worldToScreen(projection, via.mean[0]!, via.mean[1]!);
    return { x, y, t: via.t, iteration: via.iteration };
  });

  const keypoints: KeypointMarker[] = state.task.keypoint_times.map((t) => {
    const [wx, wy] = interpolate(state.task.desired, t);
    const [x, y] = worldToScreen(projection, wx, wy);
    return { x, y, t };
  });

  return {
    projection,
    desired: projectPath(projection, state.task.desired),
    reference: projectPath(projection, state.reference),
    preferenceMean: state.preference
      ? projectPath(projection, state.preference)
      : null,
    band: state.preference
      ? bandPolygon(projection, state.preference, sigmas)
      : null,
    actuals: state.actuals.map((traj) => projectPath(projection, traj)),
    vias,
    keypoints,
  };
}

export { interpolate as trajectoryPositionAt, timeAt };
