/** Replay transport: play/pause/scrub over one episode's trajectory.
 *
 * Pure state machine — the app owns one instance and calls tick() from its
 * animation loop. Time is replay time in seconds, clamped to [0, duration];
 * playback wraps at the end so the episode loops.
 */

import type { TrajectoryDto } from "./types";

export class ReplayTransport {
  private t = 0;
  private playing_ = false;

  constructor(
    readonly duration: number,
    readonly speed: number = 1.0,
  ) {
    if (!(duration > 0)) throw new Error("duration must be positive");
  }

  get time(): number {
    return this.t;
  }

  get playing(): boolean {
    return this.playing_;
  }

  play(): void {
    this.playing_ = true;
  }

  pause(): void {
    this.playing_ = false;
  }

  toggle(): void {
    this.playing_ = !this.playing_;
  }

  /** Jump to an absolute replay time; pauses are preserved. */
  scrub(time: number): void {
    this.t = Math.min(Math.max(time, 0), this.duration);
  }

  /** Advance by wall-clock dt seconds when playing; wraps at the end. */
  tick(dt: number): number {
    if (this.playing_ && dt > 0) {
      this.t += dt * this.speed;
      if (this.t > this.duration) this.t -= this.duration;
    }
    return this.t;
  }
}

/** Linear interpolation of a uniformly sampled trajectory at time t. */
export function positionAt(traj: TrajectoryDto, t: number): [number, number] {
  const n = traj.points.length;
  if (n === 0) return [0, 0];
  const first = traj.points[0]!;
  if (n === 1 || traj.dt <= 0) return [first[0]!, first[1]!];
  const idx = Math.min(Math.max(t / traj.dt, 0), n - 1);
  const lo = Math.floor(idx);
  const hi = Math.min(lo + 1, n - 1);
  const w = idx - lo;
  const a = traj.points[lo]!;
  const b = traj.points[hi]!;
  return [a[0]! * (1 - w) + b[0]! * w, a[1]! * (1 - w) + b[1]! * w];
}
