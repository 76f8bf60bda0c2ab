/** JSON shapes served by the session service. */

/** Uniformly sampled planar trajectory: points[i] = [x, y] at time i*dt. */
export interface TrajectoryDto {
  dt: number;
  points: number[][];
}

/** Trajectory with a per-point covariance, rows flattened row-major. */
export interface ProbTrajectoryDto extends TrajectoryDto {
  covs: number[][];
}

export interface ViaPointDto {
  t: number;
  mean: number[];
  cov: number[][];
  iteration: number;
}

export interface MetricsRow {
  iteration: number;
  M1: number;
  M2: number;
  track_rms: number;
}

export interface TaskDto {
  name: string;
  keypoint_times: number[];
  desired: TrajectoryDto;
}

export interface StateDto {
  scenario: string;
  iteration: number;
  iterations_planned: number;
  duration: number;
  force_threshold: number;
  waypoints: number;
  task: TaskDto;
  reference: TrajectoryDto;
  preference: ProbTrajectoryDto | null;
  via_points: ViaPointDto[];
  actuals: TrajectoryDto[];
  metrics: MetricsRow[];
  version: number;
  pending_events: number;
}

export interface ForceAck {
  pending: number;
  magnitude: number;
  clears_threshold: boolean;
}

export interface AdvanceAck {
  iteration: number;
  version: number;
}

export interface ServiceError {
  error: { kind: string; message: string };
}
