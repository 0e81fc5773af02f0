/** Payload shapes of the exploration API. */

export type Level = "component" | "region" | "voxel";
export type SetOp = "new" | "union" | "intersect" | "difference";
export type PlotMode =
  | "scatter"
  | "hist1d"
  | "hist2d"
  | "cdf"
  | "conditional1d"
  | "conditional2d"
  | "kde"
  | "gmm";

export interface Meta {
  dims: number[];
  spacing: number[];
  fields: string[];
  iso_field: string;
  iso_values: number[];
  n_layers: number;
  n_components: number;
  n_regions: number;
  n_records: number;
  small_component_threshold: number;
  session: SessionSnapshot;
}

export interface SessionSnapshot {
  selections: Record<Level, number[]>;
  plot: PlotConfig;
}

export interface PlotConfig {
  mode: string;
  x: string;
  y: string;
  x_range: number[] | null;
  y_range: number[] | null;
  locked: boolean;
  bins: number;
  k: number;
}

export interface HierarchyComponent {
  id: number;
  voxels: number;
  gray: boolean;
  bbox: number[];
  regions: number;
  metric?: number | null;
}

export interface HierarchyLayer {
  layer: number;
  iso: number[] | null;
  records: number;
  components: HierarchyComponent[];
}

export interface Hierarchy {
  layers: HierarchyLayer[];
  field: string;
}

export interface ProjectionPoint {
  id: number;
  x: number;
  y: number;
  layer: number;
  gray: boolean;
  selected: boolean;
  component?: number;
}

export interface Projection {
  level: Level;
  method: string;
  metric: string;
  points: ProjectionPoint[];
}

export interface SelectionResponse {
  selections: Record<Level, number[]>;
  pruned: Record<string, number[]>;
}

export interface BackgroundLayer {
  scatter?: number[][];
  x_hist?: { lo: number; hi: number; counts: number[] };
  y_hist?: { lo: number; hi: number; counts: number[] };
  n?: number;
}

/** One /plot response; fields beyond the common ones depend on served_as. */
export interface PlotPayload {
  mode?: string;
  x: string;
  y: string;
  requested_mode: string;
  served_as: string;
  zooming: boolean;
  cached?: boolean;
  x_range?: number[];
  y_range?: number[];
  n?: number;
  background: BackgroundLayer;
  // scatter (ids align with points and are voxel record ids)
  points?: number[][];
  ids?: number[];
  // hist1d / hist2d / cdf
  counts?: number[] | number[][];
  cdf?: number[][];
  underflow?: number;
  overflow?: number;
  out_of_range?: number;
  // conditionals
  means?: (number | null)[];
  stds?: (number | null)[];
  z_mean?: (number | null)[][];
  bins?: number;
  // kde
  axes?: number[][];
  density?: number[] | number[][];
  bandwidth?: number[];
  // gmm
  weights?: number[];
  gmmMeans?: number[][];
  covs?: number[][][];
}

export interface MomentRow {
  moment: string;
  order: number;
  raw: number;
  model: number;
  relative_error: number;
}

export interface MomentsResponse {
  model: string;
  x: string;
  y: string;
  n: number;
  rows: MomentRow[];
  latex: string;
}

export interface VoxelDetail {
  id: number;
  coords: number[];
  region: number;
  component: number;
  values: Record<string, number>;
}
