/** Input schemas produced by the training CLI's export commands. */

export interface GraphData {
  n: number;
  edges: [number, number][];
  weights?: number[];
}

export interface FilterExport {
  K: number;
  theta: number[];
  /** [lambda, p(lambda)] pairs sampled on [0, 2]. */
  samples: [number, number][];
}

export interface Explanation {
  schema_version: number;
  graph: GraphData;
  /** Per-channel, per-node importances (post-clamp). */
  q: number[][];
  filters: FilterExport[];
  prediction: number;
  label: number;
  meta: {
    highlight_nodes?: number[];
    highlight_edges?: [number, number][];
    [key: string]: unknown;
  };
}

export interface SweepRow {
  lambda: number;
  mu_over_sqrt_gamma: number;
  accuracy_mean: number;
  accuracy_std: number;
  median_q: number;
  blank: boolean;
}

export interface HeatmapSpec {
  /** Log10 bounds of the node color scale. */
  logQMin: number;
  logQMax: number;
  panelSize: number;
  channel: number;
}

export const defaultHeatmapSpec: HeatmapSpec = {
  logQMin: -2,
  logQMax: 0,
  panelSize: 240,
  channel: 0,
};

export interface PhaseSpec {
  cellSize: number;
  /** Cells below this accuracy are blanked (left transparent). */
  blankBelow: number;
}

export const defaultPhaseSpec: PhaseSpec = {
  cellSize: 48,
  blankBelow: 0.56,
};
