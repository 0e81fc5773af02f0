import type { BackgroundLayer, PlotPayload } from "./types.js";
import type { LayerToggles, PlotTransform } from "./state.js";

/** Screen-space primitives the canvas renderer executes and tests inspect. */
export interface HeatCell {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  /** normalized 0..1 intensity */
  v: number;
}

export interface Ellipse {
  cx: number;
  cy: number;
  rx: number;
  ry: number;
  angle: number;
  weight: number;
}

export interface PolyLine {
  points: [number, number][];
  role: "mean" | "upper" | "lower";
}

export interface Bar {
  x0: number;
  x1: number;
  h: number; // 0..1 of the marginal strip height
}

export interface Arrow {
  /** position along the marginal, 0..1 */
  at: number;
  edge: "lo" | "hi";
}

export interface MarginalModel {
  bars: Bar[]; // background (parent scope) histogram
  subHeat: number[]; // foreground marginal as a heat strip, 0..1 per bin
  arrows: Arrow[]; // current view window indicators
}

export interface JointModel {
  kind: string; // served_as
  xRange: [number, number];
  yRange: [number, number];
  backgroundScatter: [number, number][]; // data coords
  foregroundScatter: [number, number][];
  heat: HeatCell[]; // data-coord cells for hist2d / kde / cdf / conditional2d
  ellipses: Ellipse[];
  curves: PolyLine[];
  xMarginal: MarginalModel | null;
  yMarginal: MarginalModel | null;
}

function span(r: [number, number]): number {
  return r[1] - r[0] || 1;
}

/**
 * Build the layered render model for one plot payload. All positions stay in
 * data coordinates; the canvas renderer applies the view scale (and, for
 * locked plots, the affine transform) when drawing.
 */
export function buildJointModel(
  payload: PlotPayload,
  toggles: LayerToggles,
  viewX?: [number, number] | null,
  viewY?: [number, number] | null,
): JointModel {
  const xr = (payload.x_range ?? [0, 1]) as [number, number];
  const yr = (payload.y_range ?? [0, 1]) as [number, number];
  const model: JointModel = {
    kind: payload.served_as,
    xRange: xr,
    yRange: yr,
    backgroundScatter: toggles.scatter
      ? ((payload.background?.scatter ?? []) as [number, number][])
      : [],
    foregroundScatter: [],
    heat: [],
    ellipses: [],
    curves: [],
    xMarginal: null,
    yMarginal: null,
  };

  switch (payload.served_as) {
    case "scatter":
      model.foregroundScatter = (payload.points ?? []) as [number, number][];
      break;
    case "hist2d":
      model.heat = gridToCells(payload.counts as number[][], xr, yr, true);
      break;
    case "cdf":
      model.heat = gridToCells(payload.cdf as number[][], xr, yr, false);
      break;
    case "kde":
      model.heat = rasterToCells(
        payload.density as number[][],
        payload.axes as number[][],
      );
      break;
    case "conditional2d":
      model.heat = gridToCells(
        (payload.z_mean ?? []) as (number | null)[][], xr, yr, true,
      );
      break;
    case "gmm":
      model.ellipses = gmmEllipses(payload);
      break;
    case "conditional1d":
      model.curves = conditionalCurves(payload, xr);
      break;
    case "hist1d":
      model.heat = hist1dCells(payload, xr, yr);
      break;
  }
  if (toggles.conditional && payload.served_as !== "conditional1d" && payload.means) {
    model.curves = conditionalCurves(payload, xr);
  }

  if (toggles.marginals && payload.background) {
    model.xMarginal = marginalModel(payload.background, "x", xr, viewX, toggles.subMarginals, payload);
    model.yMarginal = marginalModel(payload.background, "y", yr, viewY, toggles.subMarginals, payload);
  }
  return model;
}

function gridToCells(
  grid: (number | null)[][] | undefined,
  xr: [number, number],
  yr: [number, number],
  normalizeMax: boolean,
): HeatCell[] {
  if (!grid?.length) return [];
  const nx = grid.length;
  const ny = grid[0].length;
  let max = 0;
  for (const row of grid) {
    for (const v of row) if (v !== null && v > max) max = v;
  }
  const cells: HeatCell[] = [];
  for (let i = 0; i < nx; i++) {
    for (let j = 0; j < ny; j++) {
      const v = grid[i][j];
      if (v === null || v === 0) continue; // empty bins stay gaps, not zeros
      cells.push({
        x0: xr[0] + (i / nx) * span(xr),
        x1: xr[0] + ((i + 1) / nx) * span(xr),
        y0: yr[0] + (j / ny) * span(yr),
        y1: yr[0] + ((j + 1) / ny) * span(yr),
        v: normalizeMax && max > 0 ? v / max : v,
      });
    }
  }
  return cells;
}

function rasterToCells(density: number[][], axes: number[][]): HeatCell[] {
  if (!density?.length || !axes?.length) return [];
  const [ax, ay] = axes;
  let max = 0;
  for (const row of density) for (const v of row) if (v > max) max = v;
  const cells: HeatCell[] = [];
  const dx = ax.length > 1 ? ax[1] - ax[0] : 1;
  const dy = ay.length > 1 ? ay[1] - ay[0] : 1;
  for (let i = 0; i < ax.length; i++) {
    for (let j = 0; j < ay.length; j++) {
      const v = density[i][j];
      if (v <= 0) continue;
      cells.push({
        x0: ax[i] - dx / 2, x1: ax[i] + dx / 2,
        y0: ay[j] - dy / 2, y1: ay[j] + dy / 2,
        v: max > 0 ? v / max : 0,
      });
    }
  }
  return cells;
}

function hist1dCells(payload: PlotPayload, xr: [number, number], yr: [number, number]): HeatCell[] {
  const counts = (payload.counts ?? []) as number[];
  const max = Math.max(...counts, 1);
  return counts.map((c, i) => ({
    x0: xr[0] + (i / counts.length) * span(xr),
    x1: xr[0] + ((i + 1) / counts.length) * span(xr),
    y0: yr[0],
    y1: yr[0] + (c / max) * span(yr),
    v: c / max,
  })).filter((cell) => cell.v > 0);
}

/** 1 and 2 sigma ellipses per mixture component (symmetric 2x2 eigensplit). */
function gmmEllipses(payload: PlotPayload): Ellipse[] {
  const weights = payload.weights ?? [];
  const means = (payload as unknown as { means?: number[][] }).means ?? [];
  const covs = payload.covs ?? [];
  const out: Ellipse[] = [];
  for (let k = 0; k < weights.length; k++) {
    const [[a, b], [, d]] = covs[k] as unknown as [[number, number], [number, number]];
    const tr = a + d;
    const det = a * d - b * b;
    const disc = Math.sqrt(Math.max(tr * tr / 4 - det, 0));
    const l1 = tr / 2 + disc;
    const l2 = tr / 2 - disc;
    const angle = Math.abs(b) < 1e-300 ? 0 : Math.atan2(l1 - a, b);
    for (const s of [1, 2]) {
      out.push({
        cx: means[k][0],
        cy: means[k][1],
        rx: s * Math.sqrt(Math.max(l1, 0)),
        ry: s * Math.sqrt(Math.max(l2, 0)),
        angle,
        weight: weights[k],
      });
    }
  }
  return out;
}

/** Mean curve plus +-1 standard deviation companions; nulls break segments. */
function conditionalCurves(payload: PlotPayload, xr: [number, number]): PolyLine[] {
  const means = payload.means ?? [];
  const stds = payload.stds ?? [];
  const bins = means.length;
  const mk = (role: PolyLine["role"], f: (m: number, s: number) => number): PolyLine[] => {
    const lines: PolyLine[] = [];
    let cur: [number, number][] = [];
    for (let i = 0; i < bins; i++) {
      const m = means[i];
      const s = stds[i] ?? 0;
      if (m === null || s === null) {
        if (cur.length > 1) lines.push({ points: cur, role });
        cur = [];
        continue;
      }
      cur.push([xr[0] + ((i + 0.5) / bins) * span(xr), f(m, s)]);
    }
    if (cur.length > 1) lines.push({ points: cur, role });
    return lines;
  };
  return [
    ...mk("mean", (m) => m),
    ...mk("upper", (m, s) => m + s),
    ...mk("lower", (m, s) => m - s),
  ];
}

function marginalModel(
  bg: BackgroundLayer,
  axis: "x" | "y",
  range: [number, number],
  view: [number, number] | null | undefined,
  subMarginals: boolean,
  payload: PlotPayload,
): MarginalModel | null {
  const hist = axis === "x" ? bg.x_hist : bg.y_hist;
  if (!hist) return null;
  const max = Math.max(...hist.counts, 1);
  const histSpan = hist.hi - hist.lo || 1;
  const bars: Bar[] = hist.counts.map((c, i) => ({
    x0: hist.lo + (i / hist.counts.length) * histSpan,
    x1: hist.lo + ((i + 1) / hist.counts.length) * histSpan,
    h: c / max,
  }));
  const arrows: Arrow[] = [];
  const v = view ?? range;
  arrows.push({ at: (v[0] - hist.lo) / histSpan, edge: "lo" });
  arrows.push({ at: (v[1] - hist.lo) / histSpan, edge: "hi" });

  let subHeat: number[] = [];
  if (subMarginals && payload.served_as === "hist2d" && Array.isArray(payload.counts)) {
    const grid = payload.counts as number[][];
    const sums =
      axis === "x"
        ? grid.map((row) => row.reduce((a, b) => a + b, 0))
        : grid[0].map((_, j) => grid.reduce((a, row) => a + row[j], 0));
    const m = Math.max(...sums, 1);
    subHeat = sums.map((s) => s / m);
  }
  return { bars, subHeat, arrows };
}

// ---------------------------------------------------------------------------
// Canvas rendering

export interface PlotRects {
  joint: { x: number; y: number; w: number; h: number };
  xStrip: { x: number; y: number; w: number; h: number };
  yStrip: { x: number; y: number; w: number; h: number };
}

export function computeLayout(width: number, height: number, marginals: boolean): PlotRects {
  const strip = marginals ? Math.round(Math.min(width, height) * 0.16) : 0;
  return {
    joint: { x: strip, y: 0, w: width - strip, h: height - strip },
    xStrip: { x: strip, y: height - strip, w: width - strip, h: strip },
    yStrip: { x: 0, y: 0, w: strip, h: height - strip },
  };
}

/** Data-to-screen scales for the joint area under the current view window. */
export function jointScales(
  rects: PlotRects,
  vx: [number, number],
  vy: [number, number],
): { sx: (x: number) => number; sy: (y: number) => number } {
  const { joint } = rects;
  return {
    sx: (x: number) => joint.x + ((x - vx[0]) / span(vx)) * joint.w,
    sy: (y: number) => joint.y + joint.h - ((y - vy[0]) / span(vy)) * joint.h,
  };
}

export function renderJointPlot(
  ctx: CanvasRenderingContext2D,
  model: JointModel,
  rects: PlotRects,
  viewX?: [number, number] | null,
  viewY?: [number, number] | null,
  transform?: PlotTransform | null,
): void {
  const vx = viewX ?? model.xRange;
  const vy = viewY ?? model.yRange;
  const { joint } = rects;
  const { sx, sy } = jointScales(rects, vx, vy);

  ctx.save();
  ctx.beginPath();
  ctx.rect(joint.x, joint.y, joint.w, joint.h);
  ctx.clip();
  if (transform) {
    // locked mode: pure affine transform of the cached layer
    ctx.translate(joint.x, joint.y);
    ctx.scale(transform.scaleX, transform.scaleY);
    ctx.translate(-joint.x + transform.offsetX * joint.w, -joint.y + transform.offsetY * joint.h);
  }

  ctx.fillStyle = "rgba(90,90,90,0.45)";
  for (const [x, y] of model.backgroundScatter) {
    ctx.fillRect(sx(x) - 1, sy(y) - 1, 2, 2);
  }
  for (const cell of model.heat) {
    ctx.fillStyle = heatColor(cell.v);
    const x0 = sx(cell.x0);
    const y1 = sy(cell.y0);
    ctx.fillRect(x0, sy(cell.y1), Math.max(sx(cell.x1) - x0, 1), Math.max(y1 - sy(cell.y1), 1));
  }
  ctx.fillStyle = "rgba(40,90,200,0.8)";
  for (const [x, y] of model.foregroundScatter) {
    ctx.fillRect(sx(x) - 1.5, sy(y) - 1.5, 3, 3);
  }
  for (const e of model.ellipses) {
    ctx.strokeStyle = `rgba(200,60,30,${0.35 + 0.5 * e.weight})`;
    ctx.beginPath();
    ctx.ellipse(
      sx(e.cx), sy(e.cy),
      Math.abs(e.rx / span(vx)) * joint.w,
      Math.abs(e.ry / span(vy)) * joint.h,
      -e.angle, 0, Math.PI * 2,
    );
    ctx.stroke();
  }
  for (const line of model.curves) {
    ctx.strokeStyle = line.role === "mean" ? "rgb(200,30,30)" : "rgb(60,90,220)";
    ctx.lineWidth = line.role === "mean" ? 2 : 1;
    ctx.beginPath();
    line.points.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  }
  ctx.restore();

  if (model.xMarginal) renderMarginal(ctx, model.xMarginal, rects.xStrip, "x");
  if (model.yMarginal) renderMarginal(ctx, model.yMarginal, rects.yStrip, "y");
  ctx.strokeStyle = "rgb(120,120,120)";
  ctx.strokeRect(joint.x + 0.5, joint.y + 0.5, joint.w - 1, joint.h - 1);
}

function renderMarginal(
  ctx: CanvasRenderingContext2D,
  m: MarginalModel,
  rect: { x: number; y: number; w: number; h: number },
  axis: "x" | "y",
): void {
  const n = m.bars.length || 1;
  ctx.fillStyle = "rgb(190,190,190)";
  m.bars.forEach((bar, i) => {
    if (axis === "x") {
      const w = rect.w / n;
      ctx.fillRect(rect.x + i * w, rect.y + rect.h * (1 - bar.h * 0.85), w - 1, rect.h * bar.h * 0.85);
    } else {
      const h = rect.h / n;
      ctx.fillRect(rect.x + rect.w * (1 - bar.h * 0.85), rect.y + rect.h - (i + 1) * h, rect.w * bar.h * 0.85, h - 1);
    }
  });
  m.subHeat.forEach((v, i) => {
    ctx.fillStyle = heatColor(v);
    if (axis === "x") {
      const w = rect.w / m.subHeat.length;
      ctx.fillRect(rect.x + i * w, rect.y, w, 4);
    } else {
      const h = rect.h / m.subHeat.length;
      ctx.fillRect(rect.x + rect.w - 4, rect.y + rect.h - (i + 1) * h, 4, h);
    }
  });
  ctx.fillStyle = "rgb(30,30,30)";
  for (const a of m.arrows) {
    const at = Math.max(0, Math.min(1, a.at));
    ctx.beginPath();
    if (axis === "x") {
      const x = rect.x + at * rect.w;
      ctx.moveTo(x, rect.y + rect.h - 8);
      ctx.lineTo(x - 4, rect.y + rect.h);
      ctx.lineTo(x + 4, rect.y + rect.h);
    } else {
      const y = rect.y + rect.h - at * rect.h;
      ctx.moveTo(rect.x + 8, y);
      ctx.lineTo(rect.x, y - 4);
      ctx.lineTo(rect.x, y + 4);
    }
    ctx.fill();
  }
}

function heatColor(v: number): string {
  const c = Math.max(0, Math.min(1, v));
  return `rgba(${Math.round(40 + 200 * c)},${Math.round(70 + 60 * (1 - c))},${Math.round(
    180 * (1 - c) + 20,
  )},${0.25 + 0.7 * c})`;
}
