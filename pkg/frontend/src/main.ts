import { ApiClient, fetchTransport } from "./api.js";
import { buildTreeModel, renderTree } from "./tree.js";
import { ProjectionView } from "./scatter.js";
import { ViewState } from "./state.js";
import { buildJointModel, computeLayout, jointScales, renderJointPlot } from "./jointplot.js";
import { lassoCapture, simplifyPath, type Point } from "./geometry.js";
import type { PlotPayload, SetOp, VoxelDetail } from "./types.js";

const SET_OPS: SetOp[] = ["new", "union", "intersect", "difference"];
const OP_SYMBOL: Record<SetOp, string> = {
  new: "o", union: "∪", intersect: "∩", difference: "∖",
};
const PLOT_MODES = ["scatter", "hist2d", "kde", "gmm", "cdf", "conditional1d", "hist1d"];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function boot(): Promise<void> {
  const api = new ApiClient(fetchTransport(""));
  const state = new ViewState(api, {
    onError: (err) => toast(`${err.code}: ${err.message}`),
  });
  const meta = await api.meta();
  state.syncFromSnapshot(meta.session);
  const [fx, fy] = meta.fields;

  // --- global set-op mode buttons ------------------------------------------
  const opBar = document.getElementById("set-ops")!;
  for (const op of SET_OPS) {
    const b = el("button", op === state.setOpMode ? "active" : "", `${OP_SYMBOL[op]} ${op}`);
    b.addEventListener("click", () => {
      state.setOpMode = op;
      opBar.querySelectorAll("button").forEach((x) => x.classList.remove("active"));
      b.classList.add("active");
    });
    opBar.appendChild(b);
  }

  // --- views ----------------------------------------------------------------
  const treeBox = document.getElementById("tree")!;
  const compView = new ProjectionView(
    document.getElementById("proj-components") as HTMLCanvasElement,
    state, "component", () => void refreshAll(),
  );
  const regionView = new ProjectionView(
    document.getElementById("proj-regions") as HTMLCanvasElement,
    state, "region", () => void refreshAll(),
  );
  const voxelCanvas = document.getElementById("voxel-view") as HTMLCanvasElement;
  const plotCanvas = document.getElementById("joint-plot") as HTMLCanvasElement;
  const momentsBox = document.getElementById("moments")!;

  async function refreshTree(): Promise<void> {
    const hierarchy = await api.hierarchy(fx, fy ?? fx);
    const model = buildTreeModel(hierarchy, new Set(state.selections.component));
    renderTree(treeBox, model, (id) => {
      void state.applySelection("component", [id]).then(refreshAll);
    });
  }

  async function refreshProjections(): Promise<void> {
    const comp = await api.projection("component");
    compView.setPoints(comp.points);
    const metric = (document.getElementById("region-metric") as HTMLSelectElement).value;
    const region = await api.projection("region", { metric });
    regionView.setPoints(region.points);
  }

  let plotLasso: Point[] = [];

  function drawPlot(payload: PlotPayload | null, transform = state.lockedTransform()): void {
    if (!payload) return;
    const ctx = plotCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, plotCanvas.width, plotCanvas.height);
    const rects = computeLayout(plotCanvas.width, plotCanvas.height, state.layers.marginals);
    const model = buildJointModel(payload, state.layers, state.viewX, state.viewY);
    renderJointPlot(ctx, model, rects, state.viewX, state.viewY,
                    state.locked ? transform : null);
    if (plotLasso.length > 1) {
      ctx.strokeStyle = "rgba(30,30,30,0.9)";
      ctx.setLineDash([5, 4]);
      ctx.beginPath();
      plotLasso.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }

  async function refreshPlot(gesture = false): Promise<void> {
    const payload = await state.refreshPlot({ x: fx, y: fy ?? fx }, gesture);
    drawPlot(payload);
  }

  async function refreshMoments(): Promise<void> {
    const modelName = state.plotMode === "gmm" ? "gmm" : state.plotMode === "kde" ? "kde" : "hist";
    const res = await api.moments(modelName, { x: fx, y: fy ?? fx });
    momentsBox.textContent = "";
    const table = el("table");
    const head = el("tr");
    for (const h of ["moment", "raw", "model", "rel. error"]) head.appendChild(el("th", "", h));
    table.appendChild(head);
    for (const row of res.rows) {
      const tr = el("tr");
      tr.appendChild(el("td", "", row.moment));
      tr.appendChild(el("td", "", row.raw.toPrecision(5)));
      tr.appendChild(el("td", "", row.model.toPrecision(5)));
      tr.appendChild(el("td", "", Number.isFinite(row.relative_error)
        ? row.relative_error.toExponential(2) : "inf"));
      table.appendChild(tr);
    }
    momentsBox.appendChild(table);
    const pre = el("pre", "latex", res.latex);
    momentsBox.appendChild(pre);
  }

  async function refreshVoxels(): Promise<void> {
    const { voxels } = await api.voxels(4000);
    drawVoxels(voxelCanvas, voxels, meta.dims);
  }

  async function refreshAll(): Promise<void> {
    await Promise.all([refreshTree(), refreshProjections(), refreshPlot(), refreshVoxels()]);
    if (momentsBox.dataset.open === "1") await refreshMoments();
  }

  // --- joint plot controls ---------------------------------------------------
  const modeBar = document.getElementById("plot-modes")!;
  for (const mode of PLOT_MODES) {
    const b = el("button", mode === state.plotMode ? "active" : "", mode);
    b.addEventListener("click", () => {
      void state.setMode(mode).then(() => {
        modeBar.querySelectorAll("button").forEach((x) => x.classList.remove("active"));
        b.classList.add("active");
        drawPlot(state.lastPlot);
      });
    });
    modeBar.appendChild(b);
  }

  const lockBtn = document.getElementById("lock-toggle") as HTMLButtonElement;
  lockBtn.addEventListener("click", () => {
    void state.setLocked(!state.locked).then(() => {
      lockBtn.classList.toggle("active", state.locked);
      lockBtn.textContent = state.locked ? "locked" : "lock";
    });
  });

  for (const [boxId, key] of [
    ["toggle-scatter", "scatter"],
    ["toggle-marginals", "marginals"],
    ["toggle-submarginals", "subMarginals"],
    ["toggle-conditional", "conditional"],
  ] as const) {
    const box = document.getElementById(boxId) as HTMLInputElement;
    box.checked = state.layers[key];
    box.addEventListener("change", () => {
      state.layers[key] = box.checked;
      drawPlot(state.lastPlot);
    });
  }

  const momentsBtn = document.getElementById("moments-toggle") as HTMLButtonElement;
  momentsBtn.addEventListener("click", () => {
    const open = momentsBox.dataset.open === "1";
    momentsBox.dataset.open = open ? "0" : "1";
    momentsBox.style.display = open ? "none" : "block";
    if (!open) void refreshMoments();
  });

  (document.getElementById("region-metric") as HTMLSelectElement).addEventListener(
    "change", () => void refreshProjections(),
  );

  // scroll = zoom (joint area: both axes; marginal strips: one axis);
  // drag on the joint area pans. Gestures request histogram stand-ins;
  // gesture end restores the configured layer.
  let gestureTimer: ReturnType<typeof setTimeout> | null = null;
  plotCanvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    const rects = computeLayout(plotCanvas.width, plotCanvas.height, state.layers.marginals);
    const r = plotCanvas.getBoundingClientRect();
    const px = ((e.clientX - r.left) / r.width) * plotCanvas.width;
    const py = ((e.clientY - r.top) / r.height) * plotCanvas.height;
    const inX = py >= rects.xStrip.y && px >= rects.xStrip.x;
    const inY = px <= rects.yStrip.w && py <= rects.yStrip.h;
    const factor = e.deltaY < 0 ? 1.2 : 1 / 1.2;
    const axis = inX ? "x" : inY ? "y" : "both";
    const frac = axis === "y"
      ? 1 - (py - rects.joint.y) / rects.joint.h
      : (px - rects.joint.x) / rects.joint.w;
    void state.zoom(axis, factor, Math.max(0, Math.min(1, frac))).then(() => {
      drawPlot(state.lastPlot);
      if (gestureTimer) clearTimeout(gestureTimer);
      gestureTimer = setTimeout(() => {
        void state.endGesture().then(() => drawPlot(state.lastPlot));
      }, 250);
    });
  }, { passive: false });

  // drag: lasso-select voxels when the scatter layer is showing, pan otherwise
  let panStart: { x: number; y: number } | null = null;
  const canvasPoint = (e: PointerEvent): Point => {
    const r = plotCanvas.getBoundingClientRect();
    return [
      ((e.clientX - r.left) / r.width) * plotCanvas.width,
      ((e.clientY - r.top) / r.height) * plotCanvas.height,
    ];
  };
  plotCanvas.addEventListener("pointerdown", (e) => {
    if (state.lastPlot?.served_as === "scatter") {
      plotLasso = [canvasPoint(e)];
    } else {
      panStart = { x: e.clientX, y: e.clientY };
    }
  });
  plotCanvas.addEventListener("pointermove", (e) => {
    if (plotLasso.length) {
      plotLasso.push(canvasPoint(e));
      drawPlot(state.lastPlot);
      return;
    }
    if (!panStart) return;
    const dx = (e.clientX - panStart.x) / plotCanvas.width;
    const dy = (e.clientY - panStart.y) / plotCanvas.height;
    panStart = { x: e.clientX, y: e.clientY };
    void state.pan("x", -dx).then(() => state.pan("y", dy)).then(() => drawPlot(state.lastPlot));
  });
  plotCanvas.addEventListener("pointerup", () => {
    if (plotLasso.length) {
      void finishPlotLasso();
      return;
    }
    panStart = null;
    void state.endGesture().then(() => drawPlot(state.lastPlot));
  });

  async function finishPlotLasso(): Promise<void> {
    const polygon = simplifyPath(plotLasso, 2);
    plotLasso = [];
    drawPlot(state.lastPlot);
    const payload = state.lastPlot;
    if (polygon.length < 3 || !payload?.points || !payload.ids) return;
    const rects = computeLayout(plotCanvas.width, plotCanvas.height, state.layers.marginals);
    const vx = (state.viewX ?? payload.x_range) as [number, number];
    const vy = (state.viewY ?? payload.y_range) as [number, number];
    const { sx, sy } = jointScales(rects, vx, vy);
    const screenPts = payload.points.map(([x, y], i) => ({
      id: payload.ids![i],
      x: sx(x),
      y: sy(y),
    }));
    const ids = lassoCapture(screenPts, polygon);
    try {
      await state.applySelection("voxel", ids);
      await refreshVoxels();
    } catch {
      // rejection surfaced via the toast listener; state unchanged
    }
  }

  await refreshAll();
}

function drawVoxels(canvas: HTMLCanvasElement, voxels: VoxelDetail[], dims: number[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const [nx, ny, nz] = dims;
  const sx = canvas.width / nx;
  const sy = canvas.height / ny;
  for (const v of voxels) {
    const depth = nz > 1 ? v.coords[2] / nz : 0.5;
    ctx.fillStyle = `hsl(${200 + 100 * depth},70%,${35 + 30 * depth}%)`;
    ctx.fillRect(v.coords[0] * sx, canvas.height - (v.coords[1] + 1) * sy,
                 Math.max(sx, 1.5), Math.max(sy, 1.5));
  }
}

function toast(message: string): void {
  const box = document.getElementById("toast");
  if (!box) return;
  box.textContent = message;
  box.classList.add("visible");
  setTimeout(() => box.classList.remove("visible"), 2600);
}

boot().catch((err) => toast(String(err)));
