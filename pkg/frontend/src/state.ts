import { ApiClient, ApiError, PlotRequest } from "./api.js";
import { lassoCapture, Point } from "./geometry.js";
import type {
  Level,
  PlotPayload,
  SelectionResponse,
  SessionSnapshot,
  SetOp,
} from "./types.js";

export interface LayerToggles {
  scatter: boolean;
  marginals: boolean;
  subMarginals: boolean;
  conditional: boolean;
  selectionOverlay: boolean;
}

export interface StateListener {
  onSelection?(selections: Record<Level, number[]>, pruned: Record<string, number[]>): void;
  onPlot?(payload: PlotPayload, transform: PlotTransform | null): void;
  onError?(err: ApiError): void;
}

/** Affine view transform applied client-side to a locked plot layer. */
export interface PlotTransform {
  scaleX: number;
  scaleY: number;
  offsetX: number;
  offsetY: number;
}

function identityTransform(): PlotTransform {
  return { scaleX: 1, scaleY: 1, offsetX: 0, offsetY: 0 };
}

/**
 * Client-side mirror of the server session.
 *
 * Selection state is never mutated locally: every change round-trips through
 * the server and the mirror is replaced by the acknowledged response. Plot
 * refreshes are sequence-numbered so a stale response can never overwrite a
 * newer one. In locked mode, zoom/pan transforms the cached layer locally and
 * issues no requests at all.
 */
export class ViewState {
  selections: Record<Level, number[]> = { component: [], region: [], voxel: [] };
  setOpMode: SetOp = "new";
  layers: LayerToggles = {
    scatter: true,
    marginals: true,
    subMarginals: false,
    conditional: false,
    selectionOverlay: true,
  };
  locked = false;
  plotMode = "hist2d";
  /** Current view window per axis (nulls mean the payload's own range). */
  viewX: [number, number] | null = null;
  viewY: [number, number] | null = null;
  lastPlot: PlotPayload | null = null;

  private seq = 0;
  private applied = 0;
  requestLog: { path: string; zooming: boolean }[] = [];

  constructor(
    public api: ApiClient,
    private listener: StateListener = {},
  ) {}

  syncFromSnapshot(snap: SessionSnapshot): void {
    this.selections = { ...snap.selections };
    this.plotMode = snap.plot.mode;
    this.locked = snap.plot.locked;
  }

  /** One selection mutation; the server response is authoritative. */
  async applySelection(level: Level, ids: number[], op?: SetOp): Promise<SelectionResponse> {
    try {
      const res = await this.api.select(level, ids, op ?? this.setOpMode);
      this.selections = res.selections;
      this.listener.onSelection?.(res.selections, res.pruned);
      return res;
    } catch (err) {
      if (err instanceof ApiError) {
        // rejected: state unchanged, surface and rethrow
        this.listener.onError?.(err);
      }
      throw err;
    }
  }

  /** Lasso over a projection: candidates by the even-odd rule, then one
   * round-trip with the active set-op mode. */
  async lasso(
    level: Level,
    polygon: Point[],
    points: { id: number; x: number; y: number }[],
    op?: SetOp,
  ): Promise<SelectionResponse> {
    const ids = lassoCapture(points, polygon);
    return this.applySelection(level, ids, op);
  }

  /**
   * Fetch (or, when locked, locally transform) the joint plot layer.
   * `gesture` marks an in-flight zoom/pan: requests carry zooming=true and
   * the server answers model modes with histogram payloads.
   */
  async refreshPlot(req: PlotRequest = {}, gesture = false): Promise<PlotPayload | null> {
    if (this.locked && this.lastPlot) {
      // zero recompute requests while locked: transform the cached layer
      this.listener.onPlot?.(this.lastPlot, this.lockedTransform());
      return this.lastPlot;
    }
    const mySeq = ++this.seq;
    const full: PlotRequest = { mode: this.plotMode as PlotRequest["mode"], ...req, zooming: gesture };
    this.requestLog.push({ path: "/plot", zooming: gesture });
    const payload = await this.api.plot(full);
    if (mySeq < this.applied) return null; // stale: a newer response already landed
    this.applied = mySeq;
    this.lastPlot = payload;
    this.listener.onPlot?.(payload, null);
    return payload;
  }

  /** Zoom one axis (or both) about a fractional center of the current view. */
  async zoom(axis: "x" | "y" | "both", factor: number, centerFrac = 0.5): Promise<void> {
    const base = this.lastPlot;
    if (!base) return;
    const bx = this.viewX ?? (base.x_range as [number, number]);
    const by = this.viewY ?? (base.y_range as [number, number]);
    if (axis === "x" || axis === "both") this.viewX = zoomRange(bx, factor, centerFrac);
    if (axis === "y" || axis === "both") this.viewY = zoomRange(by, factor, centerFrac);
    if (this.locked) {
      this.listener.onPlot?.(base, this.lockedTransform());
      return;
    }
    await this.refreshPlot({}, true);
  }

  async pan(axis: "x" | "y", deltaFrac: number): Promise<void> {
    const base = this.lastPlot;
    if (!base) return;
    const r = axis === "x" ? this.viewX ?? (base.x_range as [number, number])
                           : this.viewY ?? (base.y_range as [number, number]);
    const width = r[1] - r[0];
    const moved: [number, number] = [r[0] + deltaFrac * width, r[1] + deltaFrac * width];
    if (axis === "x") this.viewX = moved;
    else this.viewY = moved;
    if (this.locked) {
      this.listener.onPlot?.(base, this.lockedTransform());
      return;
    }
    await this.refreshPlot({}, true);
  }

  /** Gesture finished: fetch the configured (possibly model) layer once. */
  async endGesture(): Promise<PlotPayload | null> {
    if (this.locked) return this.lastPlot;
    return this.refreshPlot({}, false);
  }

  async setLocked(locked: boolean): Promise<void> {
    await this.api.plotConfig({ locked });
    this.locked = locked;
    if (locked && !this.lastPlot) {
      await this.refreshPlot({}, false);
    }
  }

  async setMode(mode: string): Promise<void> {
    this.plotMode = mode;
    await this.api.plotConfig({ mode });
    if (!this.locked) await this.refreshPlot({}, false);
  }

  /** Affine map from the cached payload's ranges to the current view. */
  lockedTransform(): PlotTransform {
    const base = this.lastPlot;
    if (!base || (!this.viewX && !this.viewY)) return identityTransform();
    const bx = base.x_range as [number, number];
    const by = base.y_range as [number, number];
    const vx = this.viewX ?? bx;
    const vy = this.viewY ?? by;
    const scaleX = (bx[1] - bx[0]) / (vx[1] - vx[0]);
    const scaleY = (by[1] - by[0]) / (vy[1] - vy[0]);
    return {
      scaleX,
      scaleY,
      offsetX: (bx[0] - vx[0]) * scaleX / (bx[1] - bx[0]),
      offsetY: (by[0] - vy[0]) * scaleY / (by[1] - by[0]),
    };
  }
}

function zoomRange(r: [number, number], factor: number, centerFrac: number): [number, number] {
  const width = r[1] - r[0];
  const center = r[0] + centerFrac * width;
  const half = (width / factor) / 2;
  return [center - half, center + half];
}
