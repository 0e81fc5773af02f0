import { Point, simplifyPath } from "./geometry.js";
import { GRAY, layerColor } from "./colormap.js";
import type { Level, ProjectionPoint, SetOp } from "./types.js";
import type { ViewState } from "./state.js";

/**
 * One lasso-selectable projection scatter view on a canvas. Points are drawn
 * in data space mapped to the canvas; dragging draws a lasso polygon whose
 * capture set is sent to the server with the globally active set-op mode.
 */
export class ProjectionView {
  points: ProjectionPoint[] = [];
  private lassoPath: Point[] = [];
  private dragging = false;

  constructor(
    private canvas: HTMLCanvasElement,
    private state: ViewState,
    public level: Level,
    private onApplied?: () => void,
  ) {
    canvas.addEventListener("pointerdown", (e) => this.start(e));
    canvas.addEventListener("pointermove", (e) => this.move(e));
    canvas.addEventListener("pointerup", () => void this.finish());
    canvas.addEventListener("pointerleave", () => void this.finish());
  }

  setPoints(points: ProjectionPoint[]): void {
    this.points = points;
    this.draw();
  }

  markSelected(ids: Set<number>): void {
    for (const p of this.points) p.selected = ids.has(p.id);
    this.draw();
  }

  private dataBounds(): { x0: number; y0: number; x1: number; y1: number } {
    if (!this.points.length) return { x0: 0, y0: 0, x1: 1, y1: 1 };
    const xs = this.points.map((p) => p.x);
    const ys = this.points.map((p) => p.y);
    const pad = 0.06;
    const x0 = Math.min(...xs), x1 = Math.max(...xs);
    const y0 = Math.min(...ys), y1 = Math.max(...ys);
    const dx = (x1 - x0 || 1) * pad, dy = (y1 - y0 || 1) * pad;
    return { x0: x0 - dx, x1: x1 + dx, y0: y0 - dy, y1: y1 + dy };
  }

  private toScreen(p: { x: number; y: number }): Point {
    const b = this.dataBounds();
    return [
      ((p.x - b.x0) / (b.x1 - b.x0)) * this.canvas.width,
      this.canvas.height - ((p.y - b.y0) / (b.y1 - b.y0)) * this.canvas.height,
    ];
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    for (const p of this.points) {
      const [x, y] = this.toScreen(p);
      ctx.fillStyle = p.gray ? GRAY : layerColor(p.layer, p.selected);
      ctx.beginPath();
      ctx.arc(x, y, p.selected ? 5 : 3.2, 0, Math.PI * 2);
      ctx.fill();
      if (p.selected) {
        ctx.strokeStyle = "rgb(20,20,20)";
        ctx.stroke();
      }
    }
    if (this.lassoPath.length > 1) {
      ctx.strokeStyle = "rgba(30,30,30,0.9)";
      ctx.setLineDash([5, 4]);
      ctx.beginPath();
      this.lassoPath.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }

  private eventPoint(e: PointerEvent): Point {
    const r = this.canvas.getBoundingClientRect();
    return [
      ((e.clientX - r.left) / r.width) * this.canvas.width,
      ((e.clientY - r.top) / r.height) * this.canvas.height,
    ];
  }

  private start(e: PointerEvent): void {
    this.dragging = true;
    this.lassoPath = [this.eventPoint(e)];
  }

  private move(e: PointerEvent): void {
    if (!this.dragging) return;
    this.lassoPath.push(this.eventPoint(e));
    this.draw();
  }

  private async finish(op?: SetOp): Promise<void> {
    if (!this.dragging) return;
    this.dragging = false;
    const polygon = simplifyPath(this.lassoPath, 2);
    this.lassoPath = [];
    this.draw();
    if (polygon.length < 3) return;
    const screenPoints = this.points.map((p) => {
      const [x, y] = this.toScreen(p);
      return { id: p.id, x, y };
    });
    try {
      await this.state.lasso(this.level, polygon, screenPoints, op);
      this.onApplied?.();
    } catch {
      // server rejected (e.g. nesting); state unchanged, toast raised upstream
    }
  }
}
