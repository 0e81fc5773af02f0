/** Lasso geometry: point-in-polygon by the even-odd (ray crossing) rule. */

export type Point = [number, number];

export function pointInPolygon(p: Point, polygon: Point[]): boolean {
  const [x, y] = p;
  let inside = false;
  const n = polygon.length;
  for (let i = 0, j = n - 1; i < n; j = i++) {
    const [xi, yi] = polygon[i];
    const [xj, yj] = polygon[j];
    // edge crosses the horizontal ray through y?
    if (yi > y !== yj > y) {
      const xCross = ((xj - xi) * (y - yi)) / (yj - yi) + xi;
      if (x < xCross) inside = !inside;
    }
  }
  return inside;
}

/** Ids of the points captured by a lasso polygon. */
export function lassoCapture(
  points: { id: number; x: number; y: number }[],
  polygon: Point[],
): number[] {
  if (polygon.length < 3) return [];
  return points.filter((p) => pointInPolygon([p.x, p.y], polygon)).map((p) => p.id);
}

/** Drop consecutive duplicates and close tiny jitter loops from a lasso path. */
export function simplifyPath(path: Point[], minStep = 1e-9): Point[] {
  const out: Point[] = [];
  for (const p of path) {
    const last = out[out.length - 1];
    if (!last || Math.hypot(p[0] - last[0], p[1] - last[1]) > minStep) {
      out.push(p);
    }
  }
  return out;
}

export function polygonBounds(polygon: Point[]): { x0: number; y0: number; x1: number; y1: number } {
  let x0 = Infinity, y0 = Infinity, x1 = -Infinity, y1 = -Infinity;
  for (const [x, y] of polygon) {
    x0 = Math.min(x0, x);
    y0 = Math.min(y0, y);
    x1 = Math.max(x1, x);
    y1 = Math.max(y1, y);
  }
  return { x0, y0, x1, y1 };
}
