/** Small color helpers: cold-to-hot metric encoding and layer hues. */

export function coldHot(t: number): string {
  // blue (cold) -> white -> red (hot)
  const c = Math.max(0, Math.min(1, t));
  const r = Math.round(255 * Math.min(1, 2 * c));
  const b = Math.round(255 * Math.min(1, 2 * (1 - c)));
  const g = Math.round(255 * (1 - Math.abs(2 * c - 1)) * 0.85);
  return `rgb(${r},${g},${b})`;
}

export const GRAY = "rgb(150,150,150)";

/** Normalize values to [0,1]; constant inputs map to 0.5. */
export function normalize(values: number[]): number[] {
  const finite = values.filter((v) => Number.isFinite(v));
  if (!finite.length) return values.map(() => 0.5);
  const lo = Math.min(...finite);
  const hi = Math.max(...finite);
  if (hi <= lo) return values.map(() => 0.5);
  return values.map((v) => (Number.isFinite(v) ? (v - lo) / (hi - lo) : 0.5));
}

const LAYER_HUES = [210, 30, 130, 80, 280, 0, 170, 55];

export function layerColor(layer: number, selected = false): string {
  const hue = LAYER_HUES[layer % LAYER_HUES.length];
  return `hsl(${hue},${selected ? 90 : 55}%,${selected ? 45 : 60}%)`;
}
