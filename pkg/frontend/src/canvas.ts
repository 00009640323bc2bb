// Pixel <-> domain coordinate mapping for the 1-D/2-D click-to-place
// anchor canvas. Pure functions so the mapping is unit-testable.

export interface CanvasGeometry {
  width: number;
  height: number;
  lower: number[];
  upper: number[];
}

/** Linear map of a click position into domain coordinates. 1-D uses the
 *  horizontal axis only; 2-D maps y with the conventional flipped axis. */
export function pixelToDomain(
  geom: CanvasGeometry,
  px: number,
  py: number,
): number[] {
  const d = geom.lower.length;
  if (d < 1 || d > 2) {
    throw new Error("click placement supports 1-D and 2-D domains only");
  }
  const clamp = (v: number, lo: number, hi: number) =>
    Math.min(Math.max(v, lo), hi);
  const fx = clamp(px / geom.width, 0, 1);
  const x0 = geom.lower[0] + fx * (geom.upper[0] - geom.lower[0]);
  if (d === 1) return [x0];
  const fy = clamp(1 - py / geom.height, 0, 1);
  return [x0, geom.lower[1] + fy * (geom.upper[1] - geom.lower[1])];
}

export function domainToPixel(geom: CanvasGeometry, x: number[]): [number, number] {
  const fx = (x[0] - geom.lower[0]) / (geom.upper[0] - geom.lower[0]);
  if (x.length === 1) return [fx * geom.width, geom.height / 2];
  const fy = (x[1] - geom.lower[1]) / (geom.upper[1] - geom.lower[1]);
  return [fx * geom.width, (1 - fy) * geom.height];
}

export function inDomain(lower: number[], upper: number[], x: number[]): boolean {
  return x.every((v, i) => v >= lower[i] && v <= upper[i] && Number.isFinite(v));
}
