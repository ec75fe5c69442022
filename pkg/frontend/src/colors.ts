/**
 * Stable per-cluster colors: successive ids step around the hue wheel by
 * the golden angle, so nearby ids stay visually distinct and a cluster
 * keeps its color across edits.
 */

export type Rgb = [number, number, number];

export const UNCLUSTERED: Rgb = [0.42, 0.42, 0.42];

const GOLDEN_ANGLE = 137.50776405003785;

export function clusterColor(id: number): Rgb {
  const hue = ((id * GOLDEN_ANGLE) % 360 + 360) % 360;
  return hslToRgb(hue, 0.72, 0.55);
}

export function cssColor([r, g, b]: Rgb): string {
  const to255 = (v: number) => Math.round(v * 255);
  return `rgb(${to255(r)}, ${to255(g)}, ${to255(b)})`;
}

export function hslToRgb(h: number, s: number, l: number): Rgb {
  const c = (1 - Math.abs(2 * l - 1)) * s;
  const hp = h / 60;
  const x = c * (1 - Math.abs((hp % 2) - 1));
  let rgb: Rgb;
  if (hp < 1) rgb = [c, x, 0];
  else if (hp < 2) rgb = [x, c, 0];
  else if (hp < 3) rgb = [0, c, x];
  else if (hp < 4) rgb = [0, x, c];
  else if (hp < 5) rgb = [x, 0, c];
  else rgb = [c, 0, x];
  const m = l - c / 2;
  return [rgb[0] + m, rgb[1] + m, rgb[2] + m];
}
