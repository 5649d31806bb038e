// Importance colormap: blue (low) through purple to red (high).

export function heatColor(v: number): string {
  const x = Math.min(1, Math.max(0, v));
  const r = Math.round(255 * x);
  const b = Math.round(255 * (1 - x));
  const g = Math.round(40 * (1 - Math.abs(2 * x - 1)));
  return `rgb(${r},${g},${b})`;
}
