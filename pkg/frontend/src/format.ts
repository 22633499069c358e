/** Render a service-sourced number at four significant digits.
 *
 * Every numeric string in the UI goes through this one function, and the
 * contract tests apply the same function to raw responses, so rendered
 * text is byte-equal to formatted response values by construction.
 */
export function fmt(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  if (x === 0) return "0";
  return Number(x.toPrecision(4)).toString();
}

/** Bar length for a ranking row, as a percentage of the largest value. */
export function barPercent(value: number, max: number): number {
  if (max <= 0) return 0;
  return Math.max(0, Math.min(100, (Math.abs(value) / max) * 100));
}
