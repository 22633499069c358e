import { describe, expect, it } from "vitest";

import { barPercent, fmt } from "../src/format.js";

describe("fmt", () => {
  it("keeps four significant digits without trailing zeros", () => {
    expect(fmt(0.08775096498292187)).toBe("0.08775");
    expect(fmt(1.6010146625497577)).toBe("1.601");
    expect(fmt(0.0013327775667371297)).toBe("0.001333");
    expect(fmt(0.5)).toBe("0.5");
  });

  it("renders exact zero as 0", () => {
    expect(fmt(0)).toBe("0");
    expect(fmt(-0)).toBe("0");
  });

  it("does not round tiny values to zero", () => {
    expect(fmt(-9.3258734069741e-17)).toBe("-9.326e-17");
    expect(fmt(1e-12)).toBe("1e-12");
  });

  it("passes non-finite values through", () => {
    expect(fmt(Number.NaN)).toBe("NaN");
    expect(fmt(Number.POSITIVE_INFINITY)).toBe("Infinity");
  });
});

describe("barPercent", () => {
  it("scales against the maximum and clamps", () => {
    expect(barPercent(1, 2)).toBe(50);
    expect(barPercent(2, 2)).toBe(100);
    expect(barPercent(3, 2)).toBe(100);
    expect(barPercent(0, 2)).toBe(0);
  });

  it("is safe when the maximum is zero", () => {
    expect(barPercent(1, 0)).toBe(0);
  });
});
