import { describe, expect, it } from "vitest";

import { groupBy, mean, spearman } from "../src/stats.js";

describe("spearman", () => {
  it("is -1 for a strictly decreasing relation", () => {
    expect(spearman([1, 2, 4, 8], [100, 80, 60, 40])).toBeCloseTo(-1, 12);
  });

  it("is +1 for a strictly increasing relation", () => {
    expect(spearman([1, 2, 3], [5, 9, 11])).toBeCloseTo(1, 12);
  });

  it("matches the hand-computed mixed case", () => {
    // ranks x=[1,2,3], y=[3,1,2]: d^2 sums to 6 -> rho = 1 - 36/24 = -0.5
    expect(spearman([1, 2, 3], [30, 10, 20])).toBeCloseTo(-0.5, 12);
  });

  it("is null for fewer than two points", () => {
    expect(spearman([1], [2])).toBeNull();
  });

  it("is null when one side has zero variance", () => {
    expect(spearman([1, 2, 3], [5, 5, 5])).toBeNull();
  });

  it("averages tied ranks", () => {
    // y ties at the bottom two: ranks y = [1.5, 1.5, 3]
    const rho = spearman([1, 2, 3], [7, 7, 9])!;
    expect(rho).toBeGreaterThan(0.8);
    expect(rho).toBeLessThan(1);
  });
});

describe("mean / groupBy", () => {
  it("mean averages", () => {
    expect(mean([1, 2, 3, 4])).toBe(2.5);
  });

  it("mean rejects empty input", () => {
    expect(() => mean([])).toThrowError();
  });

  it("groupBy buckets by key", () => {
    const grouped = groupBy([1, 2, 3, 4], (n) => (n % 2 ? "odd" : "even"));
    expect(grouped.get("odd")).toEqual([1, 3]);
    expect(grouped.get("even")).toEqual([2, 4]);
  });
});
