import { describe, expect, it } from "vitest";

import { rleDecode, rleEncode } from "../src/rle.js";

describe("rle codec", () => {
  it("decodes a known background-first example", () => {
    expect(Array.from(rleDecode([2, 3, 1], 2, 3))).toEqual([0, 0, 1, 1, 1, 0]);
  });

  it("leading foreground means a zero-length first run", () => {
    expect(Array.from(rleDecode([0, 2, 2], 1, 4))).toEqual([1, 1, 0, 0]);
  });

  it("rejects totals that do not match the shape", () => {
    expect(() => rleDecode([3], 2, 2)).toThrow(/sum/);
  });

  it("round-trips random masks", () => {
    let seed = 12345;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let trial = 0; trial < 50; trial++) {
      const h = 1 + Math.floor(rand() * 12);
      const w = 1 + Math.floor(rand() * 12);
      const mask = new Uint8Array(h * w);
      const density = rand();
      for (let i = 0; i < mask.length; i++) mask[i] = rand() < density ? 1 : 0;
      const decoded = rleDecode(rleEncode(mask), h, w);
      expect(Array.from(decoded)).toEqual(Array.from(mask));
    }
  });
});
