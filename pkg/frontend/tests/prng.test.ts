import { describe, expect, it } from "vitest";

import { deriveCount, mulberry32 } from "../src/prng.js";

// Golden values frozen on the server side (tests/test_service.py); both
// implementations must agree bit-for-bit or hidden counts diverge.
describe("mulberry32", () => {
  it("matches the server's frozen outputs", () => {
    const r = mulberry32(12345);
    expect([r(), r(), r(), r()]).toEqual([
      0.9797282677609473, 0.3067522644996643, 0.484205421525985,
      0.817934412509203,
    ]);
  });

  it("handles edge seeds like the server", () => {
    expect(mulberry32(0)()).toBe(0.26642920868471265);
    expect(mulberry32(4294967295)()).toBe(0.8964226141106337);
    expect(mulberry32(987654321)()).toBe(0.9514403040520847);
  });

  it("is deterministic per seed", () => {
    const a = mulberry32(777);
    const b = mulberry32(777);
    for (let i = 0; i < 100; i++) expect(a()).toBe(b());
  });
});

describe("deriveCount", () => {
  it("matches the server's frozen counts", () => {
    expect([1, 2, 3, 42, 777].map((s) => deriveCount(s, 3, 50))).toEqual([
      33, 38, 37, 31, 35,
    ]);
  });

  it("stays within the configured range", () => {
    for (let seed = 0; seed < 500; seed++) {
      const c = deriveCount(seed, 3, 50);
      expect(c).toBeGreaterThanOrEqual(3);
      expect(c).toBeLessThanOrEqual(50);
    }
  });
});
