/**
 * 32-bit PRNG shared with the server. The server derives the hidden
 * target count from the stimulus render seed with this exact generator,
 * so the client can draw the right number of shapes without any payload
 * ever naming the count. Do not change without changing the server.
 */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return function () {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Hidden target count for a stimulus; first draw of the shared PRNG. */
export function deriveCount(renderSeed: number, lo: number, hi: number): number {
  return lo + Math.floor(mulberry32(renderSeed)() * (hi - lo + 1));
}
