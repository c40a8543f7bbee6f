/** Stable hashing and a seeded PRNG so extraction is deterministic per config. */
import { createHash } from "node:crypto";

export function sha256Hex(parts: (string | Buffer)[]): string {
  const h = createHash("sha256");
  for (const p of parts) h.update(p);
  return h.digest("hex");
}

/** First 8 hex digits of a sha256 as an unsigned 32-bit seed. */
export function seedFrom(parts: (string | Buffer)[]): number {
  return parseInt(sha256Hex(parts).slice(0, 8), 16) >>> 0;
}

/** mulberry32: small, fast, good enough for synthetic embeddings. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Standard normal via Box-Muller. */
export function gaussian(rand: () => number): number {
  let u = 0;
  let v = 0;
  while (u === 0) u = rand();
  while (v === 0) v = rand();
  return Math.sqrt(-2.0 * Math.log(u)) * Math.cos(2.0 * Math.PI * v);
}

/** Unit vector derived deterministically from the seed material. */
export function unitVector(dim: number, parts: (string | Buffer)[]): number[] {
  const rand = mulberry32(seedFrom(parts));
  const out = new Array<number>(dim);
  let norm = 0;
  for (let i = 0; i < dim; i++) {
    const g = gaussian(rand);
    out[i] = g;
    norm += g * g;
  }
  norm = Math.sqrt(norm);
  for (let i = 0; i < dim; i++) out[i] /= norm;
  return out;
}
