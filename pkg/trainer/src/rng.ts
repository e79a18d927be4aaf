/** Deterministic pseudo-random numbers (mulberry32) and sampling helpers.
 *
 * Every stochastic choice in training flows through one of these generators,
 * so two runs with the same seed consume identical random streams and produce
 * bit-identical parameter trajectories.
 */

export interface Rng {
  /** Uniform float in [0, 1). */
  next(): number;
}

export function makeRng(seed: number): Rng {
  let state = seed >>> 0;
  return {
    next(): number {
      state = (state + 0x6d2b79f5) >>> 0;
      let t = state;
      t = Math.imul(t ^ (t >>> 15), t | 1);
      t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
      return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    },
  };
}

/** Uniform integer in [0, bound). */
export function nextInt(rng: Rng, bound: number): number {
  return Math.floor(rng.next() * bound);
}

/** Uniform float in [-scale, scale), for parameter initialisation. */
export function nextUniform(rng: Rng, scale: number): number {
  return (rng.next() * 2 - 1) * scale;
}

/** In-place Fisher-Yates shuffle. */
export function shuffle<T>(items: T[], rng: Rng): void {
  for (let i = items.length - 1; i > 0; i--) {
    const j = nextInt(rng, i + 1);
    const tmp = items[i];
    items[i] = items[j];
    items[j] = tmp;
  }
}

/** Sample `count` indices in [0, bound) with replacement. */
export function sampleIndices(rng: Rng, bound: number, count: number): number[] {
  const out: number[] = [];
  for (let i = 0; i < count; i++) {
    out.push(nextInt(rng, bound));
  }
  return out;
}
