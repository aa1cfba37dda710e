/**
 * Steady-state bitstring GA, browser edition.
 *
 * Mirrors the headless client's contracts exactly where it matters (fitness
 * values, selection/replacement discipline); random streams are independent,
 * so trajectories legitimately differ between implementations.
 */

export interface GaParamsWire {
  genome_length: number;
  population_size: number;
  replacement_fraction: number;
  crossover_priority: number;
  mutation_priority: number;
  per_bit_mutation_rate: number;
  block_size: number;
  block_reward: number;
  mutate_crossed_offspring: boolean;
}

export interface Individual {
  bits: Uint8Array;
  fitness: number;
}

export interface Population {
  members: Individual[]; // sorted by fitness, best first; newer wins ties
  generation: number;
}

export type Rng = () => number;

/** Small, fast, seedable PRNG; good enough for an independent client stream. */
export function mulberry32(seed: number): Rng {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomSeed(): number {
  if (typeof crypto !== "undefined" && crypto.getRandomValues) {
    const word = new Uint32Array(1);
    crypto.getRandomValues(word);
    return word[0];
  }
  return Math.floor(Math.random() * 4294967296);
}

/** Reward per contiguous aligned block whose bits are all one. */
export function royalRoadFitness(bits: Uint8Array, blockSize: number, blockReward: number): number {
  if (blockSize < 1 || bits.length % blockSize !== 0) {
    throw new Error(`genome length ${bits.length} is not divisible by block size ${blockSize}`);
  }
  let complete = 0;
  for (let start = 0; start < bits.length; start += blockSize) {
    let allOnes = true;
    for (let j = start; j < start + blockSize; j++) {
      if (bits[j] === 0) {
        allOnes = false;
        break;
      }
    }
    if (allOnes) complete += 1;
  }
  return complete * blockReward;
}

function evaluate(bits: Uint8Array, params: GaParamsWire): Individual {
  return { bits, fitness: royalRoadFitness(bits, params.block_size, params.block_reward) };
}

/** Stable descending sort; among equal fitness the earlier array entry wins,
 * so callers list new members first to give them the tie. */
function sortMembers(members: Individual[]): Individual[] {
  return members
    .map((m, i) => ({ m, i }))
    .sort((a, b) => b.m.fitness - a.m.fitness || a.i - b.i)
    .map((x) => x.m);
}

export function randomPopulation(params: GaParamsWire, rng: Rng): Population {
  const members: Individual[] = [];
  for (let i = 0; i < params.population_size; i++) {
    const bits = new Uint8Array(params.genome_length);
    for (let j = 0; j < bits.length; j++) bits[j] = rng() < 0.5 ? 1 : 0;
    members.push(evaluate(bits, params));
  }
  return { members: sortMembers(members), generation: 0 };
}

/** Linear rank selection: weight of rank r (1 = best) is n - r + 1. */
export function rankSelectIndex(size: number, rng: Rng): number {
  const total = (size * (size + 1)) / 2;
  let x = rng() * total;
  for (let i = 0; i < size; i++) {
    x -= size - i;
    if (x < 0) return i;
  }
  return size - 1;
}

export function onePointCrossover(a: Uint8Array, b: Uint8Array, rng: Rng): Uint8Array {
  const cut = 1 + Math.floor(rng() * (a.length - 1));
  const child = new Uint8Array(a.length);
  child.set(a.subarray(0, cut), 0);
  child.set(b.subarray(cut), cut);
  return child;
}

export function mutateBits(bits: Uint8Array, perBitRate: number, rng: Rng): Uint8Array {
  const out = new Uint8Array(bits);
  for (let j = 0; j < out.length; j++) {
    if (rng() < perBitRate) out[j] ^= 1;
  }
  return out;
}

/** One steady-state generation: breed offspring, replace the worst half. */
export function breedGeneration(
  population: Population,
  params: GaParamsWire,
  rng: Rng,
): { population: Population; evaluations: number } {
  const members = population.members;
  const k = Math.round(params.population_size * params.replacement_fraction);
  const children: Individual[] = [];
  for (let i = 0; i < k; i++) {
    let childBits: Uint8Array;
    if (rng() < params.crossover_priority) {
      const pa = members[rankSelectIndex(members.length, rng)].bits;
      const pb = members[rankSelectIndex(members.length, rng)].bits;
      childBits = onePointCrossover(pa, pb, rng);
      if (params.mutate_crossed_offspring) {
        childBits = mutateBits(childBits, params.per_bit_mutation_rate, rng);
      }
    } else {
      const parent = members[rankSelectIndex(members.length, rng)].bits;
      childBits = mutateBits(parent, params.per_bit_mutation_rate, rng);
    }
    children.push(evaluate(childBits, params));
  }
  const merged = children.concat(members.slice(0, members.length - k));
  return {
    population: { members: sortMembers(merged), generation: population.generation + 1 },
    evaluations: k,
  };
}

/** The migrant replaces the current worst member; newer wins fitness ties. */
export function incorporateImmigrant(population: Population, immigrant: Individual): Population {
  const kept = population.members.slice(0, population.members.length - 1);
  return {
    members: sortMembers([immigrant, ...kept]),
    generation: population.generation,
  };
}

export function bestOf(population: Population): Individual {
  return population.members[0];
}
