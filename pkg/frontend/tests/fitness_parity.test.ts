import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import { describe, expect, it } from "vitest";

import { mulberry32, randomPopulation, royalRoadFitness } from "../src/ga.js";
import { hexToBits } from "../src/protocol.js";

const corpusPath = resolve(__dirname, "../../vectors/fitness_corpus.json");
const corpus = JSON.parse(readFileSync(corpusPath, "utf-8"));

describe("fitness parity with the shared corpus", () => {
  it("matches every corpus entry exactly", () => {
    expect(corpus.entries.length).toBe(1000);
    for (const entry of corpus.entries) {
      const bits = hexToBits(entry.genome, corpus.genome_length);
      const fitness = royalRoadFitness(bits, corpus.block_size, corpus.block_reward);
      expect(fitness).toBe(entry.fitness);
    }
  });

  it("scores the edge genomes", () => {
    expect(royalRoadFitness(new Uint8Array(256), 8, 8)).toBe(0);
    expect(royalRoadFitness(new Uint8Array(256).fill(1), 8, 8)).toBe(256);
  });

  it("rejects lengths not divisible by the block size", () => {
    expect(() => royalRoadFitness(new Uint8Array(10), 4, 4)).toThrow();
  });
});

describe("population plumbing", () => {
  it("builds a sorted population of the configured size", () => {
    const params = {
      genome_length: 64,
      population_size: 30,
      replacement_fraction: 0.5,
      crossover_priority: 0.8,
      mutation_priority: 0.2,
      per_bit_mutation_rate: 0.01,
      block_size: 8,
      block_reward: 8,
      mutate_crossed_offspring: false,
    };
    const pop = randomPopulation(params, mulberry32(7));
    expect(pop.members.length).toBe(30);
    for (let i = 1; i < pop.members.length; i++) {
      expect(pop.members[i - 1].fitness).toBeGreaterThanOrEqual(pop.members[i].fitness);
    }
  });
});
