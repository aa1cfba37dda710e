/**
 * Wire codecs matching the server's canonical JSON byte-for-byte: compact,
 * key-sorted, UTF-8, with real-valued fields always carrying a decimal point
 * and genomes as lowercase hex, most-significant bit first.
 */

import type { GaParamsWire } from "./ga.js";

export const PROTOCOL_VERSION = 1;

export interface MigrationReportWire {
  protocol_version: number;
  experiment_id: number;
  client_id: string;
  segment_index: number;
  best_genome: Uint8Array;
  best_fitness: number;
  evaluations_delta: number;
}

export interface MigrationReplyWire {
  protocol_version: number;
  experiment_id: number;
  immigrant_genome: Uint8Array;
  immigrant_fitness: number;
  generations_to_run: number;
}

export interface ExperimentConfigWire {
  protocol_version: number;
  experiment_id: number;
  evaluation_budget: number;
  generations_per_segment: number;
  ga: GaParamsWire;
}

export class WireFormatError extends Error {}

const HEX = "0123456789abcdef";

export function bitsToHex(bits: Uint8Array): string {
  if (bits.length % 4 !== 0) {
    throw new WireFormatError(`genome length ${bits.length} is not a multiple of 4`);
  }
  let out = "";
  for (let i = 0; i < bits.length; i += 4) {
    const nibble = (bits[i] << 3) | (bits[i + 1] << 2) | (bits[i + 2] << 1) | bits[i + 3];
    out += HEX[nibble];
  }
  return out;
}

export function hexToBits(text: string, nBits: number): Uint8Array {
  if (text.length !== nBits / 4) {
    throw new WireFormatError(`genome hex length ${text.length} != expected ${nBits / 4}`);
  }
  const bits = new Uint8Array(nBits);
  for (let i = 0; i < text.length; i++) {
    const nibble = parseInt(text[i], 16);
    if (Number.isNaN(nibble)) {
      throw new WireFormatError(`genome is not valid hex: ${text[i]}`);
    }
    bits[i * 4] = (nibble >> 3) & 1;
    bits[i * 4 + 1] = (nibble >> 2) & 1;
    bits[i * 4 + 2] = (nibble >> 1) & 1;
    bits[i * 4 + 3] = nibble & 1;
  }
  return bits;
}

/** Real-valued fields keep a decimal point even when integral ("16.0"). */
function formatReal(value: number): string {
  return Number.isInteger(value) ? value.toFixed(1) : String(value);
}

/** Canonical encoding: keys in sorted order, compact separators. */
export function encodeReport(report: MigrationReportWire): string {
  return (
    "{" +
    `"best_fitness":${formatReal(report.best_fitness)},` +
    `"best_genome":${JSON.stringify(bitsToHex(report.best_genome))},` +
    `"client_id":${JSON.stringify(report.client_id)},` +
    `"evaluations_delta":${report.evaluations_delta},` +
    `"experiment_id":${report.experiment_id},` +
    `"protocol_version":${report.protocol_version},` +
    `"segment_index":${report.segment_index}` +
    "}"
  );
}

function requireNumber(obj: Record<string, unknown>, key: string): number {
  const value = obj[key];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new WireFormatError(`field ${key} missing or not a finite number`);
  }
  return value;
}

function requireString(obj: Record<string, unknown>, key: string): string {
  const value = obj[key];
  if (typeof value !== "string") {
    throw new WireFormatError(`field ${key} missing or not a string`);
  }
  return value;
}

function parseObject(text: string): Record<string, unknown> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (exc) {
    throw new WireFormatError(`invalid JSON: ${exc}`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new WireFormatError("expected a JSON object");
  }
  return parsed as Record<string, unknown>;
}

export function decodeReply(text: string, genomeLength: number): MigrationReplyWire {
  const obj = parseObject(text);
  const generations = requireNumber(obj, "generations_to_run");
  if (generations < 0) throw new WireFormatError("generations_to_run must be >= 0");
  return {
    protocol_version: requireNumber(obj, "protocol_version"),
    experiment_id: requireNumber(obj, "experiment_id"),
    immigrant_genome: hexToBits(requireString(obj, "immigrant_genome"), genomeLength),
    immigrant_fitness: requireNumber(obj, "immigrant_fitness"),
    generations_to_run: generations,
  };
}

export function decodeConfig(text: string): ExperimentConfigWire {
  const obj = parseObject(text);
  const gaRaw = obj["ga"];
  if (typeof gaRaw !== "object" || gaRaw === null) {
    throw new WireFormatError("field ga missing or not an object");
  }
  const ga = gaRaw as Record<string, unknown>;
  const params: GaParamsWire = {
    genome_length: requireNumber(ga, "genome_length"),
    population_size: requireNumber(ga, "population_size"),
    replacement_fraction: requireNumber(ga, "replacement_fraction"),
    crossover_priority: requireNumber(ga, "crossover_priority"),
    mutation_priority: requireNumber(ga, "mutation_priority"),
    per_bit_mutation_rate: requireNumber(ga, "per_bit_mutation_rate"),
    block_size: requireNumber(ga, "block_size"),
    block_reward: requireNumber(ga, "block_reward"),
    mutate_crossed_offspring: ga["mutate_crossed_offspring"] === true,
  };
  return {
    protocol_version: requireNumber(obj, "protocol_version"),
    experiment_id: requireNumber(obj, "experiment_id"),
    evaluation_budget: requireNumber(obj, "evaluation_budget"),
    generations_per_segment: requireNumber(obj, "generations_per_segment"),
    ga: params,
  };
}

/** 128-bit random client token as 32 hex characters. */
export function freshClientId(): string {
  const bytes = new Uint8Array(16);
  if (typeof crypto !== "undefined" && crypto.getRandomValues) {
    crypto.getRandomValues(bytes);
  } else {
    for (let i = 0; i < bytes.length; i++) bytes[i] = Math.floor(Math.random() * 256);
  }
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}
