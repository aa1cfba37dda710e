/**
 * The volunteer client state machine, DOM-free so it runs identically in the
 * page and under a node test runner.
 *
 * Phases: fetching-config -> (running <-> waiting-reply)* -> stopped. While
 * running, generations execute in small slices with a cooperative yield
 * between slices so the page stays responsive and pause takes effect quickly.
 */

import {
  bestOf,
  breedGeneration,
  incorporateImmigrant,
  mulberry32,
  randomPopulation,
  randomSeed,
  royalRoadFitness,
  type Population,
  type Rng,
} from "./ga.js";
import {
  decodeConfig,
  decodeReply,
  encodeReport,
  freshClientId,
  PROTOCOL_VERSION,
  WireFormatError,
  type ExperimentConfigWire,
  type MigrationReportWire,
} from "./protocol.js";

export type Phase = "fetching-config" | "running" | "waiting-reply" | "stopped";
export type StopReason = "budget" | "stale-experiment" | "error" | null;

export interface ClientStatus {
  phase: Phase;
  experimentId: number | null;
  clientId: string;
  currentGeneration: number;
  bestFitnessLocal: number;
  bestFitnessGlobal: number | null;
  segmentsDone: number;
  evaluationsContributed: number;
  paused: boolean;
  error: string | null;
  stopReason: StopReason;
  /** true when the server ended the experiment and a reload would join the next one */
  reloadOffered: boolean;
}

export interface ClientOptions {
  baseUrl?: string;
  fetchImpl?: typeof fetch;
  clientId?: string;
  seed?: number;
  /** generations per cooperative slice; each slice is far below the 250 ms budget */
  chunkGenerations?: number;
  yieldControl?: () => Promise<void>;
  sleep?: (ms: number) => Promise<void>;
  retryDelaysMs?: number[];
  onUpdate?: (status: ClientStatus) => void;
}

const defaultYield = () => new Promise<void>((resolve) => setTimeout(resolve, 0));
const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class VolunteerClient {
  readonly status: ClientStatus;

  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;
  private readonly chunkGenerations: number;
  private readonly yieldControl: () => Promise<void>;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly retryDelaysMs: number[];
  private readonly onUpdate: (status: ClientStatus) => void;
  private readonly rng: Rng;

  private config: ExperimentConfigWire | null = null;
  private population: Population | null = null;
  private generationsNext = 0;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? "").replace(/\/$/, "");
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.chunkGenerations = options.chunkGenerations ?? 5;
    this.yieldControl = options.yieldControl ?? defaultYield;
    this.sleep = options.sleep ?? defaultSleep;
    this.retryDelaysMs = options.retryDelaysMs ?? [200, 400, 800];
    this.onUpdate = options.onUpdate ?? (() => {});
    this.rng = mulberry32(options.seed ?? randomSeed());
    this.status = {
      phase: "fetching-config",
      experimentId: null,
      clientId: options.clientId ?? freshClientId(),
      currentGeneration: 0,
      bestFitnessLocal: 0,
      bestFitnessGlobal: null,
      segmentsDone: 0,
      evaluationsContributed: 0,
      paused: false,
      error: null,
      stopReason: null,
      reloadOffered: false,
    };
  }

  private update(changes: Partial<ClientStatus>): void {
    Object.assign(this.status, changes);
    this.onUpdate(this.status);
  }

  /** Fetch the experiment config and build the starting population.
   * On failure the client stays in fetching-config with a visible error so
   * the page can offer a retry. */
  async bootstrap(): Promise<boolean> {
    this.update({ phase: "fetching-config", error: null });
    let body: string;
    try {
      const resp = await this.fetchImpl(this.baseUrl + "/api/config");
      if (!resp.ok) throw new Error(`config fetch failed: HTTP ${resp.status}`);
      body = await resp.text();
    } catch (exc) {
      this.update({ error: `cannot reach the server (${exc})` });
      return false;
    }
    try {
      this.config = decodeConfig(body);
    } catch (exc) {
      this.update({ error: `bad config payload (${exc})` });
      return false;
    }
    this.population = randomPopulation(this.config.ga, this.rng);
    this.generationsNext = this.config.generations_per_segment;
    this.update({
      phase: "running",
      experimentId: this.config.experiment_id,
      currentGeneration: 0,
      bestFitnessLocal: bestOf(this.population).fitness,
      segmentsDone: 0,
      evaluationsContributed: 0,
      stopReason: null,
      reloadOffered: false,
    });
    return true;
  }

  pause(): void {
    this.update({ paused: true });
  }

  resume(): void {
    this.update({ paused: false });
  }

  private async waitWhilePaused(): Promise<void> {
    while (this.status.paused && this.status.phase !== "stopped") {
      await this.sleep(50);
    }
  }

  /** Run one segment in cooperative slices, then exchange with the server.
   * Returns false when the client has stopped. */
  async segmentCycle(): Promise<boolean> {
    if (!this.config || !this.population || this.status.phase !== "running") {
      return false;
    }
    const config = this.config;
    let evaluations = 0;
    let generationsLeft = this.generationsNext;
    while (generationsLeft > 0) {
      await this.waitWhilePaused();
      const slice = Math.min(this.chunkGenerations, generationsLeft);
      for (let g = 0; g < slice; g++) {
        const step = breedGeneration(this.population, config.ga, this.rng);
        this.population = step.population;
        evaluations += step.evaluations;
      }
      generationsLeft -= slice;
      this.update({
        currentGeneration: this.status.currentGeneration + slice,
        bestFitnessLocal: bestOf(this.population).fitness,
      });
      await this.yieldControl(); // keeps the page interactive (<250 ms slices)
    }

    await this.waitWhilePaused();
    const best = bestOf(this.population);
    const report: MigrationReportWire = {
      protocol_version: PROTOCOL_VERSION,
      experiment_id: config.experiment_id,
      client_id: this.status.clientId,
      segment_index: this.status.segmentsDone + 1,
      best_genome: best.bits,
      best_fitness: best.fitness,
      evaluations_delta: evaluations,
    };
    this.update({ phase: "waiting-reply" });
    const replyText = await this.postWithRetries(encodeReport(report));
    if (replyText === null) {
      this.update({ phase: "stopped", stopReason: "error", error: "migration report failed" });
      return false;
    }

    let reply;
    try {
      reply = decodeReply(replyText, config.ga.genome_length);
    } catch (exc) {
      const message = exc instanceof WireFormatError ? exc.message : String(exc);
      this.update({ phase: "stopped", stopReason: "error", error: `bad reply: ${message}` });
      return false;
    }

    if (reply.experiment_id !== config.experiment_id) {
      this.update({ phase: "stopped", stopReason: "stale-experiment", reloadOffered: true });
      return false;
    }
    this.update({
      segmentsDone: this.status.segmentsDone + 1,
      evaluationsContributed: this.status.evaluationsContributed + evaluations,
      bestFitnessGlobal: reply.immigrant_fitness,
    });
    if (reply.generations_to_run === 0) {
      this.update({ phase: "stopped", stopReason: "budget", reloadOffered: true });
      return false;
    }
    const immigrant = {
      bits: reply.immigrant_genome,
      fitness: royalRoadFitness(
        reply.immigrant_genome,
        config.ga.block_size,
        config.ga.block_reward,
      ),
    };
    this.population = incorporateImmigrant(this.population, immigrant);
    this.generationsNext = reply.generations_to_run;
    this.update({ phase: "running", bestFitnessLocal: bestOf(this.population).fitness });
    return true;
  }

  /** bootstrap + segment loop until the server says stop. */
  async run(): Promise<ClientStatus> {
    if (this.status.phase === "fetching-config") {
      const ok = await this.bootstrap();
      if (!ok) return this.status;
    }
    while (await this.segmentCycle()) {
      // next segment
    }
    return this.status;
  }

  private async postWithRetries(body: string): Promise<string | null> {
    for (let attempt = 0; attempt <= this.retryDelaysMs.length; attempt++) {
      try {
        const resp = await this.fetchImpl(this.baseUrl + "/api/migration", {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body,
        });
        if (resp.ok) return await resp.text();
        if (resp.status >= 400 && resp.status < 500) {
          return null; // rejected; retrying an invalid report cannot help
        }
      } catch {
        // network error: fall through to backoff
      }
      if (attempt < this.retryDelaysMs.length) {
        await this.sleep(this.retryDelaysMs[attempt]);
      }
    }
    return null;
  }
}
