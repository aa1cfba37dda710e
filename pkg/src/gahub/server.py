"""The clearinghouse: experiment state, migration handling, watcher, storage.

One live experiment at a time. All state mutation (report handling, watcher
resets) is serialized through a single lock so the global best is monotone
within an experiment and the evaluation counter never loses updates under
concurrent request handlers. Persistence is an append-only JSONL event log
plus an atomically-replaced state snapshot, both under a data directory.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ga import Individual, royal_road_fitness
from .protocol import (
    ExperimentConfig,
    MigrationReply,
    MigrationReport,
    config_from_payload,
    genome_to_hex,
    hex_to_genome,
)

log = logging.getLogger(__name__)

DEFAULT_WATCHER_PERIOD = 1.0


class ReportRejected(Exception):
    """Raised when a migration report fails server-side verification."""


class StoreCorruptError(RuntimeError):
    """The on-disk state cannot be trusted; refuse to start."""


@dataclass
class EventRecord:
    """One accepted client interaction, the unit of all metrics analysis.

    timestamp has 1-second resolution; best_fitness is the report's
    (server-verified) fitness, not the post-update global best.
    """

    timestamp: int
    experiment_id: int
    client_id: str
    segment_index: int
    best_fitness: float
    evaluations_total_after: int
    generations_granted: int

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_obj(cls, obj: dict) -> "EventRecord":
        return cls(
            timestamp=int(obj["timestamp"]),
            experiment_id=int(obj["experiment_id"]),
            client_id=str(obj["client_id"]),
            segment_index=int(obj["segment_index"]),
            best_fitness=float(obj["best_fitness"]),
            evaluations_total_after=int(obj["evaluations_total_after"]),
            generations_granted=int(obj["generations_granted"]),
        )


@dataclass
class ExperimentState:
    config: ExperimentConfig
    global_best: Individual | None = None
    evaluations_total: int = 0
    started_at: int | None = None
    clients_seen: set[str] = field(default_factory=set)
    status: str = "running"

    def to_payload(self) -> dict:
        best = None
        if self.global_best is not None:
            best = {
                "genome": genome_to_hex(self.global_best.genome),
                "fitness": self.global_best.fitness,
            }
        return {
            "config": json.loads(_config_payload(self.config)),
            "global_best": best,
            "evaluations_total": self.evaluations_total,
            "started_at": self.started_at,
            "clients_seen": sorted(self.clients_seen),
            "status": self.status,
        }

    @classmethod
    def from_payload(cls, obj: dict) -> "ExperimentState":
        config = config_from_payload(obj["config"])
        best = None
        if obj.get("global_best") is not None:
            raw = obj["global_best"]
            best = Individual(
                hex_to_genome(raw["genome"], config.ga.genome_length),
                float(raw["fitness"]),
            )
        return cls(
            config=config,
            global_best=best,
            evaluations_total=int(obj["evaluations_total"]),
            started_at=obj.get("started_at"),
            clients_seen=set(obj.get("clients_seen", [])),
            status=str(obj["status"]),
        )


def _config_payload(config: ExperimentConfig) -> str:
    from .protocol import encode_config

    return encode_config(config)


class FileStore:
    """Journal + snapshot persistence under one directory.

    events.jsonl      append-only EventRecord lines (the metrics input)
    state.json        atomically replaced snapshot of the live experiment
    experiments.jsonl one summary line per finished experiment
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.state_path = self.data_dir / "state.json"
        self.events_path = self.data_dir / "events.jsonl"
        self.experiments_path = self.data_dir / "experiments.jsonl"

    def load_state(self) -> ExperimentState | None:
        if not self.state_path.exists():
            return None
        try:
            obj = json.loads(self.state_path.read_text(encoding="utf-8"))
            return ExperimentState.from_payload(obj)
        except (ValueError, KeyError, TypeError) as exc:
            raise StoreCorruptError(f"cannot restore {self.state_path}: {exc}") from exc

    def save_state(self, state: ExperimentState) -> None:
        tmp = self.state_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(state.to_payload(), indent=2), encoding="utf-8")
        os.replace(tmp, self.state_path)

    def append_event(self, record: EventRecord) -> None:
        with self.events_path.open("a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")

    def append_experiment_summary(self, payload: dict) -> None:
        with self.experiments_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


class ExperimentHub:
    """Serialized writer over the live ExperimentState.

    Thread-safe: every public method takes the hub lock. handle_migration and
    watcher_tick are the only mutators.
    """

    def __init__(
        self,
        config: ExperimentConfig | None = None,
        store: FileStore | None = None,
        clock=time.time,
    ):
        self._lock = threading.Lock()
        self._store = store
        self._clock = clock
        self._last_event_ts = 0

        restored = store.load_state() if store is not None else None
        if restored is not None:
            self._state = restored
            log.info(
                "restored experiment %d (%d evaluations, status %s)",
                restored.config.experiment_id,
                restored.evaluations_total,
                restored.status,
            )
        else:
            self._state = ExperimentState(config=config or ExperimentConfig())
            self._persist_state()

    # -- reads ---------------------------------------------------------------

    def get_config(self) -> ExperimentConfig:
        with self._lock:
            return self._state.config

    def get_stats(self) -> dict:
        with self._lock:
            state = self._state
            elapsed = None
            if state.started_at is not None:
                elapsed = max(0, int(self._clock()) - state.started_at)
            best = state.global_best.fitness if state.global_best is not None else None
            return {
                "experiment_id": state.config.experiment_id,
                "status": state.status,
                "evaluations_total": state.evaluations_total,
                "evaluation_budget": state.config.evaluation_budget,
                "best_fitness": best,
                "distinct_clients": len(state.clients_seen),
                "started_at": state.started_at,
                "elapsed_seconds": elapsed,
            }

    # -- mutations -----------------------------------------------------------

    def handle_migration(self, report: MigrationReport) -> MigrationReply:
        """Verify, account, merge and answer one migration report.

        Raises ReportRejected (no state change) when the reported fitness does
        not match server-side re-evaluation or the genome length is wrong.
        """
        with self._lock:
            state = self._state
            config = state.config
            ga = config.ga

            genome = np.asarray(report.best_genome, dtype=np.uint8)
            if genome.size != ga.genome_length:
                raise ReportRejected(
                    f"genome length {genome.size} != configured {ga.genome_length}"
                )
            actual = royal_road_fitness(genome, ga.block_size, ga.block_reward)
            if actual != report.best_fitness:
                raise ReportRejected(
                    f"fitness mismatch: reported {report.best_fitness}, "
                    f"re-evaluated {actual}"
                )

            if report.experiment_id != config.experiment_id:
                # Stale report: tell the client to stop; state untouched.
                immigrant = state.global_best or Individual(genome, actual)
                return MigrationReply(
                    experiment_id=config.experiment_id,
                    immigrant_genome=immigrant.genome,
                    immigrant_fitness=immigrant.fitness,
                    generations_to_run=0,
                )

            expected_delta = config.generations_per_segment * ga.offspring_per_generation
            delta = report.evaluations_delta
            if delta != expected_delta:
                log.warning(
                    "client %s reported evaluations_delta %d, expected %d; clamping",
                    report.client_id,
                    delta,
                    expected_delta,
                )
                delta = expected_delta

            now = self._event_timestamp()
            if state.started_at is None:
                state.started_at = now
            state.clients_seen.add(report.client_id)
            state.evaluations_total += delta
            if state.global_best is None or actual > state.global_best.fitness:
                state.global_best = Individual(genome.copy(), actual)
            if state.evaluations_total >= config.evaluation_budget:
                state.status = "finished"

            granted = (
                config.generations_per_segment if state.status == "running" else 0
            )
            record = EventRecord(
                timestamp=now,
                experiment_id=config.experiment_id,
                client_id=report.client_id,
                segment_index=report.segment_index,
                best_fitness=actual,
                evaluations_total_after=state.evaluations_total,
                generations_granted=granted,
            )
            self._persist_state()
            self._persist_event(record)

            best = state.global_best
            return MigrationReply(
                experiment_id=config.experiment_id,
                immigrant_genome=best.genome.copy(),
                immigrant_fitness=best.fitness,
                generations_to_run=granted,
            )

    def watcher_tick(self) -> int | None:
        """Reset a finished experiment; returns the new experiment_id, if any.

        Idempotent: a tick on a running experiment does nothing. Persistence
        failures are logged and retried on the next tick.
        """
        with self._lock:
            state = self._state
            if state.status != "finished":
                return None
            old = state.config
            now = int(self._clock())
            summary = {
                "experiment_id": old.experiment_id,
                "started_at": state.started_at,
                "finished_at": now,
                "duration_seconds": (
                    None if state.started_at is None else now - state.started_at
                ),
                "evaluations_total": state.evaluations_total,
                "best_fitness": (
                    state.global_best.fitness if state.global_best else None
                ),
                "distinct_clients": len(state.clients_seen),
            }
            new_config = dataclasses.replace(old, experiment_id=old.experiment_id + 1)
            self._state = ExperimentState(config=new_config)
            try:
                if self._store is not None:
                    self._store.append_experiment_summary(summary)
                self._persist_state()
            except OSError as exc:
                log.warning("persistence failed during reset: %s", exc)
            log.info(
                "experiment %d finished (%d evaluations); now serving %d",
                old.experiment_id,
                summary["evaluations_total"],
                new_config.experiment_id,
            )
            return new_config.experiment_id

    def persist(self) -> None:
        """Force a snapshot (used on clean shutdown)."""
        with self._lock:
            self._persist_state()

    # -- internals (call with lock held) --------------------------------------

    def _event_timestamp(self) -> int:
        # Clamped so the event log's timestamps never decrease.
        now = int(self._clock())
        if now < self._last_event_ts:
            now = self._last_event_ts
        self._last_event_ts = now
        return now

    def _persist_state(self) -> None:
        if self._store is None:
            return
        try:
            self._store.save_state(self._state)
        except OSError as exc:
            log.warning("state snapshot failed: %s", exc)

    def _persist_event(self, record: EventRecord) -> None:
        if self._store is None:
            return
        try:
            self._store.append_event(record)
        except OSError as exc:
            log.warning("event append failed: %s", exc)


class Watcher(threading.Thread):
    """Periodic daemon that resets finished experiments."""

    def __init__(self, hub: ExperimentHub, period: float = DEFAULT_WATCHER_PERIOD):
        super().__init__(name="gahub-watcher", daemon=True)
        self.hub = hub
        self.period = period
        self._stop_event = threading.Event()

    def run(self):
        while not self._stop_event.wait(self.period):
            try:
                self.hub.watcher_tick()
            except Exception:
                log.exception("watcher tick failed")

    def stop(self):
        self._stop_event.set()
        self.join(timeout=5.0)
