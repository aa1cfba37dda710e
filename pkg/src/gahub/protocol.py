"""Wire messages between clients and the clearinghouse server.

JSON objects with snake_case fields; the canonical serialized form is compact
(no spaces), key-sorted, UTF-8. Genomes travel as lowercase hex of the
bitstring, most-significant bit first, exactly length/4 characters. Decoders
are tolerant readers: unknown fields are ignored, but a message never decodes
partially - it either yields a validated value or raises.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ga import GaParams, as_bits

PROTOCOL_VERSION = 1


class WireError(ValueError):
    """Base class for message decoding failures."""


class ParseError(WireError):
    """Body is not syntactically valid JSON."""


class SchemaError(WireError):
    """JSON is well-formed but a required field is missing or mistyped."""


class ValidationError(WireError):
    """Fields are present but carry out-of-contract values."""


def genome_to_hex(genome) -> str:
    """Lowercase hex of the bitstring, MSB first, length/4 characters."""
    bits = as_bits(genome)
    if bits.size % 4 != 0:
        raise ValueError(f"genome length {bits.size} is not a multiple of 4")
    if bits.size % 8 == 0:
        return np.packbits(bits).tobytes().hex()
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return format(value, "0{}x".format(bits.size // 4))


def hex_to_genome(text: str, n_bits: int) -> np.ndarray:
    """Inverse of genome_to_hex; raises ValidationError on bad input."""
    if n_bits < 4 or n_bits % 4 != 0:
        raise ValueError(f"n_bits must be a positive multiple of 4, got {n_bits}")
    if len(text) != n_bits // 4:
        raise ValidationError(
            f"genome hex length {len(text)} != expected {n_bits // 4} for {n_bits} bits"
        )
    try:
        value = int(text, 16)
    except ValueError:
        raise ValidationError(f"genome is not valid hex: {text!r}") from None
    if n_bits % 8 == 0:
        return np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))
    shifts = np.arange(n_bits - 1, -1, -1, dtype=object)
    return np.array([(value >> int(s)) & 1 for s in shifts], dtype=np.uint8)


@dataclass(eq=False)
class MigrationReport:
    """Client -> server: best individual after a finished segment."""

    experiment_id: int
    client_id: str
    segment_index: int
    best_genome: np.ndarray
    best_fitness: float
    evaluations_delta: int
    protocol_version: int = PROTOCOL_VERSION

    def __eq__(self, other):
        if not isinstance(other, MigrationReport):
            return NotImplemented
        return (
            self.protocol_version == other.protocol_version
            and self.experiment_id == other.experiment_id
            and self.client_id == other.client_id
            and self.segment_index == other.segment_index
            and np.array_equal(self.best_genome, other.best_genome)
            and self.best_fitness == other.best_fitness
            and self.evaluations_delta == other.evaluations_delta
        )


@dataclass(eq=False)
class MigrationReply:
    """Server -> client: current global best plus the next segment length.

    generations_to_run == 0 tells the client to stop (budget exhausted or the
    report belonged to a stale experiment).
    """

    experiment_id: int
    immigrant_genome: np.ndarray
    immigrant_fitness: float
    generations_to_run: int
    protocol_version: int = PROTOCOL_VERSION

    @property
    def stop(self) -> bool:
        return self.generations_to_run == 0

    def __eq__(self, other):
        if not isinstance(other, MigrationReply):
            return NotImplemented
        return (
            self.protocol_version == other.protocol_version
            and self.experiment_id == other.experiment_id
            and np.array_equal(self.immigrant_genome, other.immigrant_genome)
            and self.immigrant_fitness == other.immigrant_fitness
            and self.generations_to_run == other.generations_to_run
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a client needs to participate in the current experiment."""

    experiment_id: int = 1
    ga: GaParams = field(default_factory=GaParams)
    evaluation_budget: int = 750_000
    generations_per_segment: int = 20

    def __post_init__(self):
        if self.experiment_id < 1:
            raise ValueError("experiment_id must be >= 1")
        if self.evaluation_budget < 1:
            raise ValueError("evaluation_budget must be > 0")
        if self.generations_per_segment < 1:
            raise ValueError("generations_per_segment must be >= 1")


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _parse_object(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SchemaError(f"expected a JSON object, got {type(obj).__name__}")
    return obj


def _require(obj: dict, key: str, kind: type | tuple):
    if key not in obj:
        raise SchemaError(f"missing field {key!r}")
    value = obj[key]
    if isinstance(value, bool) and kind is not bool:
        raise SchemaError(f"field {key!r} has wrong type bool")
    if not isinstance(value, kind):
        raise SchemaError(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def _require_number(obj: dict, key: str) -> float:
    value = float(_require(obj, key, (int, float)))
    if not math.isfinite(value):
        raise ValidationError(f"field {key!r} must be finite")
    return value


def encode_report(report: MigrationReport) -> str:
    return _canonical(
        {
            "protocol_version": report.protocol_version,
            "experiment_id": report.experiment_id,
            "client_id": report.client_id,
            "segment_index": report.segment_index,
            "best_genome": genome_to_hex(report.best_genome),
            "best_fitness": float(report.best_fitness),
            "evaluations_delta": report.evaluations_delta,
        }
    )


def decode_report(text: str, genome_length: int | None = None) -> MigrationReport:
    obj = _parse_object(text)
    version = _require(obj, "protocol_version", int)
    experiment_id = _require(obj, "experiment_id", int)
    client_id = _require(obj, "client_id", str)
    segment_index = _require(obj, "segment_index", int)
    genome_hex = _require(obj, "best_genome", str)
    best_fitness = _require_number(obj, "best_fitness")
    delta = _require(obj, "evaluations_delta", int)

    if experiment_id < 1:
        raise ValidationError("experiment_id must be >= 1")
    if not client_id:
        raise ValidationError("client_id must be non-empty")
    if segment_index < 1:
        raise ValidationError("segment_index must be >= 1")
    if best_fitness < 0:
        raise ValidationError("best_fitness must be non-negative")
    if delta <= 0:
        raise ValidationError("evaluations_delta must be > 0")
    n_bits = genome_length if genome_length is not None else 4 * len(genome_hex)
    genome = hex_to_genome(genome_hex, n_bits)
    return MigrationReport(
        experiment_id=experiment_id,
        client_id=client_id,
        segment_index=segment_index,
        best_genome=genome,
        best_fitness=best_fitness,
        evaluations_delta=delta,
        protocol_version=version,
    )


def encode_reply(reply: MigrationReply) -> str:
    return _canonical(
        {
            "protocol_version": reply.protocol_version,
            "experiment_id": reply.experiment_id,
            "immigrant_genome": genome_to_hex(reply.immigrant_genome),
            "immigrant_fitness": float(reply.immigrant_fitness),
            "generations_to_run": reply.generations_to_run,
        }
    )


def decode_reply(text: str, genome_length: int | None = None) -> MigrationReply:
    obj = _parse_object(text)
    version = _require(obj, "protocol_version", int)
    experiment_id = _require(obj, "experiment_id", int)
    genome_hex = _require(obj, "immigrant_genome", str)
    fitness = _require_number(obj, "immigrant_fitness")
    generations = _require(obj, "generations_to_run", int)

    if experiment_id < 1:
        raise ValidationError("experiment_id must be >= 1")
    if fitness < 0:
        raise ValidationError("immigrant_fitness must be non-negative")
    if generations < 0:
        raise ValidationError("generations_to_run must be >= 0")
    n_bits = genome_length if genome_length is not None else 4 * len(genome_hex)
    genome = hex_to_genome(genome_hex, n_bits)
    return MigrationReply(
        experiment_id=experiment_id,
        immigrant_genome=genome,
        immigrant_fitness=fitness,
        generations_to_run=generations,
        protocol_version=version,
    )


_GA_FIELDS = (
    "genome_length",
    "population_size",
    "replacement_fraction",
    "crossover_priority",
    "mutation_priority",
    "per_bit_mutation_rate",
    "block_size",
    "block_reward",
    "mutate_crossed_offspring",
)


def encode_config(config: ExperimentConfig) -> str:
    ga = config.ga
    return _canonical(
        {
            "protocol_version": PROTOCOL_VERSION,
            "experiment_id": config.experiment_id,
            "evaluation_budget": config.evaluation_budget,
            "generations_per_segment": config.generations_per_segment,
            "ga": {
                "genome_length": ga.genome_length,
                "population_size": ga.population_size,
                "replacement_fraction": ga.replacement_fraction,
                "crossover_priority": ga.crossover_priority,
                "mutation_priority": ga.mutation_priority,
                "per_bit_mutation_rate": ga.per_bit_mutation_rate,
                "block_size": ga.block_size,
                "block_reward": float(ga.block_reward),
                "mutate_crossed_offspring": ga.mutate_crossed_offspring,
            },
        }
    )


def decode_config(text: str) -> ExperimentConfig:
    obj = _parse_object(text)
    return config_from_payload(obj)


def config_from_payload(obj: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed payload (also used for config files)."""
    experiment_id = obj.get("experiment_id", 1)
    if isinstance(experiment_id, bool) or not isinstance(experiment_id, int):
        raise SchemaError("field 'experiment_id' has wrong type")
    evaluation_budget = _require(obj, "evaluation_budget", int)
    generations_per_segment = _require(obj, "generations_per_segment", int)
    ga_obj = _require(obj, "ga", dict)
    kwargs = {}
    for name in _GA_FIELDS:
        if name not in ga_obj:
            raise SchemaError(f"missing field 'ga.{name}'")
        value = ga_obj[name]
        if name == "mutate_crossed_offspring":
            if not isinstance(value, bool):
                raise SchemaError(f"field 'ga.{name}' has wrong type")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"field 'ga.{name}' has wrong type")
        kwargs[name] = value
    try:
        ga = GaParams(
            genome_length=int(kwargs["genome_length"]),
            population_size=int(kwargs["population_size"]),
            replacement_fraction=float(kwargs["replacement_fraction"]),
            crossover_priority=float(kwargs["crossover_priority"]),
            mutation_priority=float(kwargs["mutation_priority"]),
            per_bit_mutation_rate=float(kwargs["per_bit_mutation_rate"]),
            block_size=int(kwargs["block_size"]),
            block_reward=float(kwargs["block_reward"]),
            mutate_crossed_offspring=bool(kwargs["mutate_crossed_offspring"]),
        )
        return ExperimentConfig(
            experiment_id=experiment_id,
            ga=ga,
            evaluation_budget=evaluation_budget,
            generations_per_segment=generations_per_segment,
        )
    except WireError:
        raise
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
