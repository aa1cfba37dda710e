"""Frozen wire-format vectors and the shared fitness fixture corpus.

The vectors/ directory is part of the repo contract: any client
implementation, in any language, must byte-match the message files and
reproduce the corpus fitness values exactly. Message vectors are built from
literal bit patterns; the corpus genomes are drawn once from a seeded
generator and then live as frozen data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import ga
from .protocol import (
    ExperimentConfig,
    MigrationReply,
    MigrationReport,
    encode_config,
    encode_reply,
    encode_report,
    hex_to_genome,
)

CORPUS_SEED = 20260810
CORPUS_SIZE = 1000
CORPUS_FILE = "fitness_corpus.json"

MESSAGE_FILES = (
    "config_01.json",
    "report_01.json",
    "report_02.json",
    "reply_01.json",
    "reply_02.json",
)

_README = """# Canonical wire vectors

Byte-frozen message encodings plus the shared fitness fixture corpus. Every
client implementation must reproduce these bytes and values exactly:

- config_01.json, report_01.json, report_02.json, reply_01.json,
  reply_02.json: canonical JSON encodings (compact, key-sorted, UTF-8).
- fitness_corpus.json: genome fixtures (hex, MSB first) with their expected
  blockwise fitness under genome_length=256, block_size=8, block_reward=8.

`gahub vectors --check` verifies the working tree against the current
encoder and fitness implementation.
"""


def _block_pattern(set_blocks: list[int], n_blocks: int = 32, block_size: int = 8) -> np.ndarray:
    bits = np.zeros(n_blocks * block_size, dtype=np.uint8)
    for b in set_blocks:
        bits[b * block_size : (b + 1) * block_size] = 1
    return bits


def canonical_messages() -> dict[str, str]:
    """The frozen message vectors, keyed by file name."""
    genome_a = _block_pattern([0, 31])  # fitness 16
    genome_b = _block_pattern(list(range(0, 32, 2)))  # fitness 128
    return {
        "config_01.json": encode_config(ExperimentConfig(experiment_id=1)),
        "report_01.json": encode_report(
            MigrationReport(
                experiment_id=1,
                client_id="00112233445566778899aabbccddeeff",
                segment_index=1,
                best_genome=genome_a,
                best_fitness=16.0,
                evaluations_delta=1000,
            )
        ),
        "report_02.json": encode_report(
            MigrationReport(
                experiment_id=3,
                client_id="ffeeddccbbaa99887766554433221100",
                segment_index=7,
                best_genome=genome_b,
                best_fitness=128.0,
                evaluations_delta=1000,
            )
        ),
        "reply_01.json": encode_reply(
            MigrationReply(
                experiment_id=1,
                immigrant_genome=genome_b,
                immigrant_fitness=128.0,
                generations_to_run=20,
            )
        ),
        "reply_02.json": encode_reply(
            MigrationReply(
                experiment_id=3,
                immigrant_genome=genome_a,
                immigrant_fitness=16.0,
                generations_to_run=0,
            )
        ),
    }


def build_corpus(
    size: int = CORPUS_SIZE,
    genome_length: int = 256,
    block_size: int = 8,
    block_reward: float = 8.0,
    seed: int = CORPUS_SEED,
) -> dict:
    """Genome fixtures spanning zero, full, and varied-density random bitstrings."""
    from .protocol import genome_to_hex

    rng = ga.make_rng(seed)
    genomes = [
        np.zeros(genome_length, dtype=np.uint8),
        np.ones(genome_length, dtype=np.uint8),
    ]
    while len(genomes) < size:
        density = rng.uniform(0.5, 0.98)
        genomes.append((rng.random(genome_length) < density).astype(np.uint8))
    entries = [
        {
            "genome": genome_to_hex(g),
            "fitness": ga.royal_road_fitness(g, block_size, block_reward),
        }
        for g in genomes
    ]
    return {
        "genome_length": genome_length,
        "block_size": block_size,
        "block_reward": block_reward,
        "rng_algorithm": ga.RNG_ALGORITHM,
        "seed": seed,
        "entries": entries,
    }


def write_vectors(directory: str | Path) -> list[str]:
    """(Re)generate the vectors directory; returns the files written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in canonical_messages().items():
        (directory / name).write_text(text, encoding="utf-8")
        written.append(name)
    corpus = build_corpus()
    (directory / CORPUS_FILE).write_text(
        json.dumps(corpus, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )
    written.append(CORPUS_FILE)
    (directory / "README.md").write_text(_README, encoding="utf-8")
    written.append("README.md")
    return written


def check_vectors(directory: str | Path) -> list[str]:
    """Verify the directory against the live encoder/fitness; returns problems."""
    directory = Path(directory)
    problems = []
    for name, expected in canonical_messages().items():
        path = directory / name
        if not path.exists():
            problems.append(f"{name}: missing")
            continue
        actual = path.read_text(encoding="utf-8")
        if actual != expected:
            problems.append(f"{name}: bytes differ from the canonical encoding")

    corpus_path = directory / CORPUS_FILE
    if not corpus_path.exists():
        return problems + [f"{CORPUS_FILE}: missing"]
    try:
        corpus = json.loads(corpus_path.read_text(encoding="utf-8"))
        length = int(corpus["genome_length"])
        block_size = int(corpus["block_size"])
        block_reward = float(corpus["block_reward"])
        mismatches = 0
        for entry in corpus["entries"]:
            genome = hex_to_genome(entry["genome"], length)
            if ga.royal_road_fitness(genome, block_size, block_reward) != entry["fitness"]:
                mismatches += 1
        if mismatches:
            problems.append(f"{CORPUS_FILE}: {mismatches} fitness mismatches")
        if len(corpus["entries"]) < 2:
            problems.append(f"{CORPUS_FILE}: implausibly small corpus")
    except (ValueError, KeyError, TypeError) as exc:
        problems.append(f"{CORPUS_FILE}: unreadable ({exc})")
    return problems
