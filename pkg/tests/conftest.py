import contextlib

import numpy as np
import pytest

from gahub import ga
from gahub.httpd import start_server
from gahub.protocol import ExperimentConfig, MigrationReport
from gahub.server import ExperimentHub, FileStore


def small_params(**overrides) -> ga.GaParams:
    defaults = dict(genome_length=64)
    defaults.update(overrides)
    return ga.GaParams(**defaults)


def honest_report(config: ExperimentConfig, client_id: str, genome, segment_index: int = 1,
                  delta: int | None = None) -> MigrationReport:
    """A report whose fitness matches server-side re-evaluation."""
    genome = np.asarray(genome, dtype=np.uint8)
    if delta is None:
        delta = config.generations_per_segment * config.ga.offspring_per_generation
    return MigrationReport(
        experiment_id=config.experiment_id,
        client_id=client_id,
        segment_index=segment_index,
        best_genome=genome,
        best_fitness=ga.royal_road_fitness(genome, config.ga.block_size, config.ga.block_reward),
        evaluations_delta=delta,
    )


@contextlib.contextmanager
def live_server(config: ExperimentConfig, data_dir=None, static_dir=None):
    """Hub + HTTP server on an ephemeral port; yields (base_url, hub, server)."""
    store = FileStore(data_dir) if data_dir is not None else None
    hub = ExperimentHub(config=config, store=store)
    server, thread = start_server(hub, "127.0.0.1", 0, static_dir)
    url = f"http://127.0.0.1:{server.server_address[1]}"
    try:
        yield url, hub, server
    finally:
        server.shutdown()
        thread.join(timeout=5)


@pytest.fixture
def rng():
    return ga.make_rng(1234)
