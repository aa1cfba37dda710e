"""Steady-state genetic algorithm on fixed-length bitstrings.

Every client (headless or browser) runs this algorithm: blockwise all-ones
fitness, linear rank selection, one-point crossover / per-bit mutation as
mutually exclusive operators, worst-half replacement, and incorporation of a
migrated best individual between segments. All operations take and return
values; a client instance owns its numpy Generator and shares nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import kernels

# Algorithm identifier recorded in run metadata so runs are replayable.
RNG_ALGORITHM = "numpy-pcg64"


def make_rng(seed: int | None = None) -> np.random.Generator:
    """Seeded PCG64 stream (the algorithm named by RNG_ALGORITHM)."""
    return np.random.default_rng(seed)


def as_bits(genome) -> np.ndarray:
    """Coerce a genome (sequence of 0/1) to a 1-D uint8 array, validating values."""
    bits = np.ascontiguousarray(genome, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError(f"genome must be 1-D, got shape {bits.shape}")
    if bits.size == 0:
        raise ValueError("genome must be non-empty")
    if np.any(bits > 1):
        raise ValueError("genome must contain only 0/1 values")
    return bits


@dataclass(frozen=True)
class GaParams:
    """GA parameters served to every client.

    population_size * replacement_fraction offspring are created per
    generation, replacing the worst members. crossover_priority and
    mutation_priority must sum to 1; an offspring is produced by exactly one
    operator unless mutate_crossed_offspring is set, in which case crossover
    children are additionally passed through per-bit mutation.
    """

    genome_length: int = 256
    population_size: int = 100
    replacement_fraction: float = 0.5
    crossover_priority: float = 0.8
    mutation_priority: float = 0.2
    per_bit_mutation_rate: float = 0.01
    block_size: int = 8
    block_reward: float = 8.0
    mutate_crossed_offspring: bool = False

    def __post_init__(self):
        if self.genome_length < 2:
            raise ValueError("genome_length must be >= 2")
        if self.block_size < 1 or self.genome_length % self.block_size != 0:
            raise ValueError(
                f"genome_length {self.genome_length} is not a multiple of "
                f"block_size {self.block_size}"
            )
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0.0 < self.replacement_fraction <= 1.0:
            raise ValueError("replacement_fraction must be in (0, 1]")
        for name in ("crossover_priority", "mutation_priority", "per_bit_mutation_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if abs(self.crossover_priority + self.mutation_priority - 1.0) > 1e-9:
            raise ValueError("crossover_priority + mutation_priority must equal 1")
        k = self.population_size * self.replacement_fraction
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise ValueError(
                "population_size * replacement_fraction must be a positive integer"
            )

    @property
    def offspring_per_generation(self) -> int:
        return int(round(self.population_size * self.replacement_fraction))


@dataclass
class Individual:
    """A genome with its cached fitness."""

    genome: np.ndarray
    fitness: float

    def copy(self) -> "Individual":
        return Individual(self.genome.copy(), self.fitness)


@dataclass
class Population:
    """Fitness-sorted population; row 0 of bits is the current best.

    bits is (size, genome_length) uint8; fitness is the matching float64
    vector, non-increasing. Sorting is always stable with new members
    inserted ahead of incumbents, so an equal-fitness offspring outranks the
    member it ties; without that, plateau drift is impossible and the search
    stalls (every neutral variant would land in the replaced half).
    """

    bits: np.ndarray
    fitness: np.ndarray
    generation: int = 0

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    def best(self) -> Individual:
        return Individual(self.bits[0].copy(), float(self.fitness[0]))

    def members(self) -> list[Individual]:
        return [Individual(self.bits[i].copy(), float(self.fitness[i])) for i in range(self.size)]


def royal_road_fitness(genome, block_size: int = 8, block_reward: float = 8.0) -> float:
    """Reward per contiguous aligned block whose bits are all one.

    Maximum value is block_reward * length / block_size (every block set).
    """
    bits = as_bits(genome)
    if block_size < 1 or bits.size % block_size != 0:
        raise ValueError(
            f"genome length {bits.size} is not divisible by block_size {block_size}"
        )
    return float(kernels.fitness_batch(bits[None, :], block_size, float(block_reward))[0])


@lru_cache(maxsize=None)
def _rank_cumweights(size: int) -> np.ndarray:
    # Linear ranking: weight of rank r (1 = best) is size - r + 1.
    return np.cumsum(np.arange(size, 0, -1, dtype=np.float64))


def rank_select_index(size: int, rng: np.random.Generator) -> int:
    """Draw an index into a fitness-sorted population under linear ranking."""
    if size < 1:
        raise ValueError("cannot select from an empty population")
    cumw = _rank_cumweights(size)
    return int(np.searchsorted(cumw, rng.random() * cumw[-1], side="right"))


def rank_select(population: Population, rng: np.random.Generator) -> Individual:
    """Select one member; probability depends only on rank, never raw fitness."""
    idx = rank_select_index(population.size, rng)
    return Individual(population.bits[idx].copy(), float(population.fitness[idx]))


def one_point_crossover(a, b, rng: np.random.Generator) -> np.ndarray:
    """Child takes a[0:cut] and b[cut:] for a cut drawn uniformly in 1..L-1."""
    a = as_bits(a)
    b = as_bits(b)
    if a.size != b.size:
        raise ValueError(f"parent lengths differ: {a.size} != {b.size}")
    if a.size < 2:
        raise ValueError("crossover needs genomes of length >= 2")
    cut = int(rng.integers(1, a.size))
    return np.concatenate([a[:cut], b[cut:]])


def mutate(genome, per_bit_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit independently with probability per_bit_rate; input untouched."""
    bits = as_bits(genome)
    if not 0.0 <= per_bit_rate <= 1.0:
        raise ValueError("per_bit_rate must be in [0, 1]")
    flips = rng.random(bits.size) < per_bit_rate
    return bits ^ flips.astype(np.uint8)


def _sorted_desc(bits: np.ndarray, fitness: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-fitness, kind="stable")
    return np.ascontiguousarray(bits[order]), fitness[order]


def random_population(params: GaParams, rng: np.random.Generator) -> Population:
    """population_size uniform random genomes, evaluated and sorted; generation 0."""
    bits = rng.integers(
        0, 2, size=(params.population_size, params.genome_length), dtype=np.uint8
    )
    fitness = kernels.fitness_batch(bits, params.block_size, params.block_reward)
    bits, fitness = _sorted_desc(bits, fitness)
    return Population(bits, fitness, generation=0)


def breed_generation(
    population: Population, params: GaParams, rng: np.random.Generator
) -> tuple[Population, int]:
    """One steady-state generation: breed offspring, replace the worst.

    Draws from rng in a fixed order (operator choices, parent pairs, cut
    points, mutation uniforms) so a given (seed, params) always yields the
    same trajectory regardless of kernel backend. Returns the new population
    and the number of fitness evaluations performed (= offspring count).
    """
    k = params.offspring_per_generation
    length = params.genome_length
    u_op = rng.random(k)
    u_par = rng.random((k, 2))
    cuts = rng.integers(1, length, size=k)
    u_mut = rng.random((k, length))

    children = kernels.breed_batch(
        population.bits,
        _rank_cumweights(population.size),
        params.crossover_priority,
        params.mutate_crossed_offspring,
        params.per_bit_mutation_rate,
        u_op,
        u_par,
        cuts,
        u_mut,
    )
    child_fitness = kernels.fitness_batch(children, params.block_size, params.block_reward)

    survivors = population.size - k
    bits = np.concatenate([children, population.bits[:survivors]])
    fitness = np.concatenate([child_fitness, population.fitness[:survivors]])
    bits, fitness = _sorted_desc(bits, fitness)
    return Population(bits, fitness, generation=population.generation + 1), k


def incorporate_immigrant(population: Population, immigrant: Individual) -> Population:
    """Immigrant replaces the current worst member; size and sort preserved."""
    genome = as_bits(immigrant.genome)
    if genome.size != population.bits.shape[1]:
        raise ValueError(
            f"immigrant length {genome.size} != population genome length "
            f"{population.bits.shape[1]}"
        )
    bits = np.concatenate([genome[None, :], population.bits[:-1]])
    fitness = np.concatenate([[immigrant.fitness], population.fitness[:-1]])
    bits, fitness = _sorted_desc(bits, fitness)
    return Population(bits, fitness, generation=population.generation)


@dataclass
class SegmentResult:
    """Outcome of one between-migrations run of generations."""

    best: Individual
    evaluations_delta: int
    generations_run: int


def run_segment(
    population: Population,
    params: GaParams,
    generations: int,
    rng: np.random.Generator,
) -> tuple[Population, SegmentResult]:
    """Run `generations` generations; report the final best and evaluation count."""
    if generations < 0:
        raise ValueError("generations must be >= 0")
    evaluations = 0
    for _ in range(generations):
        population, delta = breed_generation(population, params, rng)
        evaluations += delta
    return population, SegmentResult(population.best(), evaluations, generations)
