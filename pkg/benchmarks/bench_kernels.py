#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on the GA hot path.

Times the batched fitness kernel, the batched breed kernel, and whole
generations through the public API, then prints a table with speedups.
"""

import argparse
import time

import numpy as np

from gahub import ga, kernels


def time_call(fn, repeats):
    fn()  # warm-up (jit compile, caches)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_backend(name, genome_length, population_size, generations, repeats):
    fitness_batch, breed_batch = kernels.IMPLEMENTATIONS[name]
    rng = ga.make_rng(7)
    params = ga.GaParams(genome_length=genome_length, population_size=population_size)
    bits = rng.integers(0, 2, size=(population_size, genome_length), dtype=np.uint8)
    cumw = np.cumsum(np.arange(population_size, 0, -1, dtype=np.float64))
    k = params.offspring_per_generation
    u_op = rng.random(k)
    u_par = rng.random((k, 2))
    cuts = rng.integers(1, genome_length, size=k)
    u_mut = rng.random((k, genome_length))

    t_fitness = time_call(lambda: fitness_batch(bits, 8, 8.0), repeats)
    t_breed = time_call(
        lambda: breed_batch(bits, cumw, 0.8, False, 0.01, u_op, u_par, cuts, u_mut),
        repeats,
    )

    def run_generations():
        gen_rng = ga.make_rng(11)
        population = ga.random_population(params, gen_rng)
        for _ in range(generations):
            population, _ = ga.breed_generation(population, params, gen_rng)

    saved_fitness, saved_breed = kernels.fitness_batch, kernels.breed_batch
    kernels.fitness_batch, kernels.breed_batch = fitness_batch, breed_batch
    try:
        t_gens = time_call(run_generations, max(1, repeats // 10)) / generations
    finally:
        kernels.fitness_batch, kernels.breed_batch = saved_fitness, saved_breed
    return t_fitness, t_breed, t_gens


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--genome-length", type=int, default=256)
    parser.add_argument("--population-size", type=int, default=100)
    parser.add_argument("--generations", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    backends = list(kernels.IMPLEMENTATIONS)
    print(
        f"genome_length={args.genome_length} population_size={args.population_size} "
        f"(offspring {args.population_size // 2}/generation)\n"
    )
    print(f"{'kernel':<22}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    rows = {}
    for backend in backends:
        rows[backend] = bench_backend(
            backend, args.genome_length, args.population_size, args.generations, args.repeats
        )
    for i, label in enumerate(["fitness_batch", "breed_batch", "generation (end-to-end)"]):
        times = [rows[b][i] for b in backends]
        ratio = times[0] / times[-1] if len(times) > 1 and times[-1] > 0 else 1.0
        cells = "".join(f"{t * 1e6:>12.1f}us" for t in times)
        print(f"{label:<22}{cells}{ratio:>9.2f}x")
    if len(backends) == 1:
        print("\n(numba unavailable; only the numpy fallback was measured)")


if __name__ == "__main__":
    main()
