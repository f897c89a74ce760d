"""Genetic algorithm over the thickness grid.

Chromosomes are per-parameter grid indices, so GA, brute-force enumeration
and the RL action space all search the same discrete designs.  Fitness is
the negated optimization value (higher is better), evaluated through any
callable design -> objectives backend; the trained surrogate is the usual
choice, the physics model a drop-in swap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import objective as obj
from .design_space import DesignSpace, ThicknessVector
from .oracle import ObjectiveTriple


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    crossover_prob: float = 0.8
    mutation_prob: float = 0.1
    generations: int = 100
    tournament_size: int = 3
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not (0 <= self.crossover_prob <= 1 and 0 <= self.mutation_prob <= 1):
            raise ValueError("probabilities must be within [0, 1]")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [1, population_size]")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must be in [0, population_size)")


Chromosome = tuple[int, ...]


def fitness(evaluator, ref, target, space: DesignSpace, chromosome: Chromosome) -> float:
    """Negated optimization value of the decoded design; higher is better."""
    t = space.vector_at(chromosome)
    return -obj.optimization_value(ref, target, evaluator(t))


def select(population, fitnesses, k: int, rng) -> Chromosome:
    """Tournament over k distinct members; best fitness wins, ties to first drawn."""
    drawn = rng.choice(len(population), size=k, replace=False)
    best = drawn[int(np.argmax([fitnesses[i] for i in drawn]))]
    return population[best]


def crossover(p1: Chromosome, p2: Chromosome, crossover_prob: float, rng) -> tuple[Chromosome, Chromosome]:
    """Single-point tail swap with the given probability, else copies."""
    if len(p1) != len(p2) or len(p1) < 2:
        raise ValueError("parents must have equal arity of at least 2")
    if rng.random() < crossover_prob:
        cut = int(rng.integers(1, len(p1)))
        return p1[:cut] + p2[cut:], p2[:cut] + p1[cut:]
    return p1, p2


def mutate(c: Chromosome, mutation_prob: float, space: DesignSpace, rng) -> Chromosome:
    """Resample each gene uniformly over its level range with probability M_p."""
    out = list(c)
    for i, p in enumerate(space.params):
        if rng.random() < mutation_prob:
            out[i] = int(rng.integers(p.levels))
    return tuple(out)


@dataclass
class GaResult:
    best_design: ThicknessVector
    best_fitness: float
    best_objectives: ObjectiveTriple
    trace: list = field(default_factory=list)  # (generation, best, mean) rows
    evaluations: int = 0


def run(config: GaConfig, space: DesignSpace, evaluator, ref, target) -> GaResult:
    """Generational loop with elitism; deterministic for a fixed seed.

    ``evaluator`` maps a ThicknessVector to an ObjectiveTriple.  Fitness
    values are memoized per chromosome, so repeat visits cost nothing.
    """
    rng = np.random.default_rng(config.seed)
    n = config.population_size

    cache: dict[Chromosome, tuple[float, ObjectiveTriple]] = {}

    def scored(ch: Chromosome) -> float:
        if ch not in cache:
            triple = evaluator(space.vector_at(ch))
            cache[ch] = (-obj.optimization_value(ref, target, triple), triple)
        return cache[ch][0]

    population = [
        tuple(int(rng.integers(p.levels)) for p in space.params) for _ in range(n)
    ]
    fitnesses = [scored(ch) for ch in population]

    best_ch = population[int(np.argmax(fitnesses))]
    best_fit = max(fitnesses)
    trace = [(0, best_fit, float(np.mean(fitnesses)))]

    for gen in range(1, config.generations + 1):
        order = np.argsort(fitnesses)[::-1]
        next_pop = [population[i] for i in order[: config.elitism]]
        while len(next_pop) < n:
            p1 = select(population, fitnesses, config.tournament_size, rng)
            p2 = select(population, fitnesses, config.tournament_size, rng)
            c1, c2 = crossover(p1, p2, config.crossover_prob, rng)
            next_pop.append(mutate(c1, config.mutation_prob, space, rng))
            if len(next_pop) < n:
                next_pop.append(mutate(c2, config.mutation_prob, space, rng))
        population = next_pop
        fitnesses = [scored(ch) for ch in population]
        gen_best = int(np.argmax(fitnesses))
        if fitnesses[gen_best] > best_fit:
            best_fit = fitnesses[gen_best]
            best_ch = population[gen_best]
        trace.append((gen, fitnesses[gen_best], float(np.mean(fitnesses))))

    return GaResult(
        best_design=space.vector_at(best_ch),
        best_fitness=best_fit,
        best_objectives=cache[best_ch][1],
        trace=trace,
        evaluations=len(cache),
    )
