"""Genetic search over inspection paths.

Fitness is -length for paths that meet the coverage goal and -alpha/coverage
otherwise, so any feasible path beats any infeasible one.  Every child draws
from its own RNG stream keyed on (seed, generation, child index), which makes
a run reproducible regardless of how children are farmed out to workers.
"""
from __future__ import annotations

import csv
import logging
import math
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .paths import (CoverageModel, InspectionPath, as_vertices, default_path_points,
                    path_length, random_init, rule_based_init, _ShortestPaths)

log = logging.getLogger(__name__)

ZERO_COVERAGE = 1e-9


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 125
    generations: int = 300
    ier: float = 0.75
    ger: float = 0.1
    tournament_size: int = 25
    rule_init_proportion: float = 0.5
    coverage_goal: float = 0.95
    alpha: float = 1e6
    seed: int = 0
    initial_path_points: int = None

    def __post_init__(self):
        for name in ("ier", "ger", "rule_init_proportion"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.population_size < 1 or self.generations < 0:
            raise ValueError("population_size must be >= 1 and generations >= 0")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must lie in [1, population_size]")
        if not 0 < self.coverage_goal <= 1:
            raise ValueError("coverage_goal must lie in (0, 1]")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.initial_path_points is not None and self.initial_path_points < 2:
            raise ValueError("initial_path_points must be at least 2")


@dataclass(frozen=True)
class EvaluatedIndividual:
    path: InspectionPath
    coverage: float
    length: float
    fitness: float
    feasible: bool


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    best_so_far_length: float
    mean_coverage: float
    feasible_count: int


def fitness(coverage, length, goal=0.95, alpha=1e6):
    """Coverage at or above ``goal`` scores -length, anything below -alpha/coverage."""
    if coverage >= goal:
        return -max(float(length), ZERO_COVERAGE)
    return -alpha / max(float(coverage), ZERO_COVERAGE)


def child_rng(seed, generation, child):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(generation, child)))


def tournament_select(pop, k, rng):
    """Fittest of ``k`` individuals drawn without replacement.

    Ties go to the shorter path, then to the lower population index.
    """
    if not 1 <= k <= len(pop):
        raise ValueError("tournament size must lie in [1, len(pop)]")
    entrants = rng.choice(len(pop), size=k, replace=False)
    best = min(entrants, key=lambda i: (-pop[i].fitness, pop[i].length, i))
    return pop[int(best)]


def _near(g, a, b):
    """Boolean matrix: a[i] and b[j] are equal or 26-neighbours."""
    la = g.lattice32[np.asarray(a, dtype=np.int64)]
    lb = g.lattice32[np.asarray(b, dtype=np.int64)]
    out = np.abs(la[:, None, 0] - lb[None, :, 0]) <= 1
    for k in (1, 2):
        out &= np.abs(la[:, None, k] - lb[None, :, k]) <= 1
    return out


def crossover(a, b, ger, g, rng):
    """Walk parent ``a`` from its start, hopping to ``b`` at neighbouring pairs.

    Each vertex that has a switch pair is a switch point: with probability
    ``ger`` the walk jumps to the earliest paired position on the other
    parent beyond the last one it already used there.  The forward-only rule
    guarantees termination.
    """
    a, b = list(as_vertices(a)), list(as_vertices(b))
    near = _near(g, a, b)
    if ger <= 0 or not near.any():
        return InspectionPath(a)
    paths = (a, b)
    cands = (_rows(near), _rows(near.T))
    used = [-1, -1]
    cur, i = 0, 0
    child = [a[0]]
    while True:
        used[cur] = i
        other = 1 - cur
        row = cands[cur][i]
        jumped = False
        if row:
            first = bisect_right(row, used[other])
            if first < len(row) and rng.random() < ger:
                cur, i = other, row[first]
                jumped = True
        if not jumped:
            i += 1
            if i >= len(paths[cur]):
                break
        v = paths[cur][i]
        if v != child[-1]:
            child.append(v)
    if len(child) < 2:
        return InspectionPath(a)
    return InspectionPath(child)


def _rows(mask):
    """Sorted column indices of the true entries, one list per row."""
    r, c = np.nonzero(mask)
    bounds = np.searchsorted(r, np.arange(mask.shape[0] + 1))
    c = c.tolist()
    return [c[bounds[k]:bounds[k + 1]] for k in range(mask.shape[0])]


def mutate_change(p, ger, g, rng):
    """Move interior vertices to a common neighbour of their two neighbours."""
    verts = list(as_vertices(p))
    n = len(verts)
    if n < 3 or ger <= 0:
        return InspectionPath(verts)
    nb = g.closed_neighborhoods
    for i in np.flatnonzero(rng.random(n - 2) < ger) + 1:
        options = sorted((nb[verts[i - 1]] & nb[verts[i + 1]]) - {verts[i]})
        if options:
            verts[i] = options[int(rng.integers(len(options)))]
    return InspectionPath(verts)


def mutate_add(p, ger, g, rng):
    """Insert a common neighbour between consecutive vertices."""
    verts = list(as_vertices(p))
    if ger <= 0:
        return InspectionPath(verts)
    nb = g.closed_neighborhoods
    hits = set((np.flatnonzero(rng.random(len(verts) - 1) < ger)).tolist())
    if not hits:
        return InspectionPath(verts)
    out = []
    for i, v in enumerate(verts):
        out.append(v)
        if i in hits:
            w = verts[i + 1]
            options = sorted((nb[v] & nb[w]) - {v, w})
            if options:
                out.append(options[int(rng.integers(len(options)))])
    return InspectionPath(out)


def mutate_delete(p, ger, g, rng):
    """Drop interior vertices whose kept predecessor neighbours their successor."""
    verts = list(as_vertices(p))
    n = len(verts)
    if n < 3 or ger <= 0:
        return InspectionPath(verts)
    nb = g.closed_neighborhoods
    hits = set((np.flatnonzero(rng.random(n - 2) < ger) + 1).tolist())
    kept = [verts[0]]
    for i in range(1, n - 1):
        if i in hits and verts[i + 1] in nb[kept[-1]]:
            continue
        kept.append(verts[i])
    kept.append(verts[-1])
    return InspectionPath(kept)


MUTATIONS = (mutate_change, mutate_add, mutate_delete)


class Evaluator:
    def __init__(self, g, coverage_model, cfg):
        self.g = g
        self.coverage = coverage_model
        self.cfg = cfg

    def __call__(self, path):
        cov = self.coverage(path)
        length = path_length(path, self.g)
        fit = fitness(cov, length, self.cfg.coverage_goal, self.cfg.alpha)
        return EvaluatedIndividual(path, cov, length, fit, cov >= self.cfg.coverage_goal)


def initial_population(cfg, g, mesh, template=None):
    n_rule = int(math.floor(cfg.rule_init_proportion * cfg.population_size))
    if n_rule and template is None:
        raise ValueError("rule-based initialisation needs a span template")
    n_points = cfg.initial_path_points or default_path_points(mesh, g.interval)
    router = _ShortestPaths(g) if n_rule else None
    pop = []
    for i in range(cfg.population_size):
        rng = child_rng(cfg.seed, 0, i)
        if i < n_rule:
            pop.append(rule_based_init(g, template, rng, router))
        else:
            pop.append(random_init(g, n_points, rng))
    return pop


def _better(a, b):
    """True when feasible ``a`` should replace best-so-far ``b``."""
    return b is None or a.length < b.length


def evolve(cfg, g, vm, mesh, template=None, restrict_to_visible=False,
           workers=1, on_generation=None):
    """Run the GA; returns (best individual, per-generation stats).

    Children replace their parents wholesale each generation.  The best
    feasible path ever evaluated is kept aside and returned; if no path ever
    meets the goal, the highest-coverage one is returned with
    ``feasible=False``.
    """
    evaluate = Evaluator(g, CoverageModel(vm, mesh, restrict_to_visible), cfg)
    pop = [evaluate(p) for p in initial_population(cfg, g, mesh, template)]

    best = None
    top_cov = None
    for ind in pop:
        if ind.feasible and _better(ind, best):
            best = ind
        if top_cov is None or (ind.coverage, -ind.length) > (top_cov.coverage, -top_cov.length):
            top_cov = ind

    def make_child(args):
        gen, c, parents = args
        rng = child_rng(cfg.seed, gen + 1, c)
        if rng.random() < cfg.ier:
            pa = tournament_select(parents, cfg.tournament_size, rng)
            pb = tournament_select(parents, cfg.tournament_size, rng)
            child = crossover(pa.path, pb.path, cfg.ger, g, rng)
        else:
            child = tournament_select(parents, cfg.tournament_size, rng).path
        for op in MUTATIONS:
            if rng.random() < cfg.ier:
                child = op(child, cfg.ger, g, rng)
        return evaluate(child)

    stats = []
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    try:
        for gen in range(cfg.generations):
            jobs = [(gen, c, pop) for c in range(cfg.population_size)]
            pop = list(pool.map(make_child, jobs)) if pool else [make_child(j) for j in jobs]
            for ind in pop:
                if ind.feasible and _better(ind, best):
                    best = ind
                if (ind.coverage, -ind.length) > (top_cov.coverage, -top_cov.length):
                    top_cov = ind
            st = GenerationStats(
                generation=gen,
                best_fitness=max(ind.fitness for ind in pop),
                best_so_far_length=best.length if best else math.inf,
                mean_coverage=float(np.mean([ind.coverage for ind in pop])),
                feasible_count=sum(ind.feasible for ind in pop),
            )
            stats.append(st)
            if on_generation:
                on_generation(st)
            log.debug("gen %d best %.3f so-far %.3f cov %.3f feasible %d", gen,
                      st.best_fitness, st.best_so_far_length, st.mean_coverage, st.feasible_count)
    finally:
        if pool:
            pool.shutdown()
    return (best if best is not None else top_cov), stats


STATS_FIELDS = ("generation", "best_fitness", "best_so_far_length", "mean_coverage", "feasible_count")


def write_stats(stats, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(STATS_FIELDS)
    for s in stats:
        w.writerow([s.generation, repr(float(s.best_fitness)), repr(float(s.best_so_far_length)),
                    repr(float(s.mean_coverage)), s.feasible_count])
