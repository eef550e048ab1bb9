"""The three placement solvers: BFD baseline, genetic search, exhaustive oracle.

All solvers produce a :class:`SolveResult` whose energy report comes from
:func:`vmplace.power.integrate_energy` on the returned placement, so reported
numbers are always reproducible from the placement alone.

A candidate solution ("chromosome") is a gene vector: one host index per VM,
in ``instance.vms`` order. This vector is the flattened form of a three-level
allocation tree (root -> hosts -> VMs); see :func:`to_allocation_tree` /
:func:`from_allocation_tree` for the bijection.
"""

from __future__ import annotations

import itertools
import random
import time
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    BudgetExceededError,
    NoFeasibleAssignmentError,
    NoFeasibleHostError,
    UnrepairableError,
)
from .model import MIPS_EPS, Placement, ProblemInstance
from .power import EnergyEvaluator, EnergyReport, _interp, integrate_energy

#: One candidate allocation: gene[i] is the host index of VM i.
Genes = Tuple[int, ...]

FITNESS_ENERGY = "energy"
FITNESS_SNAPSHOT_POWER = "snapshot_power"

RNG_ALGORITHM = "python-random-mt19937"


@dataclass(frozen=True)
class GaConfig:
    """Knobs of the genetic search."""

    population_size: int = 10
    generations: int = 500
    crossover_prob: float = 0.5
    mutation_prob: float = 0.01  # per gene
    elite_count: int = 1
    seed: int = 1
    fitness_mode: str = FITNESS_ENERGY

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be in [0, population_size)")
        if self.fitness_mode not in (FITNESS_ENERGY, FITNESS_SNAPSHOT_POWER):
            raise ValueError(f"unknown fitness_mode {self.fitness_mode!r}")


@dataclass(frozen=True)
class SolveResult:
    placement: Placement
    energy: EnergyReport
    stats: dict


def to_allocation_tree(genes: Sequence[int], host_count: int) -> Tuple[Tuple[int, ...], ...]:
    """Gene vector -> allocation tree: per host, the ascending VM indices on it."""
    children: List[List[int]] = [[] for _ in range(host_count)]
    for i, h in enumerate(genes):
        children[h].append(i)
    return tuple(tuple(c) for c in children)


def from_allocation_tree(tree: Sequence[Sequence[int]]) -> Genes:
    """Inverse of :func:`to_allocation_tree`."""
    n = sum(len(c) for c in tree)
    genes = [0] * n
    for h, child in enumerate(tree):
        for i in child:
            genes[i] = h
    return tuple(genes)


def placement_from_genes(genes: Sequence[int], instance: ProblemInstance) -> Placement:
    return {v.id: instance.hosts[h].id for v, h in zip(instance.vms, genes)}


def genes_from_placement(placement: Placement, instance: ProblemInstance) -> Genes:
    host_pos = {h.id: idx for idx, h in enumerate(instance.hosts)}
    return tuple(host_pos[placement[v.id]] for v in instance.vms)


# ---------------------------------------------------------------------------
# Genetic operators


def fitness(
    chromosome: Sequence[int],
    instance: ProblemInstance,
    config: GaConfig,
    idle_hosts_powered: bool = False,
    _evaluator: Optional[EnergyEvaluator] = None,
) -> float:
    """Reciprocal of total energy (joules), or of aggregate watts at the peak
    instant in snapshot mode. Higher is better. The chromosome must already be
    feasible (repair first)."""
    ev = _evaluator or EnergyEvaluator(instance, idle_hosts_powered)
    genes = tuple(chromosome)
    energy = ev.try_energy(genes)
    if energy is None:
        raise ValueError("fitness of an infeasible chromosome; repair it first")
    if config.fitness_mode == FITNESS_SNAPSHOT_POWER:
        return 1.0 / ev.snapshot_power(genes)
    return 1.0 / energy


def select_parents(
    population: Sequence[Genes],
    fitnesses: Sequence[float],
    rng: random.Random,
) -> Tuple[Genes, Genes]:
    """Two independent roulette-wheel draws (may return the same individual twice)."""
    if not population:
        raise ValueError("empty population")
    cumulative = list(accumulate(fitnesses))
    total = cumulative[-1]

    def draw() -> Genes:
        x = rng.random() * total
        return population[min(bisect_right(cumulative, x), len(population) - 1)]

    return draw(), draw()


def crossover(
    a: Genes,
    b: Genes,
    prob: float,
    rng: random.Random,
) -> Tuple[Genes, Genes]:
    """Single-point crossover with probability ``prob``, else parent copies."""
    if len(a) != len(b):
        raise ValueError(f"gene length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2 or rng.random() >= prob:
        return a, b
    cut = rng.randint(1, n - 1)
    return a[:cut] + b[cut:], b[:cut] + a[cut:]


def mutate(c: Genes, prob: float, host_count: int, rng: random.Random) -> Genes:
    """Each gene independently rerolled to a uniform host index with probability ``prob``."""
    if host_count < 1:
        raise ValueError("host_count must be >= 1")
    if prob <= 0.0:
        return c
    genes = list(c)
    for i in range(len(genes)):
        if rng.random() < prob:
            genes[i] = rng.randrange(host_count)
    return tuple(genes)


def repair(
    c: Sequence[int],
    instance: ProblemInstance,
    rng: random.Random,
    _evaluator: Optional[EnergyEvaluator] = None,
) -> Genes:
    """Return a feasible chromosome; feasible inputs pass through unchanged.

    While violations remain: at the earliest violating (host, interval), evict
    the most recently assigned contributor (highest VM index) and re-place it
    first-fit by ascending host; if no host can take it, or first-fit revisits
    an already-seen state (evict/re-place cycles are possible because evicting
    frees the source host again), send it to a random host and keep going.

    The highest-index victim rule can strand: low-index VMs are never eligible
    to move, so some feasible arrangements are unreachable from some starts.
    After a stall threshold the victim is therefore drawn uniformly from the
    violation's contributors, which makes the walk ergodic over assignments.
    Raises UnrepairableError once the move budget is spent, which in practice
    only happens when demand genuinely exceeds fleet capacity.
    """
    ev = _evaluator or EnergyEvaluator(instance)
    genes = list(c)
    n = len(genes)
    m = len(instance.hosts)
    stall = max(50, 5 * n)
    limit = max(400, 40 * n)
    moves = 0
    mutated = False
    seen = {tuple(genes)}
    while True:
        viol = ev.first_violation(genes)
        if viol is None:
            return tuple(c) if not mutated else tuple(genes)
        seg, host = viol
        contributors = [
            i
            for i in range(n)
            if genes[i] == host and ev.spans[i][0] <= seg < ev.spans[i][1]
        ]
        vm = contributors[-1] if moves < stall else rng.choice(contributors)
        placed = False
        for h2 in range(m):
            if h2 != host and ev.fits(vm, h2, genes):
                candidate = genes[:]
                candidate[vm] = h2
                if tuple(candidate) not in seen:
                    genes[vm] = h2
                    placed = True
                    break
        if not placed:
            genes[vm] = rng.randrange(m)
        seen.add(tuple(genes))
        mutated = True
        moves += 1
        if moves > limit:
            raise UnrepairableError(
                f"could not repair chromosome within {limit} moves; "
                "instance demand likely exceeds fleet capacity"
            )


# ---------------------------------------------------------------------------
# Solvers


def bfd_schedule(instance: ProblemInstance, idle_hosts_powered: bool = False) -> SolveResult:
    """Earliest-start-first ordering with least-incremental-energy host choice.

    VMs are processed by ascending start time (ties: descending total MIPS,
    then ascending id). Each VM goes to the feasible host whose energy over
    the VM's interval grows the least, counting the switch-on cost of a host
    that was empty; ties go to the lowest host index. Deterministic.
    """
    if not instance.vms:
        raise ValueError("bfd_schedule: empty instance")
    t_begin = time.perf_counter()
    ev = EnergyEvaluator(instance, idle_hosts_powered)
    n = len(instance.vms)
    m = len(instance.hosts)
    nseg = ev.nseg
    order = sorted(
        range(n),
        key=lambda i: (
            instance.vms[i].start_time,
            -instance.vms[i].total_mips,
            instance.vms[i].id,
        ),
    )
    pe_load = [[0] * nseg for _ in range(m)]
    mips_load = [[0.0] * nseg for _ in range(m)]

    def seg_watts(h: int, pe_d: int, mips_d: float) -> float:
        if pe_d == 0 and not idle_hosts_powered:
            return 0.0
        u = min(mips_d / ev.host_mips[h], 1.0)
        return _interp(ev.tables[h], u)

    genes: List[int] = [0] * n
    for i in order:
        a, b = ev.spans[i]
        best_delta = None
        best_h = None
        for h in range(m):
            fits = True
            for s in range(a, b):
                if (
                    pe_load[h][s] + ev.pe[i] > ev.host_pe[h]
                    or mips_load[h][s] + ev.eff[i][h] > ev.host_mips[h] + MIPS_EPS
                ):
                    fits = False
                    break
            if not fits:
                continue
            delta = 0.0
            for s in range(a, b):
                before = seg_watts(h, pe_load[h][s], mips_load[h][s])
                after = seg_watts(h, pe_load[h][s] + ev.pe[i], mips_load[h][s] + ev.eff[i][h])
                delta += (after - before) * ev.seg_len[s]
            if best_delta is None or delta < best_delta:
                best_delta = delta
                best_h = h
        if best_h is None:
            raise NoFeasibleHostError(instance.vms[i].id)
        genes[i] = best_h
        for s in range(a, b):
            pe_load[best_h][s] += ev.pe[i]
            mips_load[best_h][s] += ev.eff[i][best_h]

    placement = placement_from_genes(genes, instance)
    report = integrate_energy(placement, instance, idle_hosts_powered)
    stats = {
        "solver": "bfd",
        "evaluations": n * m,
        "wall_time_s": time.perf_counter() - t_begin,
    }
    return SolveResult(placement, report, stats)


def gapa_schedule(
    instance: ProblemInstance,
    config: GaConfig,
    idle_hosts_powered: bool = False,
    _evaluator: Optional[EnergyEvaluator] = None,
) -> SolveResult:
    """Generational genetic search, deterministic for a given (instance, config).

    Random initial population (repaired to feasibility), then per generation:
    keep the elites, fill up with roulette selection -> single-point crossover
    -> per-gene mutation -> repair. Returns the best individual ever seen.
    """
    if not instance.vms:
        raise ValueError("gapa_schedule: empty instance")
    t_begin = time.perf_counter()
    rng = random.Random(config.seed)
    ev = _evaluator or EnergyEvaluator(instance, idle_hosts_powered)
    eval_start = ev.evaluations
    n = len(instance.vms)
    m = len(instance.hosts)

    def fit_of(genes: Genes) -> float:
        return fitness(genes, instance, config, idle_hosts_powered, _evaluator=ev)

    population: List[Genes] = []
    for _ in range(config.population_size):
        raw = tuple(rng.randrange(m) for _ in range(n))
        population.append(repair(raw, instance, rng, _evaluator=ev))
    fitnesses = [fit_of(g) for g in population]

    best_genes = population[0]
    best_fit = fitnesses[0]
    for g, f in zip(population, fitnesses):
        if f > best_fit:
            best_genes, best_fit = g, f
    trajectory = [max(fitnesses)]

    for _generation in range(config.generations):
        ranked = sorted(range(len(population)), key=lambda i: -fitnesses[i])
        new_pop = [population[i] for i in ranked[: config.elite_count]]
        while len(new_pop) < config.population_size:
            p1, p2 = select_parents(population, fitnesses, rng)
            for child in crossover(p1, p2, config.crossover_prob, rng):
                if len(new_pop) >= config.population_size:
                    break
                child = mutate(child, config.mutation_prob, m, rng)
                child = repair(child, instance, rng, _evaluator=ev)
                new_pop.append(child)
        population = new_pop
        fitnesses = [fit_of(g) for g in population]
        gen_best = max(fitnesses)
        trajectory.append(gen_best)
        for g, f in zip(population, fitnesses):
            if f > best_fit:
                best_genes, best_fit = g, f

    placement = placement_from_genes(best_genes, instance)
    report = integrate_energy(placement, instance, idle_hosts_powered)
    stats = {
        "solver": "gapa",
        "generations_run": config.generations,
        "best_fitness": best_fit,
        "trajectory": trajectory,
        "evaluations": ev.evaluations - eval_start,
        "seed": config.seed,
        "rng": RNG_ALGORITHM,
        "wall_time_s": time.perf_counter() - t_begin,
    }
    return SolveResult(placement, report, stats)


def exact_schedule(
    instance: ProblemInstance,
    budget: int = 10_000_000,
    idle_hosts_powered: bool = False,
) -> SolveResult:
    """Brute-force optimum by full enumeration (oracle for the heuristics).

    Enumerates all host^vm assignments in lexicographic order and keeps the
    first minimum-energy feasible one, i.e. ties resolve to the smallest gene
    vector.
    """
    if not instance.vms:
        raise ValueError("exact_schedule: empty instance")
    t_begin = time.perf_counter()
    n = len(instance.vms)
    m = len(instance.hosts)
    count = m**n
    if count > budget:
        raise BudgetExceededError(
            f"{m}^{n} = {count} assignments exceeds the enumeration budget {budget}"
        )
    ev = EnergyEvaluator(instance, idle_hosts_powered)
    best_energy = None
    best_genes: Optional[Genes] = None
    for genes in itertools.product(range(m), repeat=n):
        energy = ev.try_energy(genes, cache=False)
        if energy is not None and (best_energy is None or energy < best_energy):
            best_energy = energy
            best_genes = genes
    if best_genes is None:
        raise NoFeasibleAssignmentError(f"none of the {count} assignments is feasible")
    placement = placement_from_genes(best_genes, instance)
    report = integrate_energy(placement, instance, idle_hosts_powered)
    stats = {
        "solver": "exact",
        "evaluations": count,
        "wall_time_s": time.perf_counter() - t_begin,
    }
    return SolveResult(placement, report, stats)
