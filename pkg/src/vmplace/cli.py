"""Experiment runner: load a workload and fleet, run solvers, emit reports.

Subcommands
-----------
solve         run one solver on one instance and report its energy
experiment    run BFD/GAPA/EXACT over a GA parameter grid with fixed seeds
gen-workload  write the bundled sample timetable (and optionally a fleet file)
validate      feasibility-check a placement file against an instance

Reports are CSV (stable column order, 6-decimal kWh) or JSON; re-reading a
report reproduces the records. Wall-clock times are tracked per run but kept
out of the serialized output so that identical inputs produce byte-identical
report files.

Exit codes: 0 success, 2 configuration error, 3 infeasible or unrepairable
instance, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    BudgetExceededError,
    ConfigError,
    InfeasiblePlacementError,
    NoFeasibleAssignmentError,
    NoFeasibleHostError,
    ParseError,
    UnrepairableError,
)
from .model import Placement, ProblemInstance
from .power import KWH_PER_JOULE, integrate_energy
from .schedulers import (
    FITNESS_ENERGY,
    FITNESS_SNAPSHOT_POWER,
    GaConfig,
    SolveResult,
    bfd_schedule,
    exact_schedule,
    gapa_schedule,
)
from .workload import (
    DEFAULT_FLEET,
    SAMPLE_TIMETABLE,
    SlotConfig,
    build_fleet,
    expand,
    fleet_to_json,
    load_fleet,
    parse_timetable,
)

SOLVER_BFD = "bfd"
SOLVER_GAPA = "gapa"
SOLVER_EXACT = "exact"

DEFAULT_SEEDS = tuple(range(1, 21))

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

#: Stable CSV schema; changing the order is a report-format break.
CSV_COLUMNS = (
    "solver",
    "aggregate",
    "population",
    "generations",
    "crossover",
    "mutation",
    "fitness",
    "seed",
    "status",
    "total_kwh",
    "hosts_used",
    "ratio_vs_bfd",
    "per_host_kwh",
    "trajectory",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: which solvers run on which instance, and how."""

    workload_path: Optional[str]  # None -> bundled sample timetable
    fleet_path: Optional[str]  # None -> default 100-host fleet
    solvers: Tuple[str, ...] = (SOLVER_BFD, SOLVER_GAPA)
    ga_grid: Tuple[GaConfig, ...] = (GaConfig(),)
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    idle_hosts_powered: bool = False
    vm_pe_count: int = 1
    vm_mips_per_pe: float = 2200.0
    cap_demand_to_core: bool = False
    exact_budget: int = 10_000_000
    output_path: Optional[str] = None
    output_format: str = "csv"
    dump_placements: bool = False

    def __post_init__(self):
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        unknown = set(self.solvers) - {SOLVER_BFD, SOLVER_GAPA, SOLVER_EXACT}
        if unknown:
            raise ConfigError(f"unknown solvers: {sorted(unknown)}")
        if SOLVER_GAPA in self.solvers and (not self.ga_grid or not self.seeds):
            raise ConfigError("gapa requires a non-empty parameter grid and seed list")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.output_format!r}")


@dataclass
class RunRecord:
    """One solver run (or a per-grid-point aggregate over seeds)."""

    solver: str
    aggregate: str = ""  # "", "mean" or "min"
    population: Optional[int] = None
    generations: Optional[int] = None
    crossover: Optional[float] = None
    mutation: Optional[float] = None
    fitness: Optional[str] = None
    seed: Optional[int] = None
    status: str = "ok"
    total_kwh: Optional[float] = None
    hosts_used: Optional[int] = None
    ratio_vs_bfd: Optional[float] = None
    per_host_kwh: Dict[int, float] = field(default_factory=dict)
    trajectory: Tuple[float, ...] = ()
    # Not serialized: varies between runs and would break report determinism.
    wall_time_s: Optional[float] = None
    placement: Optional[Placement] = None


def _record_from_result(solver: str, result: SolveResult, cfg: Optional[GaConfig]) -> RunRecord:
    used = sum(1 for kwh in result.energy.per_host.values() if kwh > 0.0)
    rec = RunRecord(
        solver=solver,
        total_kwh=result.energy.total_kwh,
        hosts_used=used,
        per_host_kwh={h: j * KWH_PER_JOULE for h, j in result.energy.per_host.items() if j > 0.0},
        wall_time_s=result.stats.get("wall_time_s"),
        placement=result.placement,
    )
    if cfg is not None:
        rec.population = cfg.population_size
        rec.generations = cfg.generations
        rec.crossover = cfg.crossover_prob
        rec.mutation = cfg.mutation_prob
        rec.fitness = cfg.fitness_mode
        rec.seed = cfg.seed
        rec.trajectory = tuple(result.stats.get("trajectory", ()))
    return rec


def build_instance(config: ExperimentConfig) -> ProblemInstance:
    """Load (or default) the workload and fleet into a problem instance."""
    if config.workload_path is None:
        rows = parse_timetable(SAMPLE_TIMETABLE)
    else:
        with open(config.workload_path) as fh:
            rows = parse_timetable(fh)
    if not rows:
        raise ConfigError("workload contains no rows")
    vms = expand(rows, SlotConfig(), vm_template=(config.vm_pe_count, config.vm_mips_per_pe))
    if config.fleet_path is None:
        hosts = build_fleet(DEFAULT_FLEET)
    else:
        hosts = load_fleet(config.fleet_path)
    return ProblemInstance(tuple(vms), tuple(hosts), cap_demand_to_core=config.cap_demand_to_core)


def run_experiment(config: ExperimentConfig, instance: Optional[ProblemInstance] = None) -> List[RunRecord]:
    """Run the configured solvers; records come back in config order.

    BFD runs once (it is deterministic); GAPA runs per (grid point x seed)
    followed by that grid point's mean and min aggregates; EXACT runs once if
    its enumeration budget allows, else yields a budget_exceeded record.
    """
    if instance is None:
        instance = build_instance(config)
    records: List[RunRecord] = []
    bfd_kwh: Optional[float] = None
    if SOLVER_BFD in config.solvers:
        result = bfd_schedule(instance, config.idle_hosts_powered)
        rec = _record_from_result(SOLVER_BFD, result, None)
        rec.ratio_vs_bfd = 1.0
        bfd_kwh = rec.total_kwh
        records.append(rec)
    if SOLVER_GAPA in config.solvers:
        for point in config.ga_grid:
            point_records: List[RunRecord] = []
            for seed in config.seeds:
                cfg = GaConfig(
                    population_size=point.population_size,
                    generations=point.generations,
                    crossover_prob=point.crossover_prob,
                    mutation_prob=point.mutation_prob,
                    elite_count=point.elite_count,
                    seed=seed,
                    fitness_mode=point.fitness_mode,
                )
                result = gapa_schedule(instance, cfg, config.idle_hosts_powered)
                rec = _record_from_result(SOLVER_GAPA, result, cfg)
                if bfd_kwh is not None:
                    rec.ratio_vs_bfd = bfd_kwh / rec.total_kwh
                point_records.append(rec)
            records.extend(point_records)
            for how in ("mean", "min"):
                vals = [r.total_kwh for r in point_records]
                agg_kwh = sum(vals) / len(vals) if how == "mean" else min(vals)
                agg = RunRecord(
                    solver=SOLVER_GAPA,
                    aggregate=how,
                    population=point.population_size,
                    generations=point.generations,
                    crossover=point.crossover_prob,
                    mutation=point.mutation_prob,
                    fitness=point.fitness_mode,
                    total_kwh=agg_kwh,
                )
                if bfd_kwh is not None:
                    agg.ratio_vs_bfd = bfd_kwh / agg_kwh
                records.append(agg)
    if SOLVER_EXACT in config.solvers:
        try:
            result = exact_schedule(instance, config.exact_budget, config.idle_hosts_powered)
        except BudgetExceededError:
            records.append(RunRecord(solver=SOLVER_EXACT, status="budget_exceeded"))
        else:
            rec = _record_from_result(SOLVER_EXACT, result, None)
            if bfd_kwh is not None:
                rec.ratio_vs_bfd = bfd_kwh / rec.total_kwh
            records.append(rec)
    return records


# ---------------------------------------------------------------------------
# Report serialization


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def _record_to_row(rec: RunRecord) -> List[str]:
    return [
        rec.solver,
        rec.aggregate,
        "" if rec.population is None else str(rec.population),
        "" if rec.generations is None else str(rec.generations),
        "" if rec.crossover is None else f"{rec.crossover:g}",
        "" if rec.mutation is None else f"{rec.mutation:g}",
        rec.fitness or "",
        "" if rec.seed is None else str(rec.seed),
        rec.status,
        _fmt(rec.total_kwh),
        "" if rec.hosts_used is None else str(rec.hosts_used),
        _fmt(rec.ratio_vs_bfd),
        ";".join(f"{h}:{kwh:.6f}" for h, kwh in sorted(rec.per_host_kwh.items())),
        ";".join(f"{f:.12g}" for f in rec.trajectory),
    ]


def _record_from_row(row: Sequence[str]) -> RunRecord:
    d = dict(zip(CSV_COLUMNS, row))
    per_host: Dict[int, float] = {}
    if d["per_host_kwh"]:
        for item in d["per_host_kwh"].split(";"):
            h, kwh = item.split(":")
            per_host[int(h)] = float(kwh)
    return RunRecord(
        solver=d["solver"],
        aggregate=d["aggregate"],
        population=int(d["population"]) if d["population"] else None,
        generations=int(d["generations"]) if d["generations"] else None,
        crossover=float(d["crossover"]) if d["crossover"] else None,
        mutation=float(d["mutation"]) if d["mutation"] else None,
        fitness=d["fitness"] or None,
        seed=int(d["seed"]) if d["seed"] else None,
        status=d["status"],
        total_kwh=float(d["total_kwh"]) if d["total_kwh"] else None,
        hosts_used=int(d["hosts_used"]) if d["hosts_used"] else None,
        ratio_vs_bfd=float(d["ratio_vs_bfd"]) if d["ratio_vs_bfd"] else None,
        per_host_kwh=per_host,
        trajectory=tuple(float(f) for f in d["trajectory"].split(";")) if d["trajectory"] else (),
    )


def _record_to_json(rec: RunRecord) -> dict:
    return dict(zip(CSV_COLUMNS, _record_to_row(rec)))


def emit_report(records: Sequence[RunRecord], output_format: str, sink) -> None:
    """Write records as CSV (stable columns) or a JSON array to a text sink."""
    if not records:
        raise ValueError("no records to emit")
    if output_format == "csv":
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(_record_to_row(rec))
    elif output_format == "json":
        json.dump([_record_to_json(r) for r in records], sink, indent=2)
        sink.write("\n")
    else:
        raise ConfigError(f"unknown output format {output_format!r}")


def read_report(source, output_format: str = "csv") -> List[RunRecord]:
    """Inverse of :func:`emit_report` (sans wall time and placements)."""
    text = source.read() if hasattr(source, "read") else source
    if output_format == "csv":
        reader = csv.reader(io.StringIO(text))
        rows = list(reader)
        if not rows or tuple(rows[0]) != CSV_COLUMNS:
            raise ConfigError("not a report file: bad or missing header")
        return [_record_from_row(r) for r in rows[1:]]
    return [_record_from_row([d[c] for c in CSV_COLUMNS]) for d in json.loads(text)]


def _run_id(rec: RunRecord) -> str:
    if rec.solver != SOLVER_GAPA:
        return rec.solver
    return f"gapa-g{rec.generations}-c{rec.crossover:g}-s{rec.seed}"


def write_placement(placement: Placement, sink) -> None:
    """One ``vm_id,host_id`` pair per line, in VM id order."""
    for vm_id in sorted(placement):
        sink.write(f"{vm_id},{placement[vm_id]}\n")


def read_placement(source) -> Placement:
    text = source.read() if hasattr(source, "read") else source
    placement: Placement = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            vm_id, host_id = line.rsplit(",", 1)
            placement[vm_id] = int(host_id)
        except ValueError as exc:
            raise ParseError(lineno, f"expected 'vm_id,host_id', got {line!r}") from exc
    return placement


def _dump_placements(records: Sequence[RunRecord], out_path: str) -> None:
    stem = out_path.rsplit(".", 1)[0]
    for rec in records:
        if rec.placement is None:
            continue
        with open(f"{stem}.{_run_id(rec)}.placement", "w") as fh:
            write_placement(rec.placement, fh)


# ---------------------------------------------------------------------------
# Argument parsing and dispatch


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workload", metavar="PATH", help="timetable file (default: bundled sample)")
    p.add_argument("--fleet", metavar="PATH", help="fleet JSON file (default: built-in 100-host fleet)")
    p.add_argument("--vm-pes", type=int, default=1, help="PEs per expanded VM (default 1)")
    p.add_argument("--vm-mips", type=float, default=2200.0, help="MIPS per PE per expanded VM (default 2200)")
    p.add_argument(
        "--cap-to-core",
        action="store_true",
        help="cap each VM's per-core demand at the hosting core's MIPS",
    )
    p.add_argument(
        "--idle-powered",
        choices=("on", "off"),
        default="off",
        help="empty hosts draw idle power instead of 0 W (default off)",
    )


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="PATH", help="report file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="report format")
    p.add_argument("--dump-placements", action="store_true", help="write a placement file per run next to --out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmplace", description=__doc__.split("\n", 1)[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver on one instance")
    _add_instance_args(p)
    p.add_argument("--solver", choices=(SOLVER_BFD, SOLVER_GAPA, SOLVER_EXACT), default=SOLVER_BFD)
    p.add_argument("--population", type=int, default=10)
    p.add_argument("--generations", type=int, default=500)
    p.add_argument("--crossover", type=float, default=0.5)
    p.add_argument("--mutation", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--fitness", choices=("energy", "snapshot"), default="energy")
    p.add_argument("--exact-budget", type=int, default=10_000_000)
    _add_output_args(p)

    p = sub.add_parser("experiment", help="run a solver grid and emit a report")
    _add_instance_args(p)
    p.add_argument(
        "--solvers",
        default="bfd,gapa",
        help="comma-separated subset of bfd,gapa,exact (default bfd,gapa)",
    )
    p.add_argument("--population", type=int, default=10)
    p.add_argument("--generations", type=int, action="append", help="repeatable (default 500 1000)")
    p.add_argument("--crossover", type=float, action="append", help="repeatable (default 0.25 0.5 0.75)")
    p.add_argument("--mutation", type=float, default=0.01)
    p.add_argument("--seed", type=int, action="append", help="repeatable (default 1..20)")
    p.add_argument("--fitness", choices=("energy", "snapshot"), default="energy")
    p.add_argument("--exact-budget", type=int, default=10_000_000)
    _add_output_args(p)

    p = sub.add_parser("gen-workload", help="write the bundled sample timetable")
    p.add_argument("--out", metavar="PATH", help="timetable destination (default: stdout)")
    p.add_argument("--fleet-out", metavar="PATH", help="also write the default fleet as JSON")

    p = sub.add_parser("validate", help="feasibility-check a placement file")
    _add_instance_args(p)
    p.add_argument("--placement", metavar="PATH", required=True, help="file of vm_id,host_id lines")
    return parser


def _ga_config(args, seed: int, generations: int, crossover: float) -> GaConfig:
    fitness = FITNESS_ENERGY if args.fitness == "energy" else FITNESS_SNAPSHOT_POWER
    return GaConfig(
        population_size=args.population,
        generations=generations,
        crossover_prob=crossover,
        mutation_prob=args.mutation,
        seed=seed,
        fitness_mode=fitness,
    )


def _config_from_args(args, solvers: Tuple[str, ...], ga_grid: Tuple[GaConfig, ...], seeds: Tuple[int, ...]) -> ExperimentConfig:
    return ExperimentConfig(
        workload_path=args.workload,
        fleet_path=args.fleet,
        solvers=solvers,
        ga_grid=ga_grid,
        seeds=seeds,
        idle_hosts_powered=args.idle_powered == "on",
        vm_pe_count=args.vm_pes,
        vm_mips_per_pe=args.vm_mips,
        cap_demand_to_core=args.cap_to_core,
        exact_budget=getattr(args, "exact_budget", 10_000_000),
        output_path=args.out,
        output_format=args.format,
        dump_placements=args.dump_placements,
    )


def _emit(records: Sequence[RunRecord], config: ExperimentConfig) -> None:
    if config.output_path is None:
        emit_report(records, config.output_format, sys.stdout)
    else:
        with open(config.output_path, "w") as fh:
            emit_report(records, config.output_format, fh)
        if config.dump_placements:
            _dump_placements(records, config.output_path)


def cmd_solve(args) -> int:
    ga = _ga_config(args, args.seed, args.generations, args.crossover)
    config = _config_from_args(args, (args.solver,), (ga,), (args.seed,))
    records = run_experiment(config)
    _emit(records, config)
    return EXIT_OK


def cmd_experiment(args) -> int:
    solvers = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
    generations = tuple(args.generations or (500, 1000))
    crossovers = tuple(args.crossover or (0.25, 0.5, 0.75))
    seeds = tuple(args.seed or DEFAULT_SEEDS)
    grid = tuple(
        _ga_config(args, seeds[0], g, c) for g in generations for c in crossovers
    )
    config = _config_from_args(args, solvers, grid, seeds)
    records = run_experiment(config)
    _emit(records, config)
    return EXIT_OK


def cmd_gen_workload(args) -> int:
    if args.out is None:
        sys.stdout.write(SAMPLE_TIMETABLE)
    else:
        with open(args.out, "w") as fh:
            fh.write(SAMPLE_TIMETABLE)
    if args.fleet_out:
        with open(args.fleet_out, "w") as fh:
            json.dump(fleet_to_json(DEFAULT_FLEET), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = ExperimentConfig(
        workload_path=args.workload,
        fleet_path=args.fleet,
        solvers=(SOLVER_BFD,),
        idle_hosts_powered=args.idle_powered == "on",
        vm_pe_count=args.vm_pes,
        vm_mips_per_pe=args.vm_mips,
        cap_demand_to_core=args.cap_to_core,
    )
    instance = build_instance(config)
    with open(args.placement) as fh:
        placement = read_placement(fh)
    missing = [v.id for v in instance.vms if v.id not in placement]
    if missing:
        raise ConfigError(f"placement misses {len(missing)} VMs, e.g. {missing[:3]}")
    report = integrate_energy(placement, instance, config.idle_hosts_powered)
    print(f"feasible; total {report.total_kwh:.6f} kWh over {instance.horizon} s")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "experiment": cmd_experiment,
        "gen-workload": cmd_gen_workload,
        "validate": cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        InfeasiblePlacementError,
        NoFeasibleHostError,
        NoFeasibleAssignmentError,
        UnrepairableError,
        BudgetExceededError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    main_entry()
