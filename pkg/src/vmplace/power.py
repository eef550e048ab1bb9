"""Host power curves and exact energy accounting.

A power model is 11 sampled watt values at utilizations 0.0, 0.1, ..., 1.0;
draw between samples is linear interpolation. Energy of a placement is the
integral of power over time, which reduces to a finite sum because host
utilization only changes when a VM starts or ends.

By default a host with no active VMs draws 0 W (it is switched off); set
``idle_hosts_powered`` to keep every host on at its idle draw instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ConfigError, InfeasiblePlacementError
from .model import (
    MIPS_EPS,
    HostSpec,
    Placement,
    ProblemInstance,
    VmRequest,
    check_feasibility,
)

KWH_PER_JOULE = 1.0 / 3.6e6


@dataclass(frozen=True)
class PowerModel:
    """A named utilization->watts curve sampled at 0.0, 0.1, ..., 1.0."""

    name: str
    samples: Tuple[float, ...]

    def __post_init__(self):
        if len(self.samples) != 11:
            raise ValueError(f"power model {self.name!r}: need 11 samples, got {len(self.samples)}")
        if any(s < 0 for s in self.samples):
            raise ValueError(f"power model {self.name!r}: samples must be >= 0")

    @property
    def idle_watts(self) -> float:
        return self.samples[0]

    @property
    def max_watts(self) -> float:
        return self.samples[10]


# SPECpower-style measurements for the two built-in server classes.
IBM_X3250 = PowerModel(
    "ibm_x3250",
    (41.6, 46.7, 52.3, 57.9, 65.4, 73.0, 80.7, 89.5, 99.6, 105.0, 113.0),
)
DELL_R620 = PowerModel(
    "dell_r620",
    (56.1, 79.3, 89.6, 102.0, 121.0, 132.0, 149.0, 171.0, 195.0, 225.0, 263.0),
)

BUILTIN_MODELS: Dict[str, PowerModel] = {m.name: m for m in (IBM_X3250, DELL_R620)}


def load_power_models(source) -> Dict[str, PowerModel]:
    """Read power models from a JSON file/path: {"name":..., "samples":[11 floats]} or a list of those."""
    if hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source) as fh:
            data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    models = {}
    for entry in data:
        try:
            model = PowerModel(str(entry["name"]), tuple(float(s) for s in entry["samples"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad power model entry {entry!r}: {exc}") from exc
        models[model.name] = model
    return models


def _interp(samples: Sequence[float], u: float) -> float:
    # Snap to the nearest sample when u is (up to float noise) a multiple of
    # 0.1, so sample points are reproduced exactly.
    pos = u * 10.0
    k = round(pos)
    if abs(pos - k) < 1e-9:
        return samples[int(k)]
    i = int(pos)
    frac = pos - i
    return samples[i] + frac * (samples[i + 1] - samples[i])


def interpolate_power(model: PowerModel, u: float) -> float:
    """Watts drawn at utilization ``u``; exact at the 11 sample points."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"utilization {u} outside [0, 1]")
    return _interp(model.samples, u)


def utilization(host: HostSpec, active: Iterable[VmRequest], cap_demand_to_core: bool = False) -> float:
    """Fraction of the host's total MIPS consumed by ``active``; 0 when empty.

    The same demand is used for busy-ness and for capacity checking: the
    requested MIPS, per-core-capped when ``cap_demand_to_core`` is set (a VM
    asking for more than a core provides keeps that core fully busy). The
    active set must fit the host (PE and MIPS); an infeasible set is a
    contract violation and raises ValueError.
    """
    active = tuple(active)
    pe_demand = sum(v.pe_count for v in active)
    demand = sum(v.demand_mips_on(host, cap_demand_to_core) for v in active)
    if pe_demand > host.pe_count:
        raise ValueError(f"host {host.id}: PE demand {pe_demand} exceeds capacity {host.pe_count}")
    if demand > host.total_mips + MIPS_EPS:
        raise ValueError(f"host {host.id}: MIPS demand {demand} exceeds capacity {host.total_mips}")
    return min(demand / host.total_mips, 1.0)


def host_power(
    host: HostSpec,
    active: Iterable[VmRequest],
    powered_on: bool = True,
    cap_demand_to_core: bool = False,
) -> float:
    """Watts drawn by ``host`` with ``active`` VMs; an off, empty host draws 0 W."""
    active = tuple(active)
    if not powered_on:
        if active:
            raise ValueError(f"host {host.id} is off but has {len(active)} active VMs")
        return 0.0
    u = utilization(host, active, cap_demand_to_core)
    return interpolate_power(host.power_model, u)


@dataclass(frozen=True)
class EnergyReport:
    """Energy of one placement, per host and total, with its power timeline.

    ``segments`` lists (t_start, t_end, host_id, utilization, watts) and, per
    host, partitions [0, horizon) with no gaps or overlaps.
    """

    per_host: Dict[int, float]  # joules
    total_joules: float
    total_kwh: float
    segments: Tuple[Tuple[int, int, int, float, float], ...]


def integrate_energy(
    placement: Placement,
    instance: ProblemInstance,
    idle_hosts_powered: bool = False,
) -> EnergyReport:
    """Exact energy of a feasible placement over [0, horizon).

    Raises InfeasiblePlacementError (carrying the violations) otherwise.
    """
    violations = check_feasibility(placement, instance)
    if violations:
        raise InfeasiblePlacementError(violations)
    cap = instance.cap_demand_to_core
    per_host = {h.id: 0.0 for h in instance.hosts}
    segments = []
    for t0, t1 in instance.segments:
        by_host: Dict[int, List[VmRequest]] = {}
        for v in instance.vms:
            if v.active_at(t0):
                by_host.setdefault(placement[v.id], []).append(v)
        for host in instance.hosts:
            act = by_host.get(host.id, ())
            if act:
                u = utilization(host, act, cap)
                watts = interpolate_power(host.power_model, u)
            elif idle_hosts_powered:
                u, watts = 0.0, host.power_model.idle_watts
            else:
                u, watts = 0.0, 0.0
            per_host[host.id] += watts * (t1 - t0)
            segments.append((t0, t1, host.id, u, watts))
    total = sum(per_host.values())
    return EnergyReport(per_host, total, total * KWH_PER_JOULE, tuple(segments))


class EnergyEvaluator:
    """Precomputed fast scorer for many candidate placements of one instance.

    Works on gene vectors (host index per VM, in ``instance.vms`` order) and
    memoizes energies by gene tuple; this is the hot path of the search
    algorithms and is safe to share between runs on the same instance.
    """

    _MISS = object()
    _CACHE_LIMIT = 150_000

    def __init__(self, instance: ProblemInstance, idle_hosts_powered: bool = False):
        self.instance = instance
        self.idle = idle_hosts_powered
        segs = instance.segments
        self.nseg = len(segs)
        self.seg_len = [t1 - t0 for t0, t1 in segs]
        start_index = {t: i for i, t in enumerate(instance.event_times)}
        # Each VM occupies a contiguous run of segments [a, b).
        self.spans: List[Tuple[int, int]] = []
        for v in instance.vms:
            self.spans.append((start_index[v.start_time], start_index[v.end_time]))
        self.pe = [v.pe_count for v in instance.vms]
        cap = instance.cap_demand_to_core
        # Effective MIPS demand per VM per host (per-core-capped when the
        # instance says so); used for capacity checks and utilization alike.
        self.eff = [
            [v.demand_mips_on(h, cap) for h in instance.hosts] for v in instance.vms
        ]
        self.host_pe = [h.pe_count for h in instance.hosts]
        self.host_mips = [h.total_mips for h in instance.hosts]
        self.tables = [h.power_model.samples for h in instance.hosts]
        self.idle_base = (
            sum(t[0] for t in self.tables) * instance.horizon if idle_hosts_powered else 0.0
        )
        self.evaluations = 0
        self._cache: Dict[Tuple[int, ...], Optional[float]] = {}

    def try_energy(self, genes: Tuple[int, ...], cache: bool = True) -> Optional[float]:
        """Total joules of the placement, or None if it violates capacity."""
        if cache:
            val = self._cache.get(genes, self._MISS)
            if val is not self._MISS:
                return val
        val = self._compute(genes)
        if cache:
            if len(self._cache) > self._CACHE_LIMIT:
                self._cache.clear()
            self._cache[genes] = val
        return val

    def _compute(self, genes) -> Optional[float]:
        self.evaluations += 1
        nseg = self.nseg
        pe_d: Dict[int, int] = {}
        mips_d: Dict[int, float] = {}
        spans = self.spans
        eff = self.eff
        pe = self.pe
        for i, h in enumerate(genes):
            a, b = spans[i]
            e = eff[i][h]
            p = pe[i]
            base = h * nseg
            for s in range(a, b):
                k = base + s
                if k in pe_d:
                    pe_d[k] += p
                    mips_d[k] += e
                else:
                    pe_d[k] = p
                    mips_d[k] = e
        total = self.idle_base
        host_pe = self.host_pe
        host_mips = self.host_mips
        seg_len = self.seg_len
        for k, md in mips_d.items():
            h, s = divmod(k, nseg)
            cap = host_mips[h]
            if pe_d[k] > host_pe[h] or md > cap + MIPS_EPS:
                return None
            u = md / cap
            if u > 1.0:
                u = 1.0
            w = _interp(self.tables[h], u)
            if self.idle:
                w -= self.tables[h][0]
            total += w * seg_len[s]
        return total

    def feasible(self, genes) -> bool:
        return self.try_energy(tuple(genes)) is not None

    def first_violation(self, genes) -> Optional[Tuple[int, int]]:
        """Earliest (segment_index, host_index) where capacity is exceeded."""
        nseg = self.nseg
        pe_d: Dict[int, int] = {}
        mips_d: Dict[int, float] = {}
        for i, h in enumerate(genes):
            a, b = self.spans[i]
            e = self.eff[i][h]
            p = self.pe[i]
            base = h * nseg
            for s in range(a, b):
                k = base + s
                if k in pe_d:
                    pe_d[k] += p
                    mips_d[k] += e
                else:
                    pe_d[k] = p
                    mips_d[k] = e
        worst = None
        for k, md in mips_d.items():
            h, s = divmod(k, nseg)
            if pe_d[k] > self.host_pe[h] or md > self.host_mips[h] + MIPS_EPS:
                if worst is None or (s, h) < worst:
                    worst = (s, h)
        return worst

    def fits(self, vm_idx: int, host_idx: int, genes) -> bool:
        """Would assigning VM ``vm_idx`` to ``host_idx`` keep that host feasible,
        given every other VM's current gene?"""
        a, b = self.spans[vm_idx]
        for s in range(a, b):
            pe_load = self.pe[vm_idx]
            mips_load = self.eff[vm_idx][host_idx]
            for j, hj in enumerate(genes):
                if hj == host_idx and j != vm_idx:
                    aj, bj = self.spans[j]
                    if aj <= s < bj:
                        pe_load += self.pe[j]
                        mips_load += self.eff[j][host_idx]
            if pe_load > self.host_pe[host_idx] or mips_load > self.host_mips[host_idx] + MIPS_EPS:
                return False
        return True

    def snapshot_power(self, genes) -> float:
        """Aggregate host watts at the instant of peak total MIPS demand.

        The peak instant is the earliest segment with maximal total demand.
        Assumes a feasible gene vector.
        """
        nseg = self.nseg
        demand: Dict[int, float] = {}
        seg_total = [0.0] * nseg
        for i, h in enumerate(genes):
            a, b = self.spans[i]
            r = self.eff[i][h]
            base = h * nseg
            for s in range(a, b):
                k = base + s
                demand[k] = demand.get(k, 0.0) + r
                seg_total[s] += r
        if not seg_total:
            return 0.0
        peak = max(range(nseg), key=lambda s: (seg_total[s], -s))
        total = 0.0
        for h in range(len(self.host_mips)):
            md = demand.get(h * nseg + peak, 0.0)
            if md > 0.0:
                u = min(md / self.host_mips[h], 1.0)
                total += _interp(self.tables[h], u)
            elif self.idle:
                total += self.tables[h][0]
        return total
