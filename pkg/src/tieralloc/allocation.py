"""Allocation algorithms: annealed search, random and greedy baselines, and
the exhaustive optimum.

Planning happens per user (or per group) around the center of mobility. The
candidate search widens its radius in fixed steps; at each radius a plan is
assembled by roulette-wheel selection over the candidates' total normalized
QoS, then checked against the budget constraints. The annealer iterates such
proposals, keeping the best plan seen and accepting worse intermediate plans
with a temperature-scheduled Metropolis probability to escape local optima.

Utilities follow the minimum rule: a user's satisfaction is the worst of its
normalized price / power / delay, the fleet objective is the mean over users
(over groups of member means in grouped mode). Local-cloud capacity is
enforced at admission time through the shared ledger, first come first
served in a seeded random order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (InvalidGroup, NoFeasibleCandidates,
                     TooLargeForEnumeration)
from .model import (LOCAL, LocationMap, MobileUser, UserGroup,
                    center_of_group_mobility, center_of_mobility)
from .profiles import ProfileSet, invocation_context, service_qos
from .registry import CapacityLedger, ServiceDirectory
from .workflow import (DIMS, LTW, ExecutionPlan, Occurrence, QoSExtrema,
                       QoSTriple, ZERO_QOS, candidate_services, ltw_extrema,
                       ltw_qos, normalize_ltw_qos, normalize_service,
                       occurrences, workflow_extrema)

AvailabilityFn = Callable[[int], bool]

# drivers accept one shared budget vector or a per-user-id mapping
Constraints = "ConstraintVector | Mapping[int, ConstraintVector]"


def constraints_for(constraints, uid: int) -> "ConstraintVector":
    """Resolve a shared or per-user budget specification for one user."""
    if isinstance(constraints, ConstraintVector):
        return constraints
    return constraints.get(uid, ConstraintVector.unlimited())


@dataclass(frozen=True)
class ConstraintVector:
    """Per-dimension budget bounds on raw QoS (inf = unconstrained)."""

    price: float = math.inf
    power: float = math.inf
    delay: float = math.inf

    def get(self, dim: str) -> float:
        return getattr(self, dim)

    def bounded(self) -> bool:
        return any(math.isfinite(self.get(d)) for d in DIMS)

    @classmethod
    def unlimited(cls) -> "ConstraintVector":
        return cls()


@dataclass(frozen=True)
class AnnealingParams:
    """Knobs of the annealed allocator.

    radius_start_m and radius_step_m shape the widening candidate search
    (radius = start + i * step for i < max_expansions). max_iter bounds the
    proposal loop; t0 and alpha set the geometric cooling schedule. With
    acceptance "always" every proposal is accepted regardless of quality.
    """

    max_iter: int = 20
    radius_start_m: float = 200.0
    radius_step_m: float = 100.0
    max_expansions: int = 15
    t0: float = 0.1
    alpha: float = 0.9
    acceptance: str = "metropolis"

    def __post_init__(self):
        if self.max_iter < 0 or self.max_expansions < 1:
            raise ValueError("need max_iter >= 0 and max_expansions >= 1")
        if self.radius_start_m < 0 or self.radius_step_m < 0:
            raise ValueError("radii must be >= 0")
        if not 0 < self.alpha <= 1 or self.t0 <= 0:
            raise ValueError("need t0 > 0 and 0 < alpha <= 1")
        if self.acceptance not in ("metropolis", "always"):
            raise ValueError(f"unknown acceptance rule {self.acceptance!r}")

    def temperature(self, j: int) -> float:
        return self.t0 * self.alpha ** j


@dataclass
class AllocationResult:
    """Outcome of one allocation: plans by user id plus the objective."""

    plans: dict[int, ExecutionPlan]
    utility: float
    feasible: bool
    iterations: int = 0
    note: str = ""


# --- scalar utilities ---------------------------------------------------------

def utility_single(normalized: Iterable[QoSTriple]) -> float:
    """Mean over users of the worst normalized dimension, in [0, 1]."""
    mins = [min(t.as_tuple()) for t in normalized]
    if not mins:
        raise ValueError("utility over no users")
    return float(np.mean(mins))


def utility_group(member_normalized: Iterable[QoSTriple]) -> float:
    """Group satisfaction: mean over members of their worst dimension."""
    mins = [min(t.as_tuple()) for t in member_normalized]
    if not mins:
        raise InvalidGroup("utility over an empty group")
    return float(np.mean(mins))


def roulette_index(totals: Sequence[float], draw: float) -> int:
    """Index selected by a roulette draw in [0, 1) over the given weights.

    Weights are used in the order given (sort candidates beforehand); each
    index owns a slice proportional to its weight. All-zero weights degrade
    to a uniform pick.
    """
    if len(totals) == 0:
        raise ValueError("roulette over no candidates")
    if not 0.0 <= draw < 1.0:
        raise ValueError("draw must lie in [0, 1)")
    arr = np.asarray(totals, dtype=float)
    if np.any(arr < 0):
        raise ValueError("weights must be >= 0")
    s = arr.sum()
    if s == 0.0:
        return min(int(draw * len(arr)), len(arr) - 1)
    cum = np.cumsum(arr / s)
    return min(int(np.searchsorted(cum, draw, side="right")), len(arr) - 1)


def roulette_pick(weighted_ids: Sequence[tuple[int, float]],
                  rng: np.random.Generator) -> int:
    """Roulette-wheel pick over (id, total) pairs, sorted by ascending total
    so better candidates own proportionally larger slices."""
    ordered = sorted(weighted_ids, key=lambda p: (p[1], p[0]))
    idx = roulette_index([w for _, w in ordered], rng.random())
    return ordered[idx][0]


def check_constraints(per_user_raw: Sequence[QoSTriple],
                      constraints: ConstraintVector,
                      usage: Optional[Mapping[int, int]] = None,
                      ledger: Optional[CapacityLedger] = None) -> list[str]:
    """Violation messages for budget and capacity constraints (empty = ok).

    Budgets bound the mean raw QoS over the given users, boundary inclusive.
    usage maps cloud id to the number of users placed on it and is checked
    against the ledger's capacities.
    """
    out: list[str] = []
    if per_user_raw:
        for dim in DIMS:
            budget = constraints.get(dim)
            if not math.isfinite(budget):
                continue
            mean = float(np.mean([t.get(dim) for t in per_user_raw]))
            if mean > budget:
                out.append(f"mean {dim} {mean:.6g} exceeds budget {budget:.6g}")
    if usage and ledger is not None:
        for cid, n in sorted(usage.items()):
            if ledger.tracked(cid) and n > ledger.capacity(cid):
                out.append(f"cloud {cid} serves {n} users over capacity "
                           f"{ledger.capacity(cid)}")
    return out


# --- cached per-user planning context ----------------------------------------

class UserInstance:
    """One user's location-time workflow with cached candidate QoS.

    Precomputes, per function occurrence: the realizing candidate set, each
    candidate's raw QoS at the entry's cell, its total normalized QoS within
    that candidate set, and envelope extrema for whole-LTW normalization.
    Within one entry, occurrence indices equal preorder positions, so all
    tables are plain lists indexed [entry][occurrence].
    """

    def __init__(self, user: MobileUser, ltw: LTW, directory: ServiceDirectory,
                 profiles: ProfileSet, grid: LocationMap):
        self.user = user
        self.ltw = ltw
        self.directory = directory
        self.profiles = profiles
        self.grid = grid
        self.clouds = directory.clouds
        self.occs: list[list[Occurrence]] = []
        self.cands: list[list[list[int]]] = []
        self.base: list[list[dict[int, QoSTriple]]] = []
        self.snorm: list[list[dict[int, float]]] = []
        env_tables: list[dict[int, QoSExtrema]] = []
        for entry in ltw.entries:
            occs = occurrences(entry.workflow)
            e_cands: list[list[int]] = []
            e_base: list[dict[int, QoSTriple]] = []
            e_snorm: list[dict[int, float]] = []
            env: dict[int, QoSExtrema] = {}
            for occ in occs:
                ids = candidate_services(occ.fn.function_id, user, directory)
                qos = {}
                for sid in ids:
                    svc = directory.service(sid)
                    ctx = invocation_context(svc, entry.cell_id, occ.fn.input_kb,
                                             grid, self.clouds)
                    qos[sid] = service_qos(ctx, profiles)
                lo = hi = next(iter(qos.values()))
                for t in qos.values():
                    lo, hi = lo.emin(t), hi.emax(t)
                ext = QoSExtrema(lo=lo, hi=hi)
                e_cands.append(ids)
                e_base.append(qos)
                e_snorm.append({sid: normalize_service(t, ext)[1]
                                for sid, t in qos.items()})
                env[occ.index] = self._hop_envelope(occ, qos, e_cands, ext)
            self.occs.append(occs)
            self.cands.append(e_cands)
            self.base.append(e_base)
            self.snorm.append(e_snorm)
            env_tables.append(env)
        self.extrema = ltw_extrema(ltw, env_tables)
        self._center: Optional[tuple[float, float]] = None

    def _hop_envelope(self, occ: Occurrence, qos: dict[int, QoSTriple],
                      e_cands: list[list[int]], ext: QoSExtrema) -> QoSExtrema:
        """Occurrence envelope widened by the possible inter-cloud hop delay
        given the predecessor occurrence's candidates."""
        if occ.prev is None:
            return ext
        prev_nodes = {self.directory.host_cloud(s) for s in e_cands[occ.prev]}
        hop = self.profiles.intercloud.delay_ms_per_100kb * occ.fn.input_kb / 100.0
        lo_extra, hi_extra = math.inf, 0.0
        for sid in qos:
            node = self.directory.host_cloud(sid)
            possible = {0.0 if (node is None or p is None or p == node) else hop
                        for p in prev_nodes}
            lo_extra = min(lo_extra, min(possible))
            hi_extra = max(hi_extra, max(possible))
        return QoSExtrema(
            lo=QoSTriple(ext.lo.price, ext.lo.power, ext.lo.delay + lo_extra),
            hi=QoSTriple(ext.hi.price, ext.hi.power, ext.hi.delay + hi_extra))

    def center_point(self) -> tuple[float, float]:
        """Center of mobility of this user's trajectory, in meters."""
        if self._center is None:
            cell = center_of_mobility(self.user.trajectory, self.grid)
            self._center = self.grid.cell(cell).center
        return self._center

    def _hop_delay(self, sid: int, prev_sid: Optional[int], kb: float) -> float:
        if prev_sid is None:
            return 0.0
        node = self.directory.host_cloud(sid)
        prev_node = self.directory.host_cloud(prev_sid)
        if node is None or prev_node is None or node == prev_node:
            return 0.0
        return self.profiles.intercloud.delay_ms_per_100kb * kb / 100.0

    def evaluate(self, plan: ExecutionPlan) -> QoSTriple:
        """Raw LTW QoS of a plan, inter-cloud hops included."""

        def cost(entry_idx, sid, occ_idx, fn, prev_sid):
            q = self.base[entry_idx][occ_idx][sid]
            hop = self._hop_delay(sid, prev_sid, fn.input_kb)
            if hop:
                q = QoSTriple(q.price, q.power, q.delay + hop)
            return q

        return ltw_qos(self.ltw, plan, cost)

    def normalized(self, plan: ExecutionPlan) -> QoSTriple:
        return normalize_ltw_qos(self.evaluate(plan), self.extrema)

    def utility(self, plan: ExecutionPlan) -> float:
        """Worst normalized dimension of the plan's LTW QoS, in [0, 1]."""
        return min(self.normalized(plan).as_tuple())

    def plan_clouds(self, plan: ExecutionPlan) -> set[int]:
        """Capacity-relevant (local) cloud ids the plan places work on."""
        out = set()
        for sid in plan.services():
            node = self.directory.host_cloud(sid)
            if node is not None and self.clouds[node].tier == LOCAL:
                out.add(node)
        return out

    def iter_occurrences(self):
        """Yields (entry_idx, occurrence, candidate_ids) over the LTW."""
        for e, occs in enumerate(self.occs):
            for occ in occs:
                yield e, occ, self.cands[e][occ.index]


class GroupInstance:
    """A user group planned jointly around its center of mobility."""

    def __init__(self, group: UserGroup, members: Sequence[UserInstance],
                 grid: LocationMap):
        if not members:
            raise InvalidGroup(f"group {group.id} has no member instances")
        self.group = group
        self.members = list(members)
        self.grid = grid
        users = {m.user.id: m.user for m in members}
        self._center_vec, self._center_cell = center_of_group_mobility(
            group, users, grid)

    def center_point(self) -> tuple[float, float]:
        return (float(self._center_vec[0]), float(self._center_vec[1]))

    def utility(self, plans: Mapping[int, ExecutionPlan]) -> float:
        return utility_group([m.normalized(plans[m.user.id])
                              for m in self.members])


# --- candidate search ---------------------------------------------------------

def find_service(instance: UserInstance, center: tuple[float, float],
                 constraints: ConstraintVector, params: AnnealingParams,
                 rng: np.random.Generator,
                 availability: Optional[AvailabilityFn] = None) -> ExecutionPlan:
    """Assemble one candidate plan around a center point.

    Widens the search radius in steps (radius_start_m + i * radius_step_m,
    i < max_expansions). On-device services are always in reach and public
    ones at any radius; local-cloud services must fall inside the radius and
    pass the availability filter. At the first radius where every occurrence
    has a candidate and the optimistic per-dimension minima fit the budgets,
    a plan is drawn by roulette over total normalized QoS. If the drawn plan
    busts a budget, one deterministic repair per violated dimension (the
    per-occurrence minimum of that dimension) is tried before widening.

    Raises NoFeasibleCandidates when every radius fails.
    """
    ok = availability or (lambda sid: True)
    directory = instance.directory

    def reachable(radius: float) -> Optional[list[list[list[int]]]]:
        near: dict[str, set[int]] = {}
        allowed: list[list[list[int]]] = []
        for e, occs in enumerate(instance.occs):
            row: list[list[int]] = []
            for occ in occs:
                fn = occ.fn.function_id
                if fn not in near:
                    near[fn] = set(directory.range_query(center, radius, fn))
                ids = []
                for sid in instance.cands[e][occ.index]:
                    svc = directory.service(sid)
                    if svc.on_device:
                        ids.append(sid)
                    elif instance.clouds[svc.host_cloud].tier == LOCAL:
                        if sid in near[fn] and ok(sid):
                            ids.append(sid)
                    elif ok(sid):
                        ids.append(sid)
                if not ids:
                    return None
                row.append(ids)
            allowed.append(row)
        return allowed

    def optimistic_fit(allowed) -> bool:
        if not constraints.bounded():
            return True
        lo = ZERO_QOS
        for e, entry in enumerate(instance.ltw.entries):
            table = {}
            for occ in instance.occs[e]:
                best = None
                for sid in allowed[e][occ.index]:
                    t = instance.base[e][occ.index][sid]
                    best = t if best is None else best.emin(t)
                table[occ.index] = QoSExtrema(lo=best, hi=best)
            lo = lo + workflow_extrema(entry.workflow, table).lo
        return all(lo.get(d) <= constraints.get(d) for d in DIMS)

    def within_budget(plan: ExecutionPlan) -> bool:
        raw = instance.evaluate(plan)
        return all(raw.get(d) <= constraints.get(d) for d in DIMS)

    def repair(allowed, dim: str) -> ExecutionPlan:
        plan = ExecutionPlan()
        for e, occs in enumerate(instance.occs):
            for occ in occs:
                best = min(allowed[e][occ.index],
                           key=lambda s: (instance.base[e][occ.index][s].get(dim), s))
                plan.assignments[(e, occ.index)] = best
        return plan

    for i in range(params.max_expansions):
        radius = params.radius_start_m + i * params.radius_step_m
        allowed = reachable(radius)
        if allowed is None or not optimistic_fit(allowed):
            continue
        plan = ExecutionPlan()
        for e, occs in enumerate(instance.occs):
            for occ in occs:
                pairs = [(sid, instance.snorm[e][occ.index][sid])
                         for sid in allowed[e][occ.index]]
                plan.assignments[(e, occ.index)] = roulette_pick(pairs, rng)
        if within_budget(plan):
            return plan
        raw = instance.evaluate(plan)
        for dim in DIMS:
            if raw.get(dim) > constraints.get(dim):
                fixed = repair(allowed, dim)
                if within_budget(fixed):
                    return fixed
    raise NoFeasibleCandidates(
        f"user {instance.user.id}: no feasible plan within "
        f"{params.max_expansions} radius expansions")


# --- annealed allocation --------------------------------------------------------

def music(target, constraints, params: AnnealingParams,
          rng: np.random.Generator,
          availability: Optional[AvailabilityFn] = None,
          ledger: Optional[CapacityLedger] = None) -> AllocationResult:
    """Annealed plan search for one user or one group.

    Draws proposals via find_service around the target's center of mobility
    and walks them under Metropolis acceptance with a geometric temperature
    schedule, returning the best plan seen. For a GroupInstance one proposal
    re-plans every member and the objective is the group mean utility;
    members of one proposal see each other's tentative capacity usage on top
    of the shared ledger.
    """
    single = isinstance(target, UserInstance)
    members = [target] if single else target.members
    center = target.center_point()
    shared_cv = constraints if isinstance(constraints, ConstraintVector) else None

    def propose() -> Optional[dict[int, ExecutionPlan]]:
        usage: dict[int, int] = {}

        def avail(sid: int) -> bool:
            if availability is not None and not availability(sid):
                return False
            if ledger is None:
                return True
            node = members[0].directory.host_cloud(sid)
            if node is None or not ledger.tracked(node):
                return True
            return (ledger.capacity(node) - ledger.count(node)
                    - usage.get(node, 0)) > 0

        plans: dict[int, ExecutionPlan] = {}
        for m in members:
            try:
                plan = find_service(m, center, constraints_for(constraints, m.user.id),
                                    params, rng, avail)
            except NoFeasibleCandidates:
                return None
            plans[m.user.id] = plan
            for cid in m.plan_clouds(plan):
                usage[cid] = usage.get(cid, 0) + 1
        if not single and shared_cv is not None and shared_cv.bounded():
            raws = [m.evaluate(plans[m.user.id]) for m in members]
            if check_constraints(raws, shared_cv):
                return None
        return plans

    def objective(plans: Mapping[int, ExecutionPlan]) -> float:
        if single:
            return target.utility(plans[target.user.id])
        return target.utility(plans)

    best_plans = cur_plans = None
    best_val = cur_val = -math.inf
    iterations = 0
    for j in range(params.max_iter + 1):
        plans = propose()
        iterations += 1
        if plans is None:
            continue
        val = objective(plans)
        if cur_plans is None:
            accept = True
        elif val > cur_val or params.acceptance == "always":
            accept = True
        else:
            accept = rng.random() < math.exp((val - cur_val)
                                             / params.temperature(j))
        if accept:
            cur_plans, cur_val = plans, val
            if val > best_val:
                best_plans, best_val = plans, val
    if best_plans is None:
        return AllocationResult({}, 0.0, False, iterations,
                                note="no feasible proposal")
    return AllocationResult(dict(best_plans), best_val, True, iterations)


# --- baseline per-user selectors ----------------------------------------------

def _allowed_candidates(instance: UserInstance,
                        availability: Optional[AvailabilityFn]
                        ) -> list[tuple[int, int, list[int]]]:
    """(entry, occurrence, allowed ids) rows; raises when a set runs empty."""
    ok = availability or (lambda sid: True)
    out = []
    for e, occ, cands in instance.iter_occurrences():
        svc = instance.directory.service
        ids = [sid for sid in cands if svc(sid).on_device or ok(sid)]
        if not ids:
            raise NoFeasibleCandidates(
                f"user {instance.user.id}: no available candidate for "
                f"{occ.fn.function_id!r}")
        out.append((e, occ.index, ids))
    return out


def random_plan(instance: UserInstance, rng: np.random.Generator,
                availability: Optional[AvailabilityFn] = None) -> ExecutionPlan:
    """Uniform random choice per occurrence among available candidates."""
    plan = ExecutionPlan()
    for e, occ_idx, ids in _allowed_candidates(instance, availability):
        plan.assignments[(e, occ_idx)] = ids[int(rng.integers(len(ids)))]
    return plan


def rsa_plan(instance: UserInstance, constraints: ConstraintVector,
             rng: np.random.Generator,
             availability: Optional[AvailabilityFn] = None,
             max_tries: int = 50) -> ExecutionPlan:
    """Random selection with admission: resample until budgets fit.

    Returns the last sample when every try busts a budget; the caller sees
    the violation through its own constraint check.
    """
    plan = random_plan(instance, rng, availability)
    for _ in range(max_tries - 1):
        raw = instance.evaluate(plan)
        if all(raw.get(d) <= constraints.get(d) for d in DIMS):
            break
        plan = random_plan(instance, rng, availability)
    return plan


def greedy_plan(instance: UserInstance,
                availability: Optional[AvailabilityFn] = None) -> ExecutionPlan:
    """Highest total normalized QoS per occurrence, ties to the lowest id."""
    plan = ExecutionPlan()
    for e, occ_idx, ids in _allowed_candidates(instance, availability):
        norms = instance.snorm[e][occ_idx]
        plan.assignments[(e, occ_idx)] = max(ids, key=lambda s: (norms[s], -s))
    return plan


# --- fleet drivers --------------------------------------------------------------

def objective_from_plans(instances: Mapping[int, UserInstance],
                         plans: Mapping[int, ExecutionPlan],
                         groups: Optional[Sequence[UserGroup]] = None) -> float:
    """Fleet objective of concrete plans; users without a plan score 0.

    Ungrouped: mean over users of the worst normalized dimension. Grouped:
    mean over groups of the member mean.
    """
    def user_util(uid: int) -> float:
        if uid not in plans:
            return 0.0
        return instances[uid].utility(plans[uid])

    if groups is None:
        if not instances:
            raise ValueError("objective over no users")
        return float(np.mean([user_util(u) for u in sorted(instances)]))
    if not groups:
        raise InvalidGroup("objective over no groups")
    per_group = [float(np.mean([user_util(u) for u in sorted(g.members)]))
                 for g in groups]
    return float(np.mean(per_group))


def _ledger_availability(directory: ServiceDirectory,
                         ledger: Optional[CapacityLedger]) -> AvailabilityFn:
    def ok(sid: int) -> bool:
        if ledger is None:
            return True
        node = directory.host_cloud(sid)
        return node is None or ledger.has_room(node)
    return ok


def _admit_plan(instance: UserInstance, plan: ExecutionPlan,
                ledger: Optional[CapacityLedger]) -> None:
    if ledger is None:
        return
    for cid in sorted(instance.plan_clouds(plan)):
        if not ledger.try_admit(cid):
            raise RuntimeError(f"cloud {cid} filled up mid-admission")


def _compose_availability(base: Optional[AvailabilityFn],
                          room: AvailabilityFn) -> AvailabilityFn:
    if base is None:
        return room
    return lambda sid: base(sid) and room(sid)


def _sequential(instances: Mapping[int, UserInstance], plan_fn,
                rng: np.random.Generator,
                ledger: Optional[CapacityLedger],
                groups: Optional[Sequence[UserGroup]],
                availability: Optional[AvailabilityFn] = None) -> AllocationResult:
    """Allocate per user in seeded random order, admitting capacity as we go."""
    uids = sorted(instances)
    order = [uids[i] for i in rng.permutation(len(uids))]
    plans: dict[int, ExecutionPlan] = {}
    notes = []
    for uid in order:
        inst = instances[uid]
        avail = _compose_availability(
            availability, _ledger_availability(inst.directory, ledger))
        try:
            plan = plan_fn(inst, avail)
        except NoFeasibleCandidates as exc:
            notes.append(str(exc))
            continue
        plans[uid] = plan
        _admit_plan(inst, plan, ledger)
    utility = objective_from_plans(instances, plans, groups)
    return AllocationResult(plans, utility, len(plans) == len(instances),
                            iterations=len(order), note="; ".join(notes))


def allocate_rsa(instances: Mapping[int, UserInstance],
                 constraints, rng: np.random.Generator,
                 ledger: Optional[CapacityLedger] = None,
                 groups: Optional[Sequence[UserGroup]] = None,
                 availability: Optional[AvailabilityFn] = None) -> AllocationResult:
    """Random-selection baseline over the fleet."""
    return _sequential(
        instances,
        lambda inst, avail: rsa_plan(inst, constraints_for(constraints, inst.user.id),
                                     rng, avail),
        rng, ledger, groups, availability)


def allocate_greedy(instances: Mapping[int, UserInstance],
                    constraints: ConstraintVector, rng: np.random.Generator,
                    ledger: Optional[CapacityLedger] = None,
                    groups: Optional[Sequence[UserGroup]] = None,
                    availability: Optional[AvailabilityFn] = None) -> AllocationResult:
    """Greedy argmax baseline over the fleet (rng orders the users only)."""
    return _sequential(
        instances,
        lambda inst, avail: greedy_plan(inst, avail),
        rng, ledger, groups, availability)


def allocate_music(instances: Mapping[int, UserInstance],
                   constraints, params: AnnealingParams,
                   rng: np.random.Generator,
                   ledger: Optional[CapacityLedger] = None,
                   groups: Optional[Sequence[UserGroup]] = None,
                   grid: Optional[LocationMap] = None,
                   availability: Optional[AvailabilityFn] = None) -> AllocationResult:
    """Annealed allocation over the fleet.

    Without groups each user anneals independently (its own center); with
    groups each group anneals jointly around the group center. Targets are
    processed in seeded random order and admit their capacity before the
    next target plans.
    """
    if groups is None:
        targets = [instances[uid] for uid in sorted(instances)]
    else:
        g = grid or next(iter(instances.values())).grid
        targets = [GroupInstance(grp, [instances[m] for m in sorted(grp.members)], g)
                   for grp in sorted(groups, key=lambda x: x.id)]
    order = rng.permutation(len(targets))
    plans: dict[int, ExecutionPlan] = {}
    notes = []
    all_feasible = True
    iterations = 0
    for idx in order:
        target = targets[idx]
        res = music(target, constraints, params, rng,
                    availability=availability, ledger=ledger)
        iterations += res.iterations
        if not res.feasible:
            all_feasible = False
            notes.append(res.note)
            continue
        members = [target] if isinstance(target, UserInstance) else target.members
        for m in members:
            plan = res.plans[m.user.id]
            plans[m.user.id] = plan
            _admit_plan(m, plan, ledger)
    utility = objective_from_plans(instances, plans, groups)
    return AllocationResult(plans, utility, all_feasible, iterations,
                            note="; ".join(notes))


# --- exhaustive optimum ----------------------------------------------------------

def _plan_space(instance: UserInstance, cap: int) -> list[ExecutionPlan]:
    keys, pools = [], []
    count = 1
    for e, occ, cands in instance.iter_occurrences():
        keys.append((e, occ.index))
        pools.append(cands)
        count *= len(cands)
        if count > cap:
            raise TooLargeForEnumeration(
                f"user {instance.user.id}: plan space exceeds {cap}")
    out = []
    for combo in itertools.product(*pools):
        plan = ExecutionPlan(dict(zip(keys, combo)))
        out.append(plan)
    return out


def brute_force_optimal(instances: Mapping[int, UserInstance],
                        constraints: ConstraintVector,
                        ledger: Optional[CapacityLedger] = None,
                        groups: Optional[Sequence[UserGroup]] = None,
                        cap: int = 1_000_000) -> AllocationResult:
    """Exact optimum by enumeration, for small instances.

    When budgets are unconstrained and capacity cannot bind, users decompose
    and each is optimized independently (per-user spaces still respect cap).
    Otherwise the joint product space is enumerated, skipping assignments
    that break capacity, and budget means are checked over the fleet (per
    group when groups are given). Raises TooLargeForEnumeration when the
    space to enumerate exceeds cap.
    """
    if not isinstance(constraints, ConstraintVector):
        raise ValueError("exhaustive search takes one shared constraint vector")
    uids = sorted(instances)
    caps_bind = ledger is not None and any(
        cap - ledger.count(cid) < len(uids)
        for cid, cap in ledger.capacities().items())
    if not constraints.bounded() and not caps_bind:
        plans: dict[int, ExecutionPlan] = {}
        examined = 0
        for uid in uids:
            inst = instances[uid]
            space = _plan_space(inst, cap)
            examined += len(space)
            best, best_u = None, -math.inf
            for plan in space:
                u = inst.utility(plan)
                if u > best_u:
                    best, best_u = plan, u
            plans[uid] = best
        utility = objective_from_plans(instances, plans, groups)
        return AllocationResult(plans, utility, True, examined)

    spaces: dict[int, list[tuple[ExecutionPlan, QoSTriple, float, dict[int, int]]]] = {}
    total = 1
    for uid in uids:
        inst = instances[uid]
        rows = []
        for plan in _plan_space(inst, cap):
            raw = inst.evaluate(plan)
            util = inst.utility(plan)
            usage = {cid: 1 for cid in inst.plan_clouds(plan)}
            rows.append((plan, raw, util, usage))
        spaces[uid] = rows
        total *= len(rows)
        if total > cap:
            raise TooLargeForEnumeration(f"joint plan space exceeds {cap}")

    group_index: Optional[dict[int, int]] = None
    if groups is not None:
        group_index = {}
        for gi, g in enumerate(sorted(groups, key=lambda x: x.id)):
            for m in g.members:
                group_index[m] = gi

    def feasible(chosen: Sequence[tuple]) -> bool:
        if ledger is not None:
            usage: dict[int, int] = {}
            for row in chosen:
                for cid, n in row[3].items():
                    usage[cid] = usage.get(cid, 0) + n
            for cid, n in usage.items():
                if ledger.tracked(cid) and n > ledger.capacity(cid):
                    return False
        if constraints.bounded():
            if group_index is None:
                raws = [row[1] for row in chosen]
                if check_constraints(raws, constraints):
                    return False
            else:
                by_group: dict[int, list[QoSTriple]] = {}
                for uid, row in zip(uids, chosen):
                    by_group.setdefault(group_index[uid], []).append(row[1])
                for raws in by_group.values():
                    if check_constraints(raws, constraints):
                        return False
        return True

    def score(chosen: Sequence[tuple]) -> float:
        utils = {uid: row[2] for uid, row in zip(uids, chosen)}
        if groups is None:
            return float(np.mean([utils[u] for u in uids]))
        per_group = [float(np.mean([utils[m] for m in sorted(g.members)]))
                     for g in sorted(groups, key=lambda x: x.id)]
        return float(np.mean(per_group))

    best_combo, best_val = None, -math.inf
    examined = 0
    for chosen in itertools.product(*(spaces[uid] for uid in uids)):
        examined += 1
        if not feasible(chosen):
            continue
        val = score(chosen)
        if val > best_val:
            best_combo, best_val = chosen, val
    if best_combo is None:
        return AllocationResult({}, 0.0, False, examined,
                                note="no feasible joint assignment")
    plans = {uid: row[0] for uid, row in zip(uids, best_combo)}
    return AllocationResult(plans, best_val, True, examined)
