"""Workflows as composition trees and the QoS algebra over them.

A workflow is a tree of Seq / And / Xor / Loop nodes over function leaves.
Each leaf occurrence gets a service assignment; aggregation folds the
per-occurrence QoS triples (price, power, delay) into workflow totals:

    Seq   componentwise sum over children
    And   sum of price and power, max of delay (parallel branches)
    Xor   componentwise max over branches (worst case path)
    Loop  child total scaled by the iteration count

Normalization rescales each dimension into [0, 1] against extrema so that
lower raw cost maps to higher normalized value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import (ExtremaMismatch, IncompletePlan, InvalidGroup,
                     InvalidWorkflow, NoRealizingService)

DIMS = ("price", "power", "delay")


@dataclass(frozen=True)
class QoSTriple:
    """Non-negative (price USD, power mJ, delay ms) vector."""

    price: float
    power: float
    delay: float

    def __post_init__(self):
        for dim in DIMS:
            v = getattr(self, dim)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{dim} must be finite and >= 0, got {v}")

    def __add__(self, other: "QoSTriple") -> "QoSTriple":
        return QoSTriple(self.price + other.price,
                         self.power + other.power,
                         self.delay + other.delay)

    def scale(self, k: float) -> "QoSTriple":
        return QoSTriple(self.price * k, self.power * k, self.delay * k)

    def emax(self, other: "QoSTriple") -> "QoSTriple":
        return QoSTriple(max(self.price, other.price),
                         max(self.power, other.power),
                         max(self.delay, other.delay))

    def emin(self, other: "QoSTriple") -> "QoSTriple":
        return QoSTriple(min(self.price, other.price),
                         min(self.power, other.power),
                         min(self.delay, other.delay))

    def get(self, dim: str) -> float:
        if dim not in DIMS:
            raise KeyError(f"unknown QoS dimension {dim!r}")
        return getattr(self, dim)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.price, self.power, self.delay)

    def total(self) -> float:
        """Euclidean length of the vector."""
        return math.sqrt(self.price ** 2 + self.power ** 2 + self.delay ** 2)


ZERO_QOS = QoSTriple(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class QoSExtrema:
    """Per-dimension [lo, hi] envelope used for normalization."""

    lo: QoSTriple
    hi: QoSTriple

    def __post_init__(self):
        for dim in DIMS:
            if self.lo.get(dim) > self.hi.get(dim):
                raise ValueError(f"extrema inverted on {dim}")


# --- workflow tree -----------------------------------------------------------

@dataclass(frozen=True)
class FunctionNode:
    """A function invocation moving input_kb of data."""

    function_id: str
    input_kb: float

    def __post_init__(self):
        if not self.function_id:
            raise InvalidWorkflow("function id must be non-empty")
        if self.input_kb <= 0:
            raise InvalidWorkflow(f"data size must be positive, got {self.input_kb}")


class WorkflowNode:
    """Base marker for workflow tree nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Leaf(WorkflowNode):
    fn: FunctionNode


@dataclass(frozen=True)
class Seq(WorkflowNode):
    children: tuple[WorkflowNode, ...]

    def __post_init__(self):
        if not self.children:
            raise InvalidWorkflow("Seq needs at least one child")


@dataclass(frozen=True)
class And(WorkflowNode):
    children: tuple[WorkflowNode, ...]

    def __post_init__(self):
        if not self.children:
            raise InvalidWorkflow("And needs at least one child")


@dataclass(frozen=True)
class Xor(WorkflowNode):
    children: tuple[WorkflowNode, ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise InvalidWorkflow("Xor needs at least two branches")


@dataclass(frozen=True)
class Loop(WorkflowNode):
    child: WorkflowNode
    count: int

    def __post_init__(self):
        if not isinstance(self.count, int) or self.count < 1:
            raise InvalidWorkflow(f"loop count must be an int >= 1, got {self.count}")


def seq(*children: WorkflowNode) -> Seq:
    return Seq(tuple(children))


def par(*children: WorkflowNode) -> And:
    return And(tuple(children))


def xor(*children: WorkflowNode) -> Xor:
    return Xor(tuple(children))


def leaf(function_id: str, input_kb: float) -> Leaf:
    return Leaf(FunctionNode(function_id, input_kb))


@dataclass(frozen=True)
class Occurrence:
    """One leaf position in a workflow: preorder index, its function, and the
    occurrence index of the preceding leaf in its Seq chain (None when the
    data arrives from the user or across an And/Xor boundary)."""

    index: int
    fn: FunctionNode
    prev: Optional[int]


def occurrences(node: WorkflowNode) -> list[Occurrence]:
    """Leaf occurrences in preorder with their Seq predecessors.

    Predecessor threading mirrors aggregate_qos: Seq hands the exit of each
    child to the next, And/Xor fan the incoming predecessor out to every
    branch and expose no exit, Loop passes through its child's exit.
    """
    out: list[Occurrence] = []

    def walk(n: WorkflowNode, idx: int, prev: Optional[int]) -> tuple[int, Optional[int]]:
        if isinstance(n, Leaf):
            out.append(Occurrence(idx, n.fn, prev))
            return idx + 1, idx
        if isinstance(n, Seq):
            cur = prev
            for child in n.children:
                idx, cur = walk(child, idx, cur)
            return idx, cur
        if isinstance(n, (And, Xor)):
            for child in n.children:
                idx, _ = walk(child, idx, prev)
            return idx, None
        if isinstance(n, Loop):
            return walk(n.child, idx, prev)
        raise InvalidWorkflow(f"unknown node type {type(n).__name__}")

    walk(node, 0, None)
    return out


CostFn = Callable[[int, int, FunctionNode, Optional[int]], QoSTriple]


def aggregate_qos(node: WorkflowNode, plan: Mapping[int, int], cost_fn: CostFn) -> QoSTriple:
    """Fold per-occurrence QoS into the workflow total.

    plan maps leaf occurrence index (preorder) to a service id. cost_fn is
    called as cost_fn(service_id, occurrence_index, function, prev_service_id)
    where prev_service_id is the assignment of the preceding leaf in the same
    Seq chain, or None.
    """

    def walk(n: WorkflowNode, idx: int, prev: Optional[int]
             ) -> tuple[QoSTriple, int, Optional[int]]:
        if isinstance(n, Leaf):
            if idx not in plan:
                raise IncompletePlan(f"no assignment for occurrence {idx} "
                                     f"({n.fn.function_id})")
            sid = plan[idx]
            q = cost_fn(sid, idx, n.fn, prev)
            return q, idx + 1, sid
        if isinstance(n, Seq):
            total, cur = ZERO_QOS, prev
            for child in n.children:
                q, idx, cur = walk(child, idx, cur)
                total = total + q
            return total, idx, cur
        if isinstance(n, And):
            price = power = delay = 0.0
            for child in n.children:
                q, idx, _ = walk(child, idx, prev)
                price += q.price
                power += q.power
                delay = max(delay, q.delay)
            return QoSTriple(price, power, delay), idx, None
        if isinstance(n, Xor):
            worst = ZERO_QOS
            for child in n.children:
                q, idx, _ = walk(child, idx, prev)
                worst = worst.emax(q)
            return worst, idx, None
        if isinstance(n, Loop):
            q, idx, ex = walk(n.child, idx, prev)
            return q.scale(n.count), idx, ex
        raise InvalidWorkflow(f"unknown node type {type(n).__name__}")

    total, _, _ = walk(node, 0, None)
    return total


# --- location-time workflows -------------------------------------------------

@dataclass(frozen=True)
class LTWEntry:
    """A workflow requested at a grid cell during a time window."""

    cell_id: int
    window_s: float
    workflow: WorkflowNode
    template: Optional[str] = None

    def __post_init__(self):
        if self.window_s <= 0:
            raise InvalidWorkflow(f"time window must be positive, got {self.window_s}")


@dataclass(frozen=True)
class LTW:
    """Location-time workflow: the requests one user issues along its path."""

    entries: tuple[LTWEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise InvalidWorkflow("location-time workflow has no entries")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class ExecutionPlan:
    """Service assignments keyed by (entry index, occurrence index)."""

    assignments: dict[tuple[int, int], int] = field(default_factory=dict)

    def for_entry(self, entry_idx: int) -> dict[int, int]:
        return {occ: sid for (e, occ), sid in self.assignments.items()
                if e == entry_idx}

    def services(self) -> set[int]:
        return set(self.assignments.values())


EntryCostFn = Callable[[int, int, int, FunctionNode, Optional[int]], QoSTriple]


def ltw_qos(ltw: LTW, plan: ExecutionPlan, cost_fn: EntryCostFn) -> QoSTriple:
    """Sum of entry workflow totals. cost_fn takes (entry_index, service_id,
    occurrence_index, function, prev_service_id)."""
    total = ZERO_QOS
    for i, entry in enumerate(ltw.entries):
        sub = plan.for_entry(i)
        total = total + aggregate_qos(
            entry.workflow, sub,
            lambda sid, occ, fn, prev, _i=i: cost_fn(_i, sid, occ, fn, prev))
    return total


def group_qos(member_totals: Iterable[QoSTriple]) -> QoSTriple:
    """Componentwise sum of the members' LTW totals."""
    totals = list(member_totals)
    if not totals:
        raise InvalidGroup("group QoS over no members")
    out = ZERO_QOS
    for t in totals:
        out = out + t
    return out


# --- normalization -----------------------------------------------------------

def _normalize_dim(value: float, lo: float, hi: float, what: str) -> float:
    rng = hi - lo
    if rng == 0:
        return 1.0
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    if value < lo - slack or value > hi + slack:
        raise ExtremaMismatch(f"{what}={value} outside [{lo}, {hi}]")
    return min(1.0, max(0.0, (hi - value) / rng))


def normalize_qos(raw: QoSTriple, extrema: QoSExtrema) -> QoSTriple:
    """Map raw QoS into [0, 1] per dimension, higher meaning better."""
    return QoSTriple(*(_normalize_dim(raw.get(d), extrema.lo.get(d),
                                      extrema.hi.get(d), d) for d in DIMS))


def normalize_service(raw: QoSTriple, extrema: QoSExtrema) -> tuple[QoSTriple, float]:
    """Normalized per-dimension QoS of one service and its total length.

    The total is the Euclidean norm of the normalized vector, in [0, sqrt(3)].
    """
    n = normalize_qos(raw, extrema)
    return n, n.total()


def normalize_workflow_qos(raw: QoSTriple, extrema: QoSExtrema) -> QoSTriple:
    """Normalize a workflow aggregate against its plan-space extrema."""
    return normalize_qos(raw, extrema)


def normalize_ltw_qos(raw: QoSTriple, extrema: QoSExtrema) -> QoSTriple:
    """Normalize a location-time workflow total against its extrema."""
    return normalize_qos(raw, extrema)


# --- extrema through the algebra ---------------------------------------------

def workflow_extrema(node: WorkflowNode,
                     per_occurrence: Mapping[int, QoSExtrema]) -> QoSExtrema:
    """Aggregate per-occurrence envelopes into workflow-level extrema.

    Every aggregation rule is monotone in each dimension, so folding the hi
    (resp. lo) triples through the tree yields the per-dimension max (resp.
    min) any plan can reach.
    """
    occs = occurrences(node)
    dummy = {o.index: -1 for o in occs}
    hi = aggregate_qos(node, dummy,
                       lambda sid, occ, fn, prev: per_occurrence[occ].hi)
    lo = aggregate_qos(node, dummy,
                       lambda sid, occ, fn, prev: per_occurrence[occ].lo)
    return QoSExtrema(lo=lo, hi=hi)


def ltw_extrema(ltw: LTW,
                per_entry_occurrence: Sequence[Mapping[int, QoSExtrema]]) -> QoSExtrema:
    """Sum the per-entry workflow extrema over a location-time workflow."""
    if len(per_entry_occurrence) != len(ltw.entries):
        raise ValueError("one occurrence-extrema table required per entry")
    lo, hi = ZERO_QOS, ZERO_QOS
    for entry, table in zip(ltw.entries, per_entry_occurrence):
        ext = workflow_extrema(entry.workflow, table)
        lo = lo + ext.lo
        hi = hi + ext.hi
    return QoSExtrema(lo=lo, hi=hi)


def candidate_services(function_id: str, user, directory) -> list[int]:
    """Ids of all services realizing a function for this user: the user's
    own on-device services plus every cloud-hosted instance in the registry.

    Raises NoRealizingService when the union is empty.
    """
    ids = set(directory.cloud_services_for(function_id))
    ids.update(directory.device_services_for(user.id, function_id))
    if not ids:
        raise NoRealizingService(f"no service realizes {function_id!r}")
    return sorted(ids)
