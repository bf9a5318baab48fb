"""Scenario schema, workflow templates, and seeded world generation.

A scenario file is flat JSON whose keys mirror the Scenario dataclass. The
deployment (grid, clouds, service catalog, cost tables) is generated once
per scenario from the master seed; the population (trajectories, requested
workflows, groups) is regenerated per repetition from derived seed streams,
so every run is reproducible and independent of which algorithms execute.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .allocation import AnnealingParams, ConstraintVector
from .errors import ScenarioError
from .mobility import (BOTH, LOCATION, MANHATTAN, RANDOM_WAYPOINT, SERVICE,
                       MobilityParams, UncertaintySpec, generate_trajectory,
                       inject_uncertainty)
from .model import (LOCAL, PUBLIC, CloudNode, LocationMap, MobileUser,
                    Service, Trajectory, UserGroup)
from .profiles import (BILL_COMPUTE, BILL_STORAGE, BILL_STREAMING,
                       ComputeProfile, ProfileSet)
from .registry import CapacityLedger, ServiceDirectory
from .workflow import (LTW, LTWEntry, WorkflowNode, leaf, par, seq)

ALGORITHMS = ("music", "gmusic", "rsa", "greedy", "bruteforce", "all")

# master-seed stream tags, so derived streams never collide
_STRUCTURE = 0
_POPULATION = 1
_TRAJ, _TEMPLATE, _UNCERTAINTY = 0, 1, 2


@dataclass(frozen=True)
class WorkflowTemplate:
    """Named workflow shape instantiated with a drawn base data size."""

    name: str
    functions: tuple[str, ...]
    build: Callable[[float], WorkflowNode]
    kb_min: float = 1024.0
    kb_max: float = 5120.0

    def instantiate(self, rng: np.random.Generator) -> WorkflowNode:
        base = float(rng.uniform(self.kb_min, self.kb_max))
        return self.build(base)


def _text_recognition(base: float) -> WorkflowNode:
    return seq(par(leaf("image-filter", base), leaf("noise-cancel", base)),
               leaf("ocr", 0.6 * base),
               leaf("text-to-speech", 0.15 * base))


def _video_stream(base: float) -> WorkflowNode:
    return seq(leaf("transcode", base), leaf("stream", 0.8 * base))


def _file_sync(base: float) -> WorkflowNode:
    return seq(leaf("download", base), leaf("edit", 0.5 * base),
               leaf("upload", base))


_TEMPLATE_SHAPES: dict[str, tuple[tuple[str, ...], Callable[[float], WorkflowNode]]] = {
    "text_recognition": (("image-filter", "noise-cancel", "ocr", "text-to-speech"),
                         _text_recognition),
    "video_stream": (("transcode", "stream"), _video_stream),
    "file_sync": (("download", "edit", "upload"), _file_sync),
}

# public-cloud billing class of each function
_FUNCTION_BILLING = {
    "stream": BILL_STREAMING,
    "download": BILL_STORAGE,
    "upload": BILL_STORAGE,
}


def make_templates(names: Sequence[str], kb_min: float,
                   kb_max: float) -> list[WorkflowTemplate]:
    out = []
    for name in names:
        if name not in _TEMPLATE_SHAPES:
            raise ScenarioError(f"template_mix: unknown template {name!r}")
        functions, build = _TEMPLATE_SHAPES[name]
        out.append(WorkflowTemplate(name, functions, build, kb_min, kb_max))
    return out


@dataclass
class Scenario:
    """Complete experiment description; field names are the JSON schema."""

    scenario_id: str = "default"
    grid_width: int = 15
    grid_height: int = 15
    cell_size_m: float = 100.0
    local_clouds: int = 8
    local_capacity: int = 15
    coverage_radius_cells: float = 1.5
    public_instances: int = 2
    users: int = 20
    groups: int = 0
    workflows_per_user: int = 3
    data_kb_min: float = 1024.0
    data_kb_max: float = 5120.0
    device_service_rate: float = 0.5
    local_function_rate: float = 1.0
    compute_jitter: float = 0.4
    template_mix: dict = field(default_factory=lambda: {
        "text_recognition": 0.5, "video_stream": 0.5})
    rwp_fraction: float = 0.5
    duration_s: float = 600.0
    speed_min: float = 1.0
    speed_max: float = 10.0
    pause_max_s: float = 10.0
    uncertainty_pct: float = 0.0
    uncertainty_mode: str = BOTH
    budget_price: Optional[float] = None
    budget_power: Optional[float] = None
    budget_delay: Optional[float] = None
    algorithm: str = "music"
    repetitions: int = 15
    seed: int = 0
    public_only: bool = False
    fixed_dimension: Optional[str] = None
    enumeration_cap: int = 1_000_000
    profiles: dict = field(default_factory=dict)
    annealing: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ScenarioError(f"{name}: {why}")

        if self.grid_width < 1 or self.grid_height < 1:
            bad("grid_width/grid_height", "must be >= 1")
        if self.cell_size_m <= 0:
            bad("cell_size_m", "must be positive")
        if self.local_clouds < 0:
            bad("local_clouds", "must be >= 0")
        if self.local_clouds > self.grid_width * self.grid_height:
            bad("local_clouds", "more clouds than grid cells")
        if self.local_capacity < 0:
            bad("local_capacity", "must be >= 0")
        if self.coverage_radius_cells < 0:
            bad("coverage_radius_cells", "must be >= 0")
        if self.public_instances < 0:
            bad("public_instances", "must be >= 0")
        if self.local_clouds + self.public_instances < 1:
            bad("local_clouds/public_instances", "need at least one cloud")
        if self.users < 1:
            bad("users", "must be >= 1")
        if not 0 <= self.groups <= self.users:
            bad("groups", "must lie in [0, users]")
        if self.workflows_per_user < 1:
            bad("workflows_per_user", "must be >= 1")
        if not 0 < self.data_kb_min <= self.data_kb_max:
            bad("data_kb_min/data_kb_max", "need 0 < min <= max")
        for name in ("device_service_rate", "local_function_rate", "rwp_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                bad(name, "must lie in [0, 1]")
        if not 0.0 <= self.compute_jitter < 1.0:
            bad("compute_jitter", "must lie in [0, 1)")
        if not isinstance(self.template_mix, dict) or not self.template_mix:
            bad("template_mix", "must be a non-empty name -> weight mapping")
        for name, w in self.template_mix.items():
            if name not in _TEMPLATE_SHAPES:
                bad("template_mix", f"unknown template {name!r}")
            if not isinstance(w, (int, float)) or w < 0:
                bad("template_mix", f"weight for {name!r} must be >= 0")
        if sum(self.template_mix.values()) <= 0:
            bad("template_mix", "weights must sum to > 0")
        if self.duration_s <= 0:
            bad("duration_s", "must be positive")
        if not 0 < self.speed_min <= self.speed_max:
            bad("speed_min/speed_max", "need 0 < min <= max")
        if self.pause_max_s < 0:
            bad("pause_max_s", "must be >= 0")
        if not 0.0 <= self.uncertainty_pct <= 100.0:
            bad("uncertainty_pct", "must lie in [0, 100]")
        if self.uncertainty_mode not in (LOCATION, SERVICE, BOTH):
            bad("uncertainty_mode", f"unknown mode {self.uncertainty_mode!r}")
        for name in ("budget_price", "budget_power", "budget_delay"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, (int, float)) or v <= 0):
                bad(name, "must be positive or null")
        if self.algorithm not in ALGORITHMS:
            bad("algorithm", f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "gmusic" and self.groups == 0:
            bad("algorithm", "gmusic needs groups > 0")
        if self.repetitions < 1:
            bad("repetitions", "must be >= 1")
        if not isinstance(self.seed, int):
            bad("seed", "must be an integer")
        if self.fixed_dimension is not None and \
                self.fixed_dimension not in ("price", "power", "delay"):
            bad("fixed_dimension", "must be price, power, delay, or null")
        if self.enumeration_cap < 1:
            bad("enumeration_cap", "must be >= 1")
        if not isinstance(self.profiles, dict):
            bad("profiles", "must be a table-override mapping")
        if not isinstance(self.annealing, dict):
            bad("annealing", "must be a parameter mapping")
        known = {"max_iter", "max_expansions", "radius_start_cells",
                 "radius_step_cells", "t0", "alpha", "acceptance"}
        for key in self.annealing:
            if key not in known:
                bad("annealing", f"unknown parameter {key!r}")

    def constraints(self) -> ConstraintVector:
        def v(x):
            return math.inf if x is None else float(x)
        return ConstraintVector(price=v(self.budget_price),
                                power=v(self.budget_power),
                                delay=v(self.budget_delay))

    def annealing_params(self) -> AnnealingParams:
        a = dict(self.annealing)
        start = a.pop("radius_start_cells", 2.0) * self.cell_size_m
        step = a.pop("radius_step_cells", 1.0) * self.cell_size_m
        return AnnealingParams(radius_start_m=start, radius_step_m=step, **a)

    def templates(self) -> list[WorkflowTemplate]:
        return make_templates(sorted(self.template_mix), self.data_kb_min,
                              self.data_kb_max)

    def algorithm_list(self) -> list[str]:
        if self.algorithm != "all":
            return [self.algorithm]
        algs = ["music"]
        if self.groups > 0:
            algs.append("gmusic")
        algs += ["rsa", "greedy", "bruteforce"]
        return algs


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario JSON file.

    Unknown keys and malformed values raise ScenarioError naming the field.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must hold a JSON object")
    names = {f.name for f in fields(Scenario)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ScenarioError(f"unknown field {unknown[0]!r}")
    try:
        return Scenario(**data)
    except TypeError as exc:
        raise ScenarioError(f"bad scenario value: {exc}") from exc


# --- seeded generation -----------------------------------------------------------

def derive_rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


@dataclass
class Deployment:
    """Structures fixed for a scenario across repetitions."""

    grid: LocationMap
    clouds: dict[int, CloudNode]
    directory: ServiceDirectory
    profiles: ProfileSet
    templates: list[WorkflowTemplate]

    def fresh_ledger(self) -> CapacityLedger:
        return CapacityLedger.for_clouds(self.clouds)

    def local_service_ids(self) -> set[int]:
        out = set()
        for sid, svc in self.directory.services.items():
            if svc.host_cloud is not None and \
                    self.clouds[svc.host_cloud].tier == LOCAL:
                out.add(sid)
        return out


def build_deployment(sc: Scenario) -> Deployment:
    """Generate grid, clouds, coverage, catalog, and cost tables."""
    rng = derive_rng(sc.seed, _STRUCTURE)
    n_cells = sc.grid_width * sc.grid_height
    base_grid = LocationMap(sc.grid_width, sc.grid_height, sc.cell_size_m)

    cloud_cells = sorted(int(c) for c in
                         rng.choice(n_cells, size=sc.local_clouds, replace=False))
    clouds: dict[int, CloudNode] = {}
    radius = sc.coverage_radius_cells * sc.cell_size_m
    for i, cell in enumerate(cloud_cells):
        clouds[i] = CloudNode(id=i, tier=LOCAL, location=cell,
                              capacity=sc.local_capacity,
                              coverage_radius_m=radius)
    for j in range(sc.public_instances):
        clouds[sc.local_clouds + j] = CloudNode(id=sc.local_clouds + j, tier=PUBLIC)

    # cells associate with the nearest covering access point (lowest id ties)
    wifi: dict[int, int] = {}
    centers = base_grid.centers()
    for cid in range(n_cells):
        best, best_d = None, math.inf
        for i, cell in enumerate(cloud_cells):
            d = float(np.hypot(*(centers[cid] - centers[cell])))
            if d <= radius + 1e-9 and d < best_d:
                best, best_d = i, d
        if best is not None:
            wifi[cid] = best
    grid = base_grid.with_wifi(wifi)

    profiles = ProfileSet.from_dict(sc.profiles) if sc.profiles \
        else ProfileSet.defaults()
    templates = sc.templates()
    functions = sorted({fn for t in templates for fn in t.functions})
    directory = ServiceDirectory(grid, clouds)

    def jitter() -> float:
        return float(rng.uniform(1.0 - sc.compute_jitter, 1.0 + sc.compute_jitter))

    sid = 0

    def deploy(fn: str, mult: float, *, host_cloud=None, host_user=None,
               base: str) -> None:
        nonlocal sid
        ref = f"svc{sid}"
        tpl = profiles.compute_profile(base)
        profiles.compute[ref] = ComputeProfile(
            delay_ms_per_100kb=tpl.delay_ms_per_100kb * mult,
            energy_mj_per_100kb=tpl.energy_mj_per_100kb * mult,
            billing=_FUNCTION_BILLING.get(fn, BILL_COMPUTE))
        directory.insert(Service(id=sid, function_id=fn, host_cloud=host_cloud,
                                 host_user=host_user, compute_ref=ref))
        sid += 1

    # draws happen for skipped services too, so a public-only deployment of
    # the same scenario keeps identical profiles for the services it shares
    for cid in range(sc.local_clouds):
        for fn in functions:
            hosted = sc.local_function_rate >= 1.0 \
                or rng.random() < sc.local_function_rate
            mult = jitter()
            if hosted and not sc.public_only:
                deploy(fn, mult, host_cloud=cid, base="local")
    for j in range(sc.public_instances):
        for fn in functions:
            deploy(fn, jitter(), host_cloud=sc.local_clouds + j, base="public")
    for uid in range(sc.users):
        for fn in functions:
            owns = rng.random() < sc.device_service_rate
            mult = jitter()
            if owns:
                deploy(fn, mult, host_user=uid, base="device")

    return Deployment(grid=grid, clouds=clouds, directory=directory,
                      profiles=profiles, templates=templates)


@dataclass
class Population:
    """Per-repetition world: users, their true and predicted workflows."""

    users: dict[int, MobileUser]
    true_ltws: dict[int, LTW]
    predicted_ltws: dict[int, LTW]
    groups: Optional[list[UserGroup]]


def _pick_entries(traj: Trajectory, k: int) -> list[int]:
    """Evenly spaced trajectory entry indices (all when fewer than k)."""
    n = len(traj.entries)
    if n <= k:
        return list(range(n))
    return sorted({int(round(x)) for x in np.linspace(0, n - 1, k)})


def build_population(sc: Scenario, dep: Deployment, rep: int) -> Population:
    """Generate trajectories, workflows, and groups for one repetition."""
    templates = dep.templates
    names = sorted(sc.template_mix)
    weights = np.array([sc.template_mix[n] for n in names], dtype=float)
    weights = weights / weights.sum()
    by_name = {t.name: t for t in templates}

    users: dict[int, MobileUser] = {}
    true_ltws: dict[int, LTW] = {}
    predicted: dict[int, LTW] = {}
    n_rwp = int(round(sc.rwp_fraction * sc.users))
    for uid in range(sc.users):
        model = RANDOM_WAYPOINT if uid < n_rwp else MANHATTAN
        params = MobilityParams(model=model, duration_s=sc.duration_s,
                                speed_min=sc.speed_min, speed_max=sc.speed_max,
                                pause_max_s=sc.pause_max_s,
                                seed=derive_seed(sc.seed, _POPULATION, rep, _TRAJ, uid))
        traj = generate_trajectory(params, dep.grid)
        wf_rng = derive_rng(sc.seed, _POPULATION, rep, _TEMPLATE, uid)
        entries = []
        for idx in _pick_entries(traj, sc.workflows_per_user):
            te = traj.entries[idx]
            tpl = by_name[names[int(wf_rng.choice(len(names), p=weights))]]
            entries.append(LTWEntry(cell_id=te.cell_id, window_s=te.dwell_s,
                                    workflow=tpl.instantiate(wf_rng),
                                    template=tpl.name))
        ltw = LTW(tuple(entries))
        device = frozenset(
            s for fn in {f for t in templates for f in t.functions}
            for s in dep.directory.device_services_for(uid, fn))
        users[uid] = MobileUser(id=uid, trajectory=traj, device_services=device)
        true_ltws[uid] = ltw
        if sc.uncertainty_pct > 0:
            spec = UncertaintySpec(rate=sc.uncertainty_pct / 100.0,
                                   mode=sc.uncertainty_mode)
            unc_rng = derive_rng(sc.seed, _POPULATION, rep, _UNCERTAINTY, uid)
            predicted[uid] = inject_uncertainty(ltw, spec, dep.grid,
                                                templates, unc_rng)
        else:
            predicted[uid] = ltw

    groups: Optional[list[UserGroup]] = None
    if sc.groups > 0:
        chunks = np.array_split(np.arange(sc.users), sc.groups)
        groups = [UserGroup(id=g, members=frozenset(int(u) for u in chunk))
                  for g, chunk in enumerate(chunks)]
    return Population(users=users, true_ltws=true_ltws,
                      predicted_ltws=predicted, groups=groups)
