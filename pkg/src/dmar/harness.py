"""Batch experiment driver: sweeps over (grid side, k, ratio, policy, view
mode), CSV emission, summary statistics, and critical-radius estimation.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .engine import RunRecord, run_episode
from .grid import ViewMode
from .instances import generate
from .rng import derive_seed
from .schedule import LambdaMode, Policy, ProtocolParams

OBSTACLE_FRAC = 0.2
RATIO_TASKS = {"1:2": lambda side: 2 * side, "1:1": lambda side: side,
               "2:1": lambda side: max(1, side // 2)}


def log2_star(n: float) -> int:
    """Iterated base-2 logarithm: 0 for n <= 1, else 1 + log2*(log2(n))."""
    if n <= 0:
        raise ValueError("log2_star needs a positive argument")
    count = 0
    while n > 1:
        n = math.log2(n)
        count += 1
    return count


@dataclass
class SweepSpec:
    sides: list[int]
    ks: list[int]
    ratios: list[str] = field(default_factory=lambda: ["1:1"])
    policies: list[Policy] = field(default_factory=lambda: [Policy.DMAR, Policy.BP])
    view_modes: list[ViewMode] = field(default_factory=lambda: [ViewMode.HOP])
    instances_per_cell: int = 10
    runs_per_instance: int = 10
    master_seed: int = 0
    psi: int = 8
    c: int = 4
    lambda_mode: LambdaMode = LambdaMode.DEFAULT
    lambda_override: int | None = None
    max_rounds: int = 2000

    def __post_init__(self):
        if not (self.sides and self.ks and self.ratios and self.policies
                and self.view_modes):
            raise ValueError("sweep axes must be nonempty")
        if self.runs_per_instance < 1 or self.instances_per_cell < 1:
            raise ValueError("counts must be >= 1")
        for r in self.ratios:
            if r not in RATIO_TASKS:
                raise ValueError(f"unknown ratio {r!r}; expected one of {sorted(RATIO_TASKS)}")


def _cells(spec: SweepSpec):
    for side in spec.sides:
        for k in spec.ks:
            for ratio in spec.ratios:
                for view in spec.view_modes:
                    for policy in spec.policies:
                        for i_idx in range(spec.instances_per_cell):
                            for r_idx in range(spec.runs_per_instance):
                                yield (side, k, ratio, view, policy, i_idx, r_idx)


def run_cell(args) -> RunRecord:
    spec, side, k, ratio, view, policy, i_idx, r_idx = args
    # One sub-seed per (cell, instance, run); policy and view mode are
    # excluded from the derivation so paired arms (DMAR/BP, the GCI pair,
    # hop vs reduced) share the instance and the random stream.
    sub_seed = derive_seed(spec.master_seed, side, k, ratio, i_idx, r_idx)
    instance_seed = derive_seed(sub_seed, "instance")
    run_seed = derive_seed(sub_seed, "run")
    inst = generate(side, OBSTACLE_FRAC, n_agents=side,
                    n_tasks=RATIO_TASKS[ratio](side), seed=instance_seed,
                    ratio=ratio)
    params = ProtocolParams(k=k, psi=spec.psi, c=spec.c, view_mode=view,
                            lambda_mode=spec.lambda_mode,
                            lambda_override=spec.lambda_override,
                            policy=policy, master_seed=run_seed)
    record, _ = run_episode(inst, params, max_rounds=spec.max_rounds,
                            instance_id=f"s{side}-k{k}-{ratio}-i{i_idx}")
    return record


def sweep(spec: SweepSpec, jobs: int = 1) -> list[RunRecord]:
    """Cartesian product of the sweep axes, in deterministic row order.

    Cells are independent; with jobs > 1 they run in worker processes but
    results are assembled in the same order regardless.
    """
    cells = [(spec,) + c for c in _cells(spec)]
    if jobs <= 1:
        return [run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_cell, cells, chunksize=4))


def write_csv(records: list[RunRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RunRecord.CSV_FIELDS)
    for r in records:
        w.writerow(r.csv_row())


def records_to_csv(records: list[RunRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


class SchemaError(ValueError):
    pass


def read_csv(fh) -> list[dict]:
    rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("empty CSV")
    header = tuple(rows[0])
    if header != RunRecord.CSV_FIELDS:
        raise SchemaError(f"CSV header {header} does not match the "
                          f"versioned schema {RunRecord.CSV_FIELDS}")
    out = []
    for raw in rows[1:]:
        d = dict(zip(header, raw))
        for f in ("seed", "side", "k", "psi", "total_cost", "exploration_cost",
                  "cluster_cost", "rounds", "steps"):
            d[f] = int(d[f])
        d["mean_clusters_per_round"] = float(d["mean_clusters_per_round"])
        d["planner_time_ms"] = float(d["planner_time_ms"])
        d["completed"] = bool(int(d["completed"]))
        out.append(d)
    return out


def summarize(rows: list[dict], keys: tuple[str, ...], value: str = "total_cost"
              ) -> dict[tuple, dict]:
    """Per-group mean and normal-approximation 95% confidence half-width
    (1.96 * s / sqrt(n), sample std); singleton groups get a null interval."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(float(r[value]))
    out = {}
    for g, vals in sorted(groups.items()):
        n = len(vals)
        mean = sum(vals) / n
        if n > 1:
            var = sum((v - mean) ** 2 for v in vals) / (n - 1)
            ci = 1.96 * math.sqrt(var) / math.sqrt(n)
        else:
            ci = None
        out[g] = {"n": n, "mean": mean, "ci95": ci}
    return out


def critical_radius(rows: list[dict]) -> dict[int, int | None]:
    """Per grid side: the smallest tested k such that mean DMAR cost beats
    mean BP cost there and at every larger tested k; None when no crossing.
    """
    sides = sorted({r["side"] for r in rows})
    out: dict[int, int | None] = {}
    for side in sides:
        sub = [r for r in rows if r["side"] == side]
        ks = sorted({r["k"] for r in sub})
        means: dict[str, dict[int, float]] = {}
        for pol in ("dmar", "bp"):
            arm = summarize([r for r in sub if r["policy"] == pol], ("k",))
            means[pol] = {g[0]: s["mean"] for g, s in arm.items()}
        if not means["dmar"] or not means["bp"]:
            raise ValueError(f"side {side}: need both dmar and bp rows for k*")
        kstar = None
        for k in reversed(ks):
            if k not in means["dmar"] or k not in means["bp"]:
                raise ValueError(f"side {side}: k={k} missing a policy arm")
            if means["dmar"][k] < means["bp"][k]:
                kstar = k
            else:
                break
        out[side] = kstar
    return out


def report(rows: list[dict]) -> dict:
    """Summary tables consumed by the CLI and compared against by the plots
    component: per-(side, k, policy) cost and time means with CIs, and the
    critical-radius table."""
    cost = summarize(rows, ("side", "k", "policy"), "total_cost")
    timing = summarize(rows, ("side", "k", "policy"), "planner_time_ms")
    clusters = summarize(rows, ("side", "k", "policy"), "mean_clusters_per_round")
    exploration = summarize(rows, ("side", "k", "policy"), "exploration_cost")
    try:
        kstar = critical_radius(rows)
    except ValueError:
        kstar = {}
    return {
        "cost": {",".join(map(str, g)): s for g, s in cost.items()},
        "planner_time_ms": {",".join(map(str, g)): s for g, s in timing.items()},
        "clusters": {",".join(map(str, g)): s for g, s in clusters.items()},
        "exploration_cost": {",".join(map(str, g)): s for g, s in exploration.items()},
        "critical_radius": {str(side): k for side, k in kstar.items()},
        "log2_star": {str(s): log2_star(s * s) for s in sorted({r["side"] for r in rows})},
    }
