"""CSV intake and summary statistics for sweep results.

This package is a pure consumer of the experiment CSV: it never simulates
anything and never imports the simulator.  The schema below is the versioned
contract; any header mismatch is an error.  The statistics replicate the
harness formulas exactly (sample standard deviation, mean +/- 1.96*s/sqrt(n))
so recomputed values agree with the harness report to floating-point noise.
"""

from __future__ import annotations

import csv
import math

CSV_FIELDS = ("instance_id", "seed", "side", "k", "psi", "ratio", "policy",
              "view_mode", "total_cost", "exploration_cost", "cluster_cost",
              "rounds", "steps", "mean_clusters_per_round",
              "planner_time_ms", "completed")

_INT_FIELDS = ("seed", "side", "k", "psi", "total_cost", "exploration_cost",
               "cluster_cost", "rounds", "steps")


class SchemaError(ValueError):
    pass


class EmptySelectionError(ValueError):
    pass


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        raw = list(csv.reader(fh))
    if not raw:
        raise SchemaError(f"{path}: empty CSV")
    header = tuple(raw[0])
    if header != CSV_FIELDS:
        raise SchemaError(f"{path}: header does not match the versioned "
                          f"schema; got {header}")
    rows = []
    for rec in raw[1:]:
        d = dict(zip(header, rec))
        for f in _INT_FIELDS:
            d[f] = int(d[f])
        d["mean_clusters_per_round"] = float(d["mean_clusters_per_round"])
        d["planner_time_ms"] = float(d["planner_time_ms"])
        d["completed"] = bool(int(d["completed"]))
        rows.append(d)
    return rows


def select(rows: list[dict], side=None, ratio=None, view_mode=None,
           policies=None) -> list[dict]:
    out = [r for r in rows
           if (side is None or r["side"] == side)
           and (ratio is None or r["ratio"] == ratio)
           and (view_mode is None or r["view_mode"] == view_mode)
           and (policies is None or r["policy"] in policies)]
    if not out:
        raise EmptySelectionError(
            f"no rows match side={side} ratio={ratio} view={view_mode} "
            f"policies={policies}")
    return out


def summarize(rows: list[dict], keys: tuple[str, ...], value: str = "total_cost"
              ) -> dict[tuple, dict]:
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


def log2_star(n: float) -> int:
    if n <= 0:
        raise ValueError("log2_star needs a positive argument")
    count = 0
    while n > 1:
        n = math.log2(n)
        count += 1
    return count


def critical_radius(rows: list[dict], low: str = "dmar", high: str = "bp"
                    ) -> dict[int, int | None]:
    """Smallest tested k where the low-policy mean beats the high-policy mean
    there and at every larger tested k; None when the curves never cross."""
    out: dict[int, int | None] = {}
    for side in sorted({r["side"] for r in rows}):
        sub = [r for r in rows if r["side"] == side]
        ks = sorted({r["k"] for r in sub})
        means = {}
        for pol in (low, high):
            arm = summarize([r for r in sub if r["policy"] == pol], ("k",))
            means[pol] = {g[0]: s["mean"] for g, s in arm.items()}
        kstar = None
        for k in reversed(ks):
            if k not in means[low] or k not in means[high]:
                raise EmptySelectionError(f"side {side}: k={k} missing an arm")
            if means[low][k] < means[high][k]:
                kstar = k
            else:
                break
        out[side] = kstar
    return out
