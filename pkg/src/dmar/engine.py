"""Round and episode drivers: phase sequencing with a fixed step budget,
policy dispatch, cost accounting, and deterministic trajectory hashing.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Optional

from .execution import (EmOutcome, broadcast_plans, collision_em, execute_em,
                        gci_augment, _pack_positions)
from .grid import Control, GridWorld, compute_view
from .instances import Instance
from .lma import prune_or_dissolve, run_lma
from .planner import centralized_plan, gci_mar_plan, greedy_plan, mar_plan
from .schedule import Policy, ProtocolParams, Schedule, build_schedule
from .soac import AgentState, Cluster, run_soac


@dataclass
class RoundOutcome:
    round_index: int
    clusters: list[Cluster]
    dissolved: list[int]              # leaders of clusters dissolved after pruning
    unassigned: list[int]
    steps: int
    planner_ms: float
    em: EmOutcome
    solved_before_em: bool
    tokens: frozenset
    start_positions: tuple
    cluster_sequence: tuple           # ((leader, frozenset(members)), ...) for audits


@dataclass
class RunRecord:
    instance_id: str
    seed: int
    side: int
    k: int
    psi: int
    ratio: str
    policy: str
    view_mode: str
    total_cost: int
    exploration_cost: int
    cluster_cost: int
    rounds: int
    steps: int
    mean_clusters_per_round: float
    planner_time_ms: float
    completed: bool
    trajectory_hash: str = ""         # aux: not part of the CSV schema

    CSV_FIELDS = ("instance_id", "seed", "side", "k", "psi", "ratio", "policy",
                  "view_mode", "total_cost", "exploration_cost", "cluster_cost",
                  "rounds", "steps", "mean_clusters_per_round",
                  "planner_time_ms", "completed")

    def csv_row(self) -> list[str]:
        vals = []
        for f in self.CSV_FIELDS:
            v = getattr(self, f)
            if isinstance(v, bool):
                v = int(v)
            elif isinstance(v, float):
                v = repr(v)
            vals.append(str(v))
        return vals

    def semantic_tuple(self) -> tuple:
        """Everything but the wall-clock field, for determinism comparisons."""
        return tuple(getattr(self, f) for f in self.CSV_FIELDS
                     if f != "planner_time_ms") + (self.trajectory_hash,)


def _compute_plans(policy: Policy, pruned_map, members: list[int], leader: int,
                   lam: int) -> dict[int, list[Control]]:
    if policy == Policy.DMAR:
        return mar_plan(pruned_map, members, lam)
    if policy == Policy.BP:
        return greedy_plan(pruned_map, members, lam)
    if policy == Policy.DMAR_GCI:
        return gci_mar_plan(pruned_map, members, leader, lam)
    if policy == Policy.BP_GCI:
        task_plans = greedy_plan(pruned_map, members, lam=None)
        return gci_augment(task_plans, pruned_map, members, leader, lam)
    raise ValueError(f"no per-cluster planner for policy {policy}")


def run_round(world: GridWorld, agents: dict[int, AgentState],
              params: ProtocolParams, schedule: Schedule, round_index: int,
              hasher=None) -> RoundOutcome:
    """One full protocol round: SOAC, LMA, TMAR, EM, then cluster and token
    teardown.  Steps are budgeted by the schedule regardless of activity."""
    start_positions = tuple((aid, world.agents[aid]) for aid in sorted(world.agents))
    solved_before_em = not world.tasks
    for aid, a in agents.items():
        a.reset_round(world.agents[aid])
    views = {aid: compute_view(world, world.agents[aid], params.k, params.view_mode)
             for aid in agents}
    steps = schedule.steps_soac
    clusters, unassigned = run_soac(agents, views, params)

    steps += schedule.steps_lma + schedule.steps_dissolve
    planned: list[tuple[Cluster, object]] = []
    dissolved: list[int] = []
    for cl in sorted(clusters, key=lambda c: c.leader):
        leader_map = run_lma(cl, agents, views, params)
        pruned_map, dissolve = prune_or_dissolve(leader_map, cl)
        if dissolve:
            dissolved.append(cl.leader)
            for aid in cl.members:
                agents[aid].reset_links()
                unassigned.append(aid)
        else:
            planned.append((cl, pruned_map))
    unassigned = sorted(unassigned)
    live_clusters = [cl for cl, _m in planned]

    steps += schedule.steps_tmar_broadcast
    lam = schedule.steps_em
    plan_holders: list[int] = []
    t0 = time.perf_counter()
    all_plans: dict[int, list[Control]] = {}
    for cl, pruned_map in planned:
        members = sorted(cl.members)
        all_plans.update(_compute_plans(params.policy, pruned_map, members,
                                        cl.leader, lam))
    planner_ms = (time.perf_counter() - t0) * 1000.0
    for cl, _m in planned:
        broadcast_plans(cl, agents, all_plans, params)
        plan_holders.extend(cl.members)

    em_fn = collision_em if params.collision_mode else execute_em
    em = em_fn(world, agents, plan_holders, unassigned, lam, params,
               round_index, hasher=hasher, stop_when_solved=not params.policy.gci)
    steps += schedule.steps_em

    tokens = frozenset(world.tokens)
    world.tokens.clear()
    if hasher is not None:
        hasher.update(_pack_positions(world))
        hasher.update(repr(sorted(world.tasks)).encode())
    return RoundOutcome(
        round_index=round_index, clusters=live_clusters, dissolved=dissolved,
        unassigned=unassigned, steps=steps, planner_ms=planner_ms, em=em,
        solved_before_em=solved_before_em, tokens=tokens,
        start_positions=start_positions,
        cluster_sequence=tuple((cl.leader, frozenset(cl.members))
                               for cl in live_clusters))


def _centralized_episode(instance: Instance, params: ProtocolParams,
                         instance_id: str) -> tuple["RunRecord", list]:
    world = instance.to_world()
    hasher = hashlib.sha256()
    hasher.update(_pack_positions(world))
    t0 = time.perf_counter()
    plans = centralized_plan(world)
    planner_ms = (time.perf_counter() - t0) * 1000.0
    horizon = max((len(p) for p in plans.values()), default=0)
    for step in range(horizon):
        for aid in sorted(plans):
            seq = plans[aid]
            if step < len(seq) and seq[step] != Control.WAIT:
                world.apply_control(aid, seq[step], "cluster")
        hasher.update(_pack_positions(world))
    record = RunRecord(
        instance_id=instance_id, seed=params.master_seed, side=instance.width,
        k=params.k, psi=params.psi, ratio=instance.ratio,
        policy=params.policy.value, view_mode=params.view_mode.name.lower(),
        total_cost=world.ledger.total(),
        exploration_cost=world.ledger.moves_exploration,
        cluster_cost=world.ledger.moves_cluster,
        rounds=1, steps=horizon, mean_clusters_per_round=1.0,
        planner_time_ms=planner_ms, completed=not world.tasks,
        trajectory_hash=hasher.hexdigest())
    return record, []


def run_episode(instance: Instance, params: ProtocolParams,
                max_rounds: Optional[int] = None,
                max_steps: Optional[int] = None,
                instance_id: str = "", collect_rounds: bool = False
                ) -> tuple[RunRecord, list[RoundOutcome]]:
    """Run rounds until every task is complete or a cap is hit.

    Cap exhaustion is a normal outcome (completed=False), not an error.
    The returned record and the trajectory hash are pure functions of
    (instance, params) apart from the wall-clock planner time.
    """
    if params.policy == Policy.CENTRALIZED:
        return _centralized_episode(instance, params, instance_id)
    world = instance.to_world(deposit_tokens=params.policy.gci)
    agents = {aid: AgentState(aid, pos) for aid, pos in world.agents.items()}
    schedule = build_schedule(params)
    hasher = hashlib.sha256()
    hasher.update(_pack_positions(world))
    rounds = 0
    steps = 0
    planner_ms = 0.0
    cluster_counts: list[int] = []
    outcomes: list[RoundOutcome] = []
    while world.tasks:
        if max_rounds is not None and rounds >= max_rounds:
            break
        if max_steps is not None and steps + schedule.steps_per_round > max_steps:
            break
        outcome = run_round(world, agents, params, schedule, rounds, hasher=hasher)
        rounds += 1
        steps += outcome.steps
        planner_ms += outcome.planner_ms
        cluster_counts.append(len(outcome.clusters))
        if collect_rounds:
            outcomes.append(outcome)
    record = RunRecord(
        instance_id=instance_id, seed=params.master_seed, side=instance.width,
        k=params.k, psi=params.psi, ratio=instance.ratio,
        policy=params.policy.value, view_mode=params.view_mode.name.lower(),
        total_cost=world.ledger.total(),
        exploration_cost=world.ledger.moves_exploration,
        cluster_cost=world.ledger.moves_cluster,
        rounds=rounds, steps=steps,
        mean_clusters_per_round=(sum(cluster_counts) / rounds if rounds else 0.0),
        planner_time_ms=planner_ms, completed=not world.tasks,
        trajectory_hash=hasher.hexdigest())
    assert record.total_cost == record.exploration_cost + record.cluster_cost
    return record, outcomes
