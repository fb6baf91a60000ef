"""Plan broadcast over cluster trees, plan execution in the world, random
exploration with halt latching, GCI depot augmentation, and the discrete
collision-avoidance executor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .grid import (Control, GridWorld, InvariantError, MOVE_CONTROLS, Position,
                   apply_delta, sees_reachable_task, shortest_path)
from .lma import LocalMap
from .planner import gather_targets
from .rng import rand_control
from .schedule import ProtocolParams, tree_height_bound
from .soac import Agents, Cluster


@dataclass
class EmOutcome:
    moves_cluster: int = 0
    moves_exploration: int = 0
    tasks_completed: int = 0
    halted_explorers: set[int] = field(default_factory=set)


def broadcast_plans(cluster: Cluster, agents: Agents,
                    plans: dict[int, list[Control]], params: ProtocolParams
                    ) -> dict[int, int]:
    """Relay the plan set parent-to-child for L(psi) steps.

    Returns the step at which each member received the set (leader at 0).
    Every member must hold its own sequence by the end of the window.
    """
    L = tree_height_bound(params.psi)
    received = {cluster.leader: 0}
    for step in range(1, L + 1):
        frontier = [aid for aid, at in received.items() if at == step - 1]
        for aid in frontier:
            for b in agents[aid].children:
                if b not in received:
                    received[b] = step
    missing = cluster.members - received.keys()
    if missing:
        raise InvariantError(f"members {sorted(missing)} missed the plan broadcast")
    for aid in cluster.members:
        if aid not in plans:
            raise InvariantError(f"no control sequence for member {aid}")
        agents[aid].plan = plans[aid]
    return received


def gci_augment(plans: dict[int, list[Control]], local_map: LocalMap,
                members: list[int], leader: int, lam: int
                ) -> dict[int, list[Control]]:
    """Append each member's shortest path from its plan's final position to
    its gather target (the depot, or its own start when the depot is not
    reachable from its component), then pad every sequence to ``lam``.

    Takes unpadded task-phase plans; used for the base-policy GCI variant.
    """
    targets, _depot = gather_targets(local_map, members, leader)
    free = local_map.free
    out: dict[int, list[Control]] = {}
    for aid in sorted(members):
        seq = [c for c in plans[aid]]
        while len(seq) and seq[-1] == Control.WAIT:
            seq.pop()
        start = local_map.members[aid]
        goal = targets[aid]
        seq = _fit_gather(free, start, seq, goal, lam)
        seq += [Control.WAIT] * (lam - len(seq))
        out[aid] = seq
    return out


def _walk(start: Position, seq: list[Control]) -> Position:
    p = start
    for c in seq:
        if c != Control.WAIT:
            p = apply_delta(p, c)
    return p


def _fit_gather(free: set[Position], start: Position, seq: list[Control],
                goal: Position, lam: int) -> list[Control]:
    """Task-phase controls plus the homeward path, shrunk from the tail until
    the whole walk fits the execution window."""
    while True:
        end = _walk(start, seq)
        tail = shortest_path(free, end, goal)
        if tail is None:
            raise InvariantError(f"gather target {goal} unreachable from plan end {end}")
        if len(seq) + len(tail) <= lam:
            return seq + tail
        if not seq:
            raise InvariantError("execution window too short to gather at all")
        seq.pop()


def _pack_positions(world: GridWorld) -> bytes:
    parts = []
    for aid in sorted(world.agents):
        x, y = world.agents[aid]
        parts.append(struct.pack(">iii", aid, x, y))
    return b"".join(parts)


def _plan_tail_start(plan: list[Control]) -> int:
    """Index after the last non-Wait control."""
    n = len(plan)
    while n and plan[n - 1] == Control.WAIT:
        n -= 1
    return n


def execute_em(world: GridWorld, agents: Agents, plan_holders: list[int],
               explorers: list[int], lam: int, params: ProtocolParams,
               round_index: int, hasher=None,
               stop_when_solved: bool = False) -> EmOutcome:
    """Run the execution window: clustered agents follow their sequences,
    explorers random-walk until a task (or token) enters their view, then
    latch into waiting for the rest of the round.

    With ``stop_when_solved`` (every policy except the GCI variants, whose
    analysis needs full synchronized rounds), movement ends at the step
    boundary where the last task completes: the routing objective prices a
    solution, and movements after the final visit are not part of one.
    Steps where provably every agent waits are fast-forwarded; the window
    always accounts for exactly ``lam`` scheduled steps.
    """
    out = EmOutcome()
    tasks_before = len(world.tasks)
    base_cluster = world.ledger.moves_cluster
    base_explore = world.ledger.moves_exploration
    plan_holders = sorted(plan_holders)
    explorers = sorted(explorers)
    ff_after = 0
    for aid in plan_holders:
        ff_after = max(ff_after, _plan_tail_start(agents[aid].plan))
    for em_step in range(lam):
        if stop_when_solved and not world.tasks:
            break
        active_explorers = [e for e in explorers if not agents[e].halted]
        if em_step >= ff_after and not active_explorers:
            break
        for e in active_explorers:
            if sees_reachable_task(world, world.agents[e], params.k, params.view_mode):
                agents[e].halted = True
                out.halted_explorers.add(e)
        for aid in plan_holders:
            c = agents[aid].plan[em_step]
            if c != Control.WAIT:
                world.apply_control(aid, c, "cluster")
        for e in explorers:
            if agents[e].halted:
                continue
            p = world.agents[e]
            feasible = [c for c in MOVE_CONTROLS if world.is_free(apply_delta(p, c))]
            if not feasible:
                continue
            c = rand_control(params.master_seed, e, round_index, em_step, feasible)
            world.apply_control(e, c, "exploration")
        if hasher is not None:
            hasher.update(_pack_positions(world))
    out.moves_cluster = world.ledger.moves_cluster - base_cluster
    out.moves_exploration = world.ledger.moves_exploration - base_explore
    out.tasks_completed = tasks_before - len(world.tasks)
    return out


def collision_em(world: GridWorld, agents: Agents, plan_holders: list[int],
                 explorers: list[int], lam: int, params: ProtocolParams,
                 round_index: int, hasher=None,
                 stop_when_solved: bool = False) -> EmOutcome:
    """Execution window with collision avoidance: at every step end all agent
    positions are pairwise distinct.

    Clustered agents advance tentatively; contested cells go to (1) an agent
    already sitting there, (2) the agent whose final position it is,
    (3) the smallest ID.  A blocked agent whose remaining trajectory offers
    no currently-free cell adopts its current cell as final.  Explorers move
    last, resampling their draw among unclaimed feasible cells.
    """
    out = EmOutcome()
    tasks_before = len(world.tasks)
    base_cluster = world.ledger.moves_cluster
    base_explore = world.ledger.moves_exploration
    plan_holders = sorted(plan_holders)
    explorers = sorted(explorers)
    # Plans are consumed as queues: a blocked agent keeps retrying its next
    # control, so its remaining trajectory stays anchored to where it
    # actually is rather than to the global step index.
    plans = {aid: [c for c in agents[aid].plan] for aid in plan_holders}
    cursor = {aid: 0 for aid in plan_holders}
    if len(set(world.agents.values())) != len(world.agents):
        raise InvariantError("collision mode requires pairwise-distinct start positions")

    def _next_control(aid):
        i = cursor[aid]
        seq = plans[aid]
        return seq[i] if i < len(seq) else Control.WAIT

    def _only_waits_remain(aid, after: int) -> bool:
        return all(c == Control.WAIT for c in plans[aid][after:])

    for em_step in range(lam):
        if stop_when_solved and not world.tasks:
            break
        active_explorers = [e for e in explorers if not agents[e].halted]
        if not active_explorers and all(_only_waits_remain(a, cursor[a])
                                        for a in plan_holders):
            break
        for e in active_explorers:
            if sees_reachable_task(world, world.agents[e], params.k, params.view_mode):
                agents[e].halted = True
                out.halted_explorers.add(e)
        # Tentative moves for clustered agents.
        staying: dict[Position, int] = {}
        movers: dict[int, Position] = {}
        waits_consumed: list[int] = []
        for aid, p in world.agents.items():
            c = _next_control(aid) if aid in cursor else Control.WAIT
            if c != Control.WAIT:
                movers[aid] = apply_delta(p, c)
            else:
                if aid in cursor and cursor[aid] < len(plans[aid]):
                    waits_consumed.append(aid)
                staying[p] = aid
        while True:
            by_target: dict[Position, list[int]] = {}
            for aid, tgt in movers.items():
                by_target.setdefault(tgt, []).append(aid)
            losers: list[int] = []
            for tgt, group in by_target.items():
                if tgt in staying:
                    losers.extend(group)
                    continue
                if len(group) == 1:
                    continue
                finals = sorted(a for a in group
                                if _only_waits_remain(a, cursor[a] + 1))
                winner = finals[0] if finals else min(group)
                losers.extend(a for a in group if a != winner)
            # Swap-through pairs count as collisions too.
            if not losers:
                pos_of = world.agents
                for aid, tgt in movers.items():
                    other = next((b for b, t2 in movers.items()
                                  if b != aid and t2 == pos_of[aid] and tgt == pos_of[b]), None)
                    if other is not None:
                        pair = sorted((aid, other))
                        finals = [a for a in pair
                                  if _only_waits_remain(a, cursor[a] + 1)]
                        winner = finals[0] if finals else pair[0]
                        losers.extend(a for a in pair if a != winner)
                losers = sorted(set(losers))
            if not losers:
                break
            for aid in set(losers):
                movers.pop(aid, None)
                staying[world.agents[aid]] = aid
        end_positions = {movers.get(aid, world.agents[aid]): aid
                         for aid in world.agents}
        # Blocked movers: keep waiting while a future trajectory cell is
        # currently free, otherwise adopt the current cell as final.
        for aid in plan_holders:
            if aid in movers or aid in waits_consumed or cursor[aid] >= len(plans[aid]):
                continue
            p = world.agents[aid]
            future = []
            for c in plans[aid][cursor[aid]:]:
                if c != Control.WAIT:
                    p = apply_delta(p, c)
                    future.append(p)
            if not any(q not in end_positions for q in future):
                cursor[aid] = len(plans[aid])
        for aid in waits_consumed:
            cursor[aid] += 1
        for aid in sorted(movers):
            world.apply_control(aid, plans[aid][cursor[aid]], "cluster")
            cursor[aid] += 1
        # Explorers move last among unclaimed cells.
        occupied = set(world.agents.values())
        for e in explorers:
            if agents[e].halted:
                continue
            p = world.agents[e]
            feasible = [c for c in MOVE_CONTROLS if world.is_free(apply_delta(p, c))]
            attempt = 0
            pool = list(feasible)
            while pool:
                c = rand_control(params.master_seed, e, round_index, em_step, pool,
                                 attempt=attempt)
                tgt = apply_delta(p, c)
                if tgt not in occupied:
                    occupied.discard(p)
                    occupied.add(tgt)
                    world.apply_control(e, c, "exploration")
                    break
                pool.remove(c)
                attempt += 1
        if len(set(world.agents.values())) != len(world.agents):
            raise InvariantError(f"co-location at round {round_index} step {em_step}")
        if hasher is not None:
            hasher.update(_pack_positions(world))
    out.moves_cluster = world.ledger.moves_cluster - base_cluster
    out.moves_exploration = world.ledger.moves_exploration - base_explore
    out.tasks_completed = tasks_before - len(world.tasks)
    return out
