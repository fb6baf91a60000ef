"""Self-organizing agent clusters: leader election, bounded-degree tree
growth, and the cluster-join merge.

All phase functions follow synchronous step semantics: decisions read the
state committed by the previous step; conflicting writes are resolved by
fixed deterministic rules (smallest sender wins a message slot, requesters
are admitted in ascending ID order up to child capacity).

Join waves that are cut off by the end of a propagation window can leave
tree fragments whose links or cluster IDs are inconsistent.  A local heal
rule resets such agents to unassigned; `run_soac` finishes by normalizing
so the returned partition always satisfies the tree invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .grid import InvariantError, Position, View
from .schedule import ProtocolParams, tree_height_bound


@dataclass
class AgentState:
    id: int
    position: Position
    ldr_flag: bool = False
    msg_flag: bool = False
    cluster_id: Optional[int] = None
    parent: Optional[int] = None
    children: list[int] = field(default_factory=list)
    depth: int = 0
    join_message: Optional[int] = None
    local_map: object = None          # LocalMap during LMA
    plan: Optional[list] = None       # ControlSequence during TMAR/EM
    halted: bool = False              # explorer latch during EM

    def reset_round(self, position: Position) -> None:
        self.position = position
        self.ldr_flag = False
        self.msg_flag = False
        self.cluster_id = None
        self.parent = None
        self.children = []
        self.depth = 0
        self.join_message = None
        self.local_map = None
        self.plan = None
        self.halted = False

    def reset_links(self) -> None:
        self.cluster_id = None
        self.parent = None
        self.children = []
        self.depth = 0
        self.ldr_flag = False

    @property
    def unassigned(self) -> bool:
        return self.cluster_id is None


@dataclass
class Cluster:
    leader: int
    members: set[int]
    height: int


Agents = dict[int, AgentState]
Views = dict[int, View]


def elect_leaders(agents: Agents, views: Views) -> set[int]:
    """An agent leads iff it sees a task and no larger-ID agent in its view
    also sees a task.  (Seeing a task is exactly what sets the initial
    leader flag, so reading neighbours' flags reduces to this predicate.)"""
    sees = {aid: bool(views[aid].visible_tasks) for aid in agents}
    leaders = set()
    for aid, a in agents.items():
        if not sees[aid]:
            continue
        if any(sees[xid] and xid > aid for xid in views[aid].visible_agents):
            continue
        leaders.add(aid)
        a.ldr_flag = True
        a.cluster_id = aid
        a.depth = 0
    return leaders


def append_step(agents: Agents, views: Views, params: ProtocolParams) -> set[int]:
    """One synchronous growth step: unassigned agents nominate the nearest
    visible clustered agent with spare capacity and room below the height
    bound; each nominee admits requesters in ascending ID order.

    Returns the set of agents that had at least one eligible target (they
    took the append branch this iteration, successfully or not, and are
    therefore not cluster-join initiators).
    """
    c = params.c
    height_limit = tree_height_bound(params.psi)
    nominations: dict[int, list[int]] = {}
    had_target: set[int] = set()
    for aid, a in agents.items():
        if not a.unassigned:
            continue
        view = views[aid]
        best = None
        for xid, xpos in view.visible_agents.items():
            if xid == aid:
                continue
            x = agents[xid]
            if x.cluster_id is None or len(x.children) >= c or x.depth >= height_limit:
                continue
            key = (view.cells[xpos], xid)
            if best is None or key < best[0]:
                best = (key, xid)
        if best is not None:
            had_target.add(aid)
            nominations.setdefault(best[1], []).append(aid)
    for target_id in sorted(nominations):
        target = agents[target_id]
        for rid in sorted(nominations[target_id]):
            if len(target.children) >= c:
                break
            r = agents[rid]
            target.children.append(rid)
            r.parent = target_id
            r.cluster_id = target.cluster_id
            r.depth = target.depth + 1
    return had_target


def cluster_join_init(agents: Agents, views: Views, params: ProtocolParams,
                      appenders: set[int] = frozenset()) -> set[int]:
    """Cluster-join initiation: an unassigned agent that had no appendable
    target this iteration but sees two or more distinct clusters declares
    itself leader of their union and messages one visible agent per chosen
    cluster (the smallest-ID representative).

    Reads the post-append state; all initiators decide simultaneously and
    competing messages to one recipient resolve to the smallest sender.
    Returns the set of initiators.
    """
    cid_now = {aid: a.cluster_id for aid, a in agents.items()}
    writes: dict[int, int] = {}
    initiators = set()
    for aid in sorted(agents):
        a = agents[aid]
        if not a.unassigned or aid in appenders:
            continue
        by_cluster: dict[int, int] = {}
        for xid in views[aid].visible_agents:
            if xid == aid:
                continue
            cid = cid_now[xid]
            if cid is None:
                continue
            if cid not in by_cluster or xid < by_cluster[cid]:
                by_cluster[cid] = xid
        if len(by_cluster) < 2:
            continue
        initiators.add(aid)
        chosen = sorted(by_cluster)[:params.c]
        a.cluster_id = aid
        a.parent = None
        a.depth = 0
        for cid in chosen:
            rep = by_cluster[cid]
            if rep not in writes or aid < writes[rep]:
                writes[rep] = aid
    for rep, sender in writes.items():
        agents[rep].join_message = sender
    return initiators


def _heal_pass(agents: Agents) -> bool:
    """Prune unreciprocated child entries and reset agents whose parent link
    is broken or cluster-ID-inconsistent.  Agents holding a join message are
    mid-transition and are left alone.  Returns True when anything changed."""
    changed = False
    for a in agents.values():
        kept = [b for b in a.children if agents[b].parent == a.id]
        if len(kept) != len(a.children):
            a.children = kept
            changed = True
    for a in agents.values():
        if a.join_message is not None or a.parent is None:
            continue
        p = agents[a.parent]
        if a.id not in p.children or p.cluster_id != a.cluster_id or a.cluster_id is None:
            a.reset_links()
            changed = True
    return changed


def join_propagation_step(agents: Agents, views: Views, params: ProtocolParams) -> None:
    """Process every pending join message in one synchronous step.

    A recipient adopts the sender's cluster, re-roots under the sender and
    relays the join to its former family.  A recipient whose would-be parent
    has no spare child slot declines and resets to unassigned.
    """
    c = params.c
    cid0 = {aid: a.cluster_id for aid, a in agents.items()}
    processors: list[tuple[int, int]] = []
    for aid, a in agents.items():
        if a.join_message is None:
            continue
        s = a.join_message
        a.join_message = None
        if cid0[s] is None or cid0[s] == cid0[aid]:
            continue  # void: sender dissolved or already same cluster
        processors.append((aid, s))
    processors.sort()
    old_children = {}
    old_parent = {}
    for aid, _s in processors:
        a = agents[aid]
        old_children[aid] = list(a.children)
        old_parent[aid] = a.parent
        a.children = []
    admitted: list[tuple[int, int]] = []
    appenders: dict[int, list[int]] = {}
    for aid, s in processors:
        a = agents[aid]
        parent = agents[s]
        if len(parent.children) >= c:
            a.reset_links()
            continue
        parent.children.append(aid)
        a.parent = s
        a.cluster_id = cid0[s]
        a.depth = parent.depth + 1
        admitted.append((aid, s))
        appenders.setdefault(s, []).append(aid)
    writes: dict[int, int] = {}
    for aid, s in admitted:
        family = [b for b in old_children[aid] if b != s]
        family += [b for b in appenders.get(aid, []) if b != s]
        if old_parent[aid] is not None and old_parent[aid] != s and len(family) < c:
            family.append(old_parent[aid])
        for t in family:
            # locality contract: messages only travel along links, and links
            # only ever connect mutually visible agents
            assert t in views[aid].visible_agents, (aid, t)
            if t not in writes or aid < writes[t]:
                writes[t] = aid
    for t, sender in writes.items():
        agents[t].join_message = sender
    _heal_pass(agents)


def normalize_partition(agents: Agents) -> tuple[list[Cluster], list[int]]:
    """Derive the final partition: leader-rooted trees traced through mutual,
    cluster-ID-consistent links.  Any agent not reachable that way is reset
    to unassigned.  Returns (clusters, unassigned agent IDs)."""
    for a in agents.values():
        a.join_message = None
    while _heal_pass(agents):
        pass
    clusters: list[Cluster] = []
    claimed: set[int] = set()
    for aid in sorted(agents):
        root = agents[aid]
        if root.cluster_id != aid or root.parent is not None:
            continue
        members = {aid}
        height = 0
        root.depth = 0
        frontier = [aid]
        while frontier:
            nid = frontier.pop()
            node = agents[nid]
            for b in node.children:
                ch = agents[b]
                if ch.parent != nid or ch.cluster_id != aid or b in members:
                    raise InvariantError(f"inconsistent tree link {nid}->{b} survived healing")
                ch.depth = node.depth + 1
                height = max(height, ch.depth)
                members.add(b)
                frontier.append(b)
        clusters.append(Cluster(leader=aid, members=members, height=height))
        claimed |= members
    unassigned = []
    for aid in sorted(agents):
        if aid in claimed:
            continue
        agents[aid].reset_links()
        unassigned.append(aid)
    return clusters, unassigned


def run_soac(agents: Agents, views: Views, params: ProtocolParams
             ) -> tuple[list[Cluster], list[int]]:
    """Election, then ceil(log2 psi) iterations of growth and cluster-join."""
    outer = (params.psi - 1).bit_length()
    L = tree_height_bound(params.psi)
    elect_leaders(agents, views)
    for _ in range(outer):
        appenders = append_step(agents, views, params)
        if L > 0:
            cluster_join_init(agents, views, params, appenders)
            for _ in range(L):
                join_propagation_step(agents, views, params)
        for a in agents.values():
            a.join_message = None
        while _heal_pass(agents):
            pass
    return normalize_partition(agents)
