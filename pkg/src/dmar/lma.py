"""Local map aggregation: tree-routed view merging so each cluster leader
ends up holding the cluster's collective map in leader-relative coordinates,
plus task pruning and cluster dissolution.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .grid import DELTAS, MOVE_CONTROLS, InvariantError, Position, View
from .soac import Agents, Cluster
from .schedule import ProtocolParams, tree_height_bound


@dataclass
class LocalMap:
    """Relative-coordinate partial map.

    ``free`` and ``obstacles`` are disjoint known-cell sets; everything else
    is unknown and non-traversable for planning.  ``members`` maps agent IDs
    of the owning cluster to their positions in this map's frame.
    """

    free: set[Position] = field(default_factory=set)
    obstacles: set[Position] = field(default_factory=set)
    tasks: set[Position] = field(default_factory=set)
    members: dict[int, Position] = field(default_factory=dict)

    def translate(self, dx: int, dy: int) -> "LocalMap":
        if dx == 0 and dy == 0:
            return LocalMap(set(self.free), set(self.obstacles), set(self.tasks),
                            dict(self.members))
        return LocalMap(
            free={(x + dx, y + dy) for x, y in self.free},
            obstacles={(x + dx, y + dy) for x, y in self.obstacles},
            tasks={(x + dx, y + dy) for x, y in self.tasks},
            members={aid: (p[0] + dx, p[1] + dy) for aid, p in self.members.items()},
        )


def init_map(agent_id: int, view: View, cluster_id: int, agents: Agents) -> LocalMap:
    """An agent's starting map: its own view with non-cluster agents dropped,
    coordinates relative to the agent itself."""
    ox, oy = view.origin
    m = LocalMap()
    for p in view.cells:
        rel = (p[0] - ox, p[1] - oy)
        if p in view.obstacle_cells:
            m.obstacles.add(rel)
        else:
            m.free.add(rel)
    m.tasks = {(p[0] - ox, p[1] - oy) for p in view.visible_tasks}
    m.members = {xid: (p[0] - ox, p[1] - oy)
                 for xid, p in view.visible_agents.items()
                 if agents[xid].cluster_id == cluster_id}
    return m


def merge_maps(base: LocalMap, incoming: LocalMap, shared_agent: int) -> LocalMap:
    """Union of two maps in the base map's frame.

    The incoming map is translated so the shared reference agent coincides;
    a cell claimed free by one side and obstacle by the other is a hard
    invariant breach (views are ground truth and cannot disagree).
    """
    if shared_agent not in base.members or shared_agent not in incoming.members:
        raise InvariantError(f"maps share no reference agent {shared_agent}")
    bx, by = base.members[shared_agent]
    ix, iy = incoming.members[shared_agent]
    moved = incoming.translate(bx - ix, by - iy)
    free = base.free | moved.free
    obstacles = base.obstacles | moved.obstacles
    if free & obstacles:
        raise InvariantError(f"merge disagrees on cells {sorted(free & obstacles)[:4]}")
    members = dict(base.members)
    for aid, p in moved.members.items():
        if aid in members and members[aid] != p:
            raise InvariantError(f"merge disagrees on member {aid} position")
        members[aid] = p
    return LocalMap(free=free, obstacles=obstacles,
                    tasks=base.tasks | moved.tasks, members=members)


def run_lma(cluster: Cluster, agents: Agents, views: dict[int, View],
            params: ProtocolParams) -> LocalMap:
    """Aggregate member views to the leader over 2*L(psi) synchronized steps.

    Downward wave: leader's children start flagged; a flagged agent merges
    its parent's map into its own (adopting the parent's, hence ultimately
    the leader's, frame), unflags unless it is a leaf, and flags its
    children.  Upward wave: a flagged non-leader merges its map into its
    parent's and passes the flag up.
    """
    L = tree_height_bound(params.psi)
    leader = agents[cluster.leader]
    maps: dict[int, LocalMap] = {}
    for aid in cluster.members:
        a = agents[aid]
        maps[aid] = init_map(aid, views[aid], a.cluster_id, agents)
        a.msg_flag = a.parent == cluster.leader
    for _ in range(L):
        flagged = sorted(aid for aid in cluster.members if agents[aid].msg_flag)
        for aid in flagged:
            a = agents[aid]
            if a.parent is None:
                continue
            maps[aid] = merge_maps(maps[a.parent], maps[aid], shared_agent=aid)
            if a.children:
                a.msg_flag = False
            for b in a.children:
                agents[b].msg_flag = True
    for _ in range(L):
        flagged = sorted(aid for aid in cluster.members
                         if agents[aid].msg_flag and aid != cluster.leader)
        merges = [(aid, agents[aid].parent) for aid in flagged]
        for aid, pid in merges:
            maps[pid] = merge_maps(maps[pid], maps[aid], shared_agent=aid)
            agents[aid].msg_flag = False
            agents[pid].msg_flag = True
    leader.msg_flag = False
    for aid in cluster.members:
        agents[aid].local_map = maps[aid]
    return maps[cluster.leader]


def reachable_from(free: set[Position], starts: list[Position]) -> set[Position]:
    seen = set()
    frontier = deque()
    for s in starts:
        if s in free and s not in seen:
            seen.add(s)
            frontier.append(s)
    while frontier:
        x, y = frontier.popleft()
        for dx, dy in (DELTAS[c] for c in MOVE_CONTROLS):
            q = (x + dx, y + dy)
            if q in free and q not in seen:
                seen.add(q)
                frontier.append(q)
    return seen


def prune_or_dissolve(leader_map: LocalMap, cluster: Cluster
                      ) -> tuple[LocalMap | None, bool]:
    """Drop tasks no member can reach within the map's free cells.

    Returns (pruned map, False) or (None, True) when nothing remains and the
    cluster should dissolve.
    """
    starts = [leader_map.members[aid] for aid in cluster.members
              if aid in leader_map.members]
    reach = reachable_from(leader_map.free, starts)
    kept = {t for t in leader_map.tasks if t in reach}
    if not kept:
        return None, True
    if kept == leader_map.tasks:
        return leader_map, False
    pruned = LocalMap(free=set(leader_map.free), obstacles=set(leader_map.obstacles),
                      tasks=kept, members=dict(leader_map.members))
    return pruned, False
