"""Grid world: movement semantics, cost accounting, and sensing (views).

Coordinates are (x, y) with x increasing east and y increasing north.
The canonical control order [North, East, South, West, Wait] governs every
deterministic tie-break in this package.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional

Position = tuple[int, int]


class Control(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    WAIT = 4


# Deltas indexed by Control value; WAIT is the identity.
DELTAS: tuple[tuple[int, int], ...] = ((0, 1), (1, 0), (0, -1), (-1, 0), (0, 0))
MOVE_CONTROLS = (Control.NORTH, Control.EAST, Control.SOUTH, Control.WEST)


def apply_delta(p: Position, c: Control) -> Position:
    dx, dy = DELTAS[c]
    return (p[0] + dx, p[1] + dy)


class ViewMode(IntEnum):
    HOP = 0
    HOP_REDUCED = 1
    LINE_OF_SIGHT = 2


VIEW_MODE_NAMES = {ViewMode.HOP: "hop", ViewMode.HOP_REDUCED: "hop_reduced",
                   ViewMode.LINE_OF_SIGHT: "line_of_sight"}
VIEW_MODES_BY_NAME = {v: k for k, v in VIEW_MODE_NAMES.items()}


class ContractViolation(AssertionError):
    """A caller broke an operation's precondition (a planner/engine bug)."""


class InvariantError(AssertionError):
    """Internal state contradicts a structural invariant."""


@dataclass
class View:
    """What one agent can sense from ``origin`` with radius ``k``.

    ``cells`` maps every sensed position to its hop distance from the origin
    under the active mode's reachability rule.  ``obstacle_cells`` is the
    subset of sensed cells that are obstacles.  Tokens count as visible
    tasks (they are only ever present in GCI mode during execution).
    """

    origin: Position
    cells: dict[Position, int]
    obstacle_cells: set[Position]
    visible_tasks: set[Position]
    visible_agents: dict[int, Position]

    def free_cells(self) -> set[Position]:
        return {p for p in self.cells if p not in self.obstacle_cells}


@dataclass
class CostLedger:
    per_agent: dict[int, int] = field(default_factory=dict)
    moves_exploration: int = 0
    moves_cluster: int = 0

    def charge(self, agent_id: int, cost_class: str) -> None:
        self.per_agent[agent_id] = self.per_agent.get(agent_id, 0) + 1
        if cost_class == "exploration":
            self.moves_exploration += 1
        elif cost_class == "cluster":
            self.moves_cluster += 1
        else:
            raise ContractViolation(f"unknown cost class {cost_class!r}")

    def total(self) -> int:
        return sum(self.per_agent.values())


class GridWorld:
    """Ground-truth environment owned by a single episode runner.

    Instances are self-contained; concurrent episodes must use disjoint
    worlds.  Tokens are only deposited when ``deposit_tokens`` is set
    (GCI mode) and are cleared by the engine at round end.
    """

    def __init__(self, width: int, height: int, obstacles: Iterable[Position],
                 tasks: Iterable[Position], agents: dict[int, Position],
                 deposit_tokens: bool = False):
        if width < 1 or height < 1:
            raise ContractViolation("degenerate grid dimensions")
        self.width = width
        self.height = height
        self.obstacles: set[Position] = set(obstacles)
        self.tasks: set[Position] = set(tasks)
        self.tokens: set[Position] = set()
        self.agents: dict[int, Position] = dict(agents)
        self.deposit_tokens = deposit_tokens
        self.ledger = CostLedger()
        if self.obstacles & self.tasks:
            raise InvariantError("task placed on an obstacle")
        for aid, p in self.agents.items():
            if not self.in_bounds(p):
                raise InvariantError(f"agent {aid} out of bounds at {p}")
            if p in self.obstacles:
                raise InvariantError(f"agent {aid} placed on an obstacle at {p}")
        for t in self.tasks:
            if not self.in_bounds(t):
                raise InvariantError(f"task out of bounds at {t}")
        # An agent standing on a task has already visited it.
        self.complete_tasks_under_agents()

    def in_bounds(self, p: Position) -> bool:
        return 0 <= p[0] < self.width and 0 <= p[1] < self.height

    def is_free(self, p: Position) -> bool:
        return self.in_bounds(p) and p not in self.obstacles

    def free_cells(self) -> set[Position]:
        return {(x, y) for x in range(self.width) for y in range(self.height)
                if (x, y) not in self.obstacles}

    def complete_tasks_under_agents(self) -> set[Position]:
        hit = {p for p in self.agents.values() if p in self.tasks}
        self.tasks -= hit
        return hit

    def _complete_task_at(self, p: Position) -> bool:
        if p in self.tasks:
            self.tasks.discard(p)
            if self.deposit_tokens:
                self.tokens.add(p)
            return True
        return False

    def apply_control(self, agent_id: int, c: Control, cost_class: str) -> Position:
        """Move one agent; waits are free and never touch the ledger."""
        p = self.agents[agent_id]
        if c == Control.WAIT:
            return p
        q = apply_delta(p, c)
        if not self.in_bounds(q) or q in self.obstacles:
            raise ContractViolation(
                f"agent {agent_id} ordered into {'an obstacle' if self.in_bounds(q) else 'out of bounds'} at {q}")
        self.agents[agent_id] = q
        self.ledger.charge(agent_id, cost_class)
        self._complete_task_at(q)
        return q


def neighbors(world: GridWorld, p: Position) -> list[tuple[Control, Position]]:
    """In-bounds non-Wait moves from ``p`` in canonical order.

    Targets may be obstacle cells; callers filter.
    """
    if not world.in_bounds(p):
        raise ContractViolation(f"position {p} out of bounds")
    out = []
    for c in MOVE_CONTROLS:
        q = apply_delta(p, c)
        if world.in_bounds(q):
            out.append((c, q))
    return out


def _segment_crosses_open_box(px: int, py: int, vx: int, vy: int,
                              ox: int, oy: int) -> bool:
    """Exact test: does the segment between cell centers (px,py)->(vx,vy)
    pass through the open interior of the unit cell at (ox,oy)?

    All coordinates are cell indices.  Computed on a doubled lattice with
    integer Liang-Barsky clipping, so corner and edge touches (measure-zero
    contacts) never count as crossings.
    """
    # Doubled coordinates: cell (ox,oy) has open interior
    # (2ox-1, 2ox+1) x (2oy-1, 2oy+1); segment endpoints at even coords.
    sx, sy = 2 * px, 2 * py
    dx, dy = 2 * vx - sx, 2 * vy - sy
    # Parametric interval (lo, hi) of t in [0,1] with point strictly inside,
    # tracked as exact fractions lo_n/lo_d, hi_n/hi_d with positive denominators.
    lo_n, lo_d = 0, 1
    hi_n, hi_d = 1, 1
    for start, d, low, high in ((sx, dx, 2 * ox - 1, 2 * ox + 1),
                                (sy, dy, 2 * oy - 1, 2 * oy + 1)):
        if d == 0:
            if not (low < start < high):
                return False
            continue
        t0_n, t1_n = low - start, high - start
        den = d
        if den < 0:
            t0_n, t1_n, den = -t1_n, -t0_n, -den
        # entering bound t0_n/den, exiting bound t1_n/den
        if t0_n * lo_d > lo_n * den:
            lo_n, lo_d = t0_n, den
        if t1_n * hi_d < hi_n * den:
            hi_n, hi_d = t1_n, den
    # Non-empty open interval?
    return lo_n * hi_d < hi_n * lo_d


def line_of_sight_clear(p: Position, v: Position, obstacles: set[Position]) -> bool:
    """True when no obstacle interior lies between the cell centers of p and v.

    The endpoints themselves never block.
    """
    if p == v:
        return True
    x_lo, x_hi = min(p[0], v[0]), max(p[0], v[0])
    y_lo, y_hi = min(p[1], v[1]), max(p[1], v[1])
    for o in obstacles:
        if o == p or o == v:
            continue
        if not (x_lo - 1 <= o[0] <= x_hi + 1 and y_lo - 1 <= o[1] <= y_hi + 1):
            continue
        if _segment_crosses_open_box(p[0], p[1], v[0], v[1], o[0], o[1]):
            return False
    return True


def compute_view(world: GridWorld, p: Position, k: int, mode: ViewMode) -> View:
    """Sense the grid around ``p`` out to radius ``k`` hops.

    Hop: breadth-first ball over all in-bounds cells, obstacles included.
    HopReduced: breadth-first over free cells only; obstacles neighbouring a
    reached free cell are reported (at their first-contact depth) but never
    traversed.  LineOfSight: HopReduced restricted to cells whose sight
    segment from ``p`` crosses no other obstacle interior.
    """
    if not world.in_bounds(p):
        raise ContractViolation(f"view origin {p} out of bounds")
    if k < 1:
        raise ContractViolation("view radius must be >= 1")
    cells: dict[Position, int] = {p: 0}
    frontier = deque([p])
    traverse_obstacles = mode == ViewMode.HOP
    while frontier:
        q = frontier.popleft()
        d = cells[q]
        if d == k or (not traverse_obstacles and q in world.obstacles):
            continue
        for c in MOVE_CONTROLS:
            r = apply_delta(q, c)
            if world.in_bounds(r) and r not in cells:
                cells[r] = d + 1
                frontier.append(r)
    if mode == ViewMode.LINE_OF_SIGHT:
        cells = {q: d for q, d in cells.items()
                 if line_of_sight_clear(p, q, world.obstacles)}
    obstacle_cells = {q for q in cells if q in world.obstacles}
    visible_tasks = {q for q in cells if q in world.tasks or q in world.tokens}
    visible_agents = {aid: q for aid, q in world.agents.items() if q in cells}
    return View(origin=p, cells=cells, obstacle_cells=obstacle_cells,
                visible_tasks=visible_tasks, visible_agents=visible_agents)


def sees_reachable_task(world: GridWorld, p: Position, k: int,
                        mode: ViewMode) -> bool:
    """Explorer halting predicate: a task (or token) is both visible and
    reachable through free cells within the sensing radius.

    Under hop views an agent can see a task through a wall it has no local
    path to; halting on such sightings would park the swarm forever next to
    a pocket no cluster map can certify a route into.  Restricting the latch
    to obstacle-respecting reachability (which the reduced and line-of-sight
    modes already have by construction) keeps exploration live and is what
    makes completeness hold on every solvable instance.
    """
    effective = ViewMode.HOP_REDUCED if mode == ViewMode.HOP else mode
    return sees_task(world, p, k, effective)


def sees_task(world: GridWorld, p: Position, k: int, mode: ViewMode) -> bool:
    """Early-exit form of the task-visibility predicate used for leader
    election.  Tokens count as tasks."""
    targets = world.tasks | world.tokens if world.tokens else world.tasks
    if not targets:
        return False
    if p in targets:
        return True
    seen = {p}
    frontier = deque([(p, 0)])
    traverse_obstacles = mode == ViewMode.HOP
    candidates = [] if mode == ViewMode.LINE_OF_SIGHT else None
    while frontier:
        q, d = frontier.popleft()
        if d == k or (not traverse_obstacles and q in world.obstacles):
            continue
        for c in MOVE_CONTROLS:
            r = apply_delta(q, c)
            if world.in_bounds(r) and r not in seen:
                seen.add(r)
                if r in targets:
                    if candidates is None:
                        return True
                    candidates.append(r)
                frontier.append((r, d + 1))
    if candidates:
        return any(line_of_sight_clear(p, r, world.obstacles) for r in candidates)
    return False


def shortest_path(cells: set[Position], frm: Position, to: Position
                  ) -> Optional[list[Control]]:
    """Minimum-length control sequence between two cells of a known-free set.

    Among equal-length paths, picks the canonically smallest control at every
    divergence.  Returns None when ``to`` is unreachable.
    """
    if frm not in cells or to not in cells:
        raise ContractViolation("shortest_path endpoints must lie in the cell set")
    if frm == to:
        return []
    # Distance field from the target, then walk greedily from the source.
    dist = {to: 0}
    frontier = deque([to])
    while frontier:
        q = frontier.popleft()
        d = dist[q]
        for c in MOVE_CONTROLS:
            r = apply_delta(q, c)
            if r in cells and r not in dist:
                dist[r] = d + 1
                frontier.append(r)
    if frm not in dist:
        return None
    path: list[Control] = []
    cur = frm
    d = dist[frm]
    while cur != to:
        for c in MOVE_CONTROLS:
            r = apply_delta(cur, c)
            if dist.get(r, -1) == d - 1:
                path.append(c)
                cur = r
                d -= 1
                break
        else:  # pragma: no cover - BFS guarantees a predecessor
            raise InvariantError("shortest_path walk lost the distance field")
    return path
