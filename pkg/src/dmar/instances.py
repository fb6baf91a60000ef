"""Random instance generation, solvability validation, and the instance
file format.

Format (line oriented, integers only):

    umvrpl-instance v1
    width <int>
    height <int>
    seed <int>
    ratio <tag>          # optional
    O <x> <y>            # one line per obstacle
    T <x> <y>            # one line per task
    A <id> <x> <y>       # one line per agent

Records are re-serialized in sorted order, so serialization round-trips
byte-stably.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .grid import DELTAS, GridWorld, MOVE_CONTROLS, Position
from .rng import derive_seed

FORMAT_HEADER = "umvrpl-instance v1"
RETRY_BUDGET = 1000


class GenerationError(RuntimeError):
    pass


class ParseError(ValueError):
    pass


@dataclass
class Instance:
    width: int
    height: int
    obstacles: set[Position]
    tasks: set[Position]
    agents: dict[int, Position]
    seed: int = 0
    ratio: str = ""

    def to_world(self, deposit_tokens: bool = False) -> GridWorld:
        return GridWorld(self.width, self.height, self.obstacles, self.tasks,
                         self.agents, deposit_tokens=deposit_tokens)


def _component(width: int, height: int, obstacles: set[Position],
               start: Position) -> set[Position]:
    seen = {start}
    q = deque([start])
    while q:
        x, y = q.popleft()
        for dx, dy in (DELTAS[c] for c in MOVE_CONTROLS):
            r = (x + dx, y + dy)
            if (0 <= r[0] < width and 0 <= r[1] < height
                    and r not in obstacles and r not in seen):
                seen.add(r)
                q.append(r)
    return seen


def validate(instance: Instance) -> tuple[bool, str]:
    """Solvable iff every task is reachable from every agent through free
    cells, i.e. tasks and agents share one connected component."""
    if not instance.agents:
        return False, "no agents"
    if not instance.tasks:
        return True, ""
    start = next(iter(instance.agents.values()))
    comp = _component(instance.width, instance.height, instance.obstacles, start)
    for aid, p in instance.agents.items():
        if p not in comp:
            return False, f"agent {aid} isolated from the others"
    for t in instance.tasks:
        if t not in comp:
            return False, f"task {t} unreachable"
    return True, ""


def generate(side: int, obstacle_frac: float, n_agents: int, n_tasks: int,
             seed: int, collision_mode: bool = False, ratio: str = "") -> Instance:
    """Sample obstacles, tasks and agents uniformly; resample the whole
    topology (deterministic retry sub-seeds) until the connectivity
    invariant holds.
    """
    if side < 2:
        raise GenerationError("side must be >= 2")
    n_cells = side * side
    n_obstacles = int(obstacle_frac * n_cells)
    if n_obstacles + max(n_tasks, 1) > n_cells or n_tasks < 0 or n_agents < 1:
        raise GenerationError("counts do not fit the grid")
    cells = [(x, y) for y in range(side) for x in range(side)]
    for attempt in range(RETRY_BUDGET):
        rng = random.Random(derive_seed(seed, "topology", attempt))
        obstacles = set(rng.sample(cells, n_obstacles))
        free = [p for p in cells if p not in obstacles]
        if len(free) < n_tasks or (collision_mode and len(free) < n_agents):
            continue
        tasks = set(rng.sample(free, n_tasks))
        if collision_mode:
            agent_cells = rng.sample(free, n_agents)
        else:
            agent_cells = [free[rng.randrange(len(free))] for _ in range(n_agents)]
        agents = {i + 1: p for i, p in enumerate(agent_cells)}
        inst = Instance(width=side, height=side, obstacles=obstacles,
                        tasks=tasks, agents=agents, seed=seed, ratio=ratio)
        ok, _why = validate(inst)
        if ok:
            return inst
    raise GenerationError(
        f"no solvable topology in {RETRY_BUDGET} attempts "
        f"(side={side}, frac={obstacle_frac}, agents={n_agents}, tasks={n_tasks}, seed={seed})")


def serialize(instance: Instance) -> str:
    lines = [FORMAT_HEADER,
             f"width {instance.width}",
             f"height {instance.height}",
             f"seed {instance.seed}"]
    if instance.ratio:
        lines.append(f"ratio {instance.ratio}")
    for x, y in sorted(instance.obstacles):
        lines.append(f"O {x} {y}")
    for x, y in sorted(instance.tasks):
        lines.append(f"T {x} {y}")
    for aid in sorted(instance.agents):
        x, y = instance.agents[aid]
        lines.append(f"A {aid} {x} {y}")
    return "\n".join(lines) + "\n"


def _parse_int(token: str, what: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"line {lineno}: {what} must be an integer, got {token!r}")


def deserialize(text: str) -> Instance:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty document")
    if lines[0].strip() != FORMAT_HEADER:
        raise ParseError(f"line 1: unknown format version {lines[0].strip()!r}, "
                         f"expected {FORMAT_HEADER!r}")
    header: dict[str, str] = {}
    obstacles: set[Position] = set()
    tasks: set[Position] = set()
    agents: dict[int, Position] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag in ("width", "height", "seed", "ratio"):
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: field {tag} takes one value")
            header[tag] = parts[1]
        elif tag == "O" or tag == "T":
            if len(parts) != 3:
                raise ParseError(f"line {lineno}: {tag} record takes x y")
            p = (_parse_int(parts[1], "x", lineno), _parse_int(parts[2], "y", lineno))
            (obstacles if tag == "O" else tasks).add(p)
        elif tag == "A":
            if len(parts) != 4:
                raise ParseError(f"line {lineno}: A record takes id x y")
            aid = _parse_int(parts[1], "id", lineno)
            if aid in agents:
                raise ParseError(f"line {lineno}: duplicate agent id {aid}")
            agents[aid] = (_parse_int(parts[2], "x", lineno),
                           _parse_int(parts[3], "y", lineno))
        else:
            raise ParseError(f"line {lineno}: unknown record tag {tag!r}")
    for req in ("width", "height", "seed"):
        if req not in header:
            raise ParseError(f"missing required field {req!r}")
    inst = Instance(width=_parse_int(header["width"], "width", 0),
                    height=_parse_int(header["height"], "height", 0),
                    obstacles=obstacles, tasks=tasks, agents=agents,
                    seed=_parse_int(header["seed"], "seed", 0),
                    ratio=header.get("ratio", ""))
    for p in inst.obstacles | inst.tasks:
        if not (0 <= p[0] < inst.width and 0 <= p[1] < inst.height):
            raise ParseError(f"record {p} out of bounds")
    for aid, p in inst.agents.items():
        if not (0 <= p[0] < inst.width and 0 <= p[1] < inst.height):
            raise ParseError(f"agent {aid} out of bounds at {p}")
    if inst.obstacles & inst.tasks:
        raise ParseError("task placed on an obstacle")
    return inst
