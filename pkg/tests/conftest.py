"""Shared fixtures and independent oracles.

Oracles here deliberately re-derive results from first principles (plain
BFS, exhaustive joint-state search, rational-arithmetic geometry) so the
implementation under test never checks itself.
"""

import random
from collections import deque
from fractions import Fraction

import pytest

from dmar.grid import GridWorld
from dmar.instances import generate


def bfs_distances(width, height, blocked, start, through_obstacles=False):
    """Plain BFS distance map; traverses obstacle cells only when asked."""
    dist = {start: 0}
    q = deque([start])
    while q:
        x, y = q.popleft()
        d = dist[(x, y)]
        if not through_obstacles and (x, y) in blocked and (x, y) != start:
            continue
        for r in ((x, y + 1), (x + 1, y), (x, y - 1), (x - 1, y)):
            if 0 <= r[0] < width and 0 <= r[1] < height and r not in dist:
                dist[r] = d + 1
                q.append(r)
    return dist


def segment_blocked_oracle(p, v, obstacle):
    """Sampling oracle with exact rationals: does the open interior of the
    unit cell at ``obstacle`` meet the segment between the centers p and v?

    Any proper crossing of the open box covers a parameter interval of
    length at least 1/(2*|dx|*|dy|) for integer endpoints, so a fine enough
    rational grid cannot miss it.
    """
    if obstacle in (p, v):
        return False
    dx, dy = v[0] - p[0], v[1] - p[1]
    n = 4 * max(1, abs(dx)) * max(1, abs(dy)) * 4 + 8
    ox, oy = obstacle
    for i in range(1, n):
        t = Fraction(i, n)
        x = p[0] + t * dx
        y = p[1] + t * dy
        if (abs(x - ox) < Fraction(1, 2)) and (abs(y - oy) < Fraction(1, 2)):
            return True
    return False


def random_world(rng, side_range=(4, 12), frac_choices=(0.0, 0.1, 0.2, 0.3),
                 n_agents=(1, 6), n_tasks=(1, 8)):
    side = rng.randint(*side_range)
    inst = generate(side, rng.choice(frac_choices),
                    n_agents=rng.randint(*n_agents),
                    n_tasks=rng.randint(*n_tasks),
                    seed=rng.randrange(2 ** 30))
    return inst


def joint_optimal_cost(free, agents, tasks):
    """Exhaustive search for the minimum total movement cost completing all
    tasks: BFS over (sorted agent positions, remaining tasks) with edges
    weighted by the number of moving agents.  Tractable for tiny instances
    only; Dijkstra via buckets since step costs are 0..m."""
    import heapq
    free = frozenset(free)
    start = (tuple(sorted(agents)), frozenset(t for t in tasks if t not in agents))
    dist = {start: 0}
    heap = [(0, 0, start)]
    tie = 0
    moves_of = {}
    for p in free:
        opts = [p]
        for r in ((p[0], p[1] + 1), (p[0] + 1, p[1]), (p[0], p[1] - 1), (p[0] - 1, p[1])):
            if r in free:
                opts.append(r)
        moves_of[p] = opts
    while heap:
        d, _t, (pos, tasks_left) = heapq.heappop(heap)
        if dist.get((pos, tasks_left), -1) != d:
            continue
        if not tasks_left:
            return d
        from itertools import product
        for combo in product(*(moves_of[p] for p in pos)):
            cost = sum(1 for a, b in zip(pos, combo) if a != b)
            if cost == 0:
                continue
            new_tasks = tasks_left - frozenset(combo)
            key = (tuple(sorted(combo)), new_tasks)
            nd = d + cost
            if nd < dist.get(key, 1 << 30):
                dist[key] = nd
                tie += 1
                heapq.heappush(heap, (nd, tie, key))
    return None


@pytest.fixture
def rng():
    return random.Random(0xD3A4)


def worked_cluster_scenario():
    """Nine agents, k=2, psi=4: the worked clustering scenario where one
    merged cluster of agents 1..8 forms around initiator 8 and agent 9 is
    too distant to join anything."""
    agents = {1: (4, 0), 2: (4, 2), 3: (2, 2), 4: (6, 4), 5: (9, 5),
              6: (5, 5), 7: (8, 4), 8: (4, 4), 9: (15, 15)}
    tasks = {(0, 2), (5, 1), (10, 4)}
    return GridWorld(20, 20, obstacles=set(), tasks=tasks, agents=agents)
