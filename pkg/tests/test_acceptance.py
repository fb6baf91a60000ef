"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured numbers.  Statistical checks run the full stated protocol at
desk scale; exact checks run at their stated counts.

Run with `pytest tests/test_acceptance.py -v -s` to watch the lines appear.
"""

import os
import random
import time

import pytest

from dmar.engine import run_episode
from dmar.grid import GridWorld, ViewMode, compute_view
from dmar.harness import SweepSpec, critical_radius, summarize, sweep
from dmar.instances import generate
from dmar.lma import LocalMap, run_lma
from dmar.planner import greedy_plan, mar_plan, plan_cost
from dmar.rng import derive_seed
from dmar.schedule import (Policy, ProtocolParams, build_schedule,
                           max_cluster_size, tree_height_bound)
from dmar.soac import AgentState, run_soac

JOBS = max(1, os.cpu_count() or 1)


def _map_of(inst):
    return LocalMap(free=inst.to_world().free_cells(),
                    obstacles=set(inst.obstacles), tasks=set(inst.tasks),
                    members=dict(inst.agents))


@pytest.fixture(scope="session")
def radius_sweep_rows():
    """Shared 20x20 sweep: 10 instances x 10 runs x k in {2,...,12}, both
    policies (criteria: critical radius, effective range)."""
    spec = SweepSpec(sides=[20], ks=[2, 4, 6, 8, 10, 12], ratios=["1:1"],
                     policies=[Policy.DMAR, Policy.BP],
                     instances_per_cell=10, runs_per_instance=10,
                     master_seed=20260809)
    records = sweep(spec, jobs=JOBS)
    return [dict(side=r.side, k=r.k, policy=r.policy, total_cost=r.total_cost,
                 planner_time_ms=r.planner_time_ms,
                 exploration_cost=r.exploration_cost,
                 mean_clusters_per_round=r.mean_clusters_per_round)
            for r in records]


def test_rollout_cost_improvement():
    """cost(mar_plan) <= cost(greedy_plan) on 1,000 fuzzed cluster maps."""
    t0 = time.time()
    rng = random.Random(0x0AC1)
    n = 0
    while n < 1000:
        inst = generate(rng.randint(4, 15), rng.choice([0.0, 0.1, 0.2, 0.3]),
                        n_agents=rng.randint(1, 6), n_tasks=rng.randint(1, 8),
                        seed=rng.randrange(2 ** 30))
        m = _map_of(inst)
        members = sorted(inst.agents)
        lam = 6 * inst.width * inst.width
        assert plan_cost(mar_plan(m, members, lam)) <= plan_cost(
            greedy_plan(m, members, lam)), f"violation on map {n}"
        n += 1
    dt = time.time() - t0
    assert dt < 120
    print(f"\nPASS rollout cost improvement: 1000/1000 maps, {dt:.1f}s")


def test_gci_dominance():
    """50 seeds on 10x10: cost(DMAR-GCI) <= cost(BP-GCI), identical
    exploration cost and per-round cluster sequences, zero tolerance."""
    t0 = time.time()
    for s in range(50):
        iseed = derive_seed(0x6C1, 10, s, "instance")
        rseed = derive_seed(0x6C1, 10, s, "run")
        inst = generate(10, 0.2, 10, 10, seed=iseed, ratio="1:1")
        recs = {}
        for pol in (Policy.DMAR_GCI, Policy.BP_GCI):
            params = ProtocolParams(k=4, psi=8, master_seed=rseed, policy=pol)
            recs[pol] = run_episode(inst, params, max_rounds=600,
                                    collect_rounds=True)
        d, douts = recs[Policy.DMAR_GCI]
        b, bouts = recs[Policy.BP_GCI]
        assert d.completed and b.completed, f"seed {s} incomplete"
        assert len(douts) == len(bouts), f"seed {s}: round counts differ"
        for ro, rb in zip(douts, bouts):
            assert ro.start_positions == rb.start_positions
            assert ro.cluster_sequence == rb.cluster_sequence
            assert ro.tokens == rb.tokens
            assert ro.em.moves_exploration == rb.em.moves_exploration
        assert d.exploration_cost == b.exploration_cost
        assert d.total_cost <= b.total_cost, (
            f"seed {s}: dominance violated {d.total_cost} > {b.total_cost}")
    dt = time.time() - t0
    assert dt < 600
    print(f"\nPASS GCI dominance: 50/50 seeds, {dt:.1f}s")


def test_cluster_tree_bounds():
    """1,000 SOAC fuzz runs (psi in {4,8}, c=4): height <= L(psi), size
    within the geometric bound, unanimous leader IDs."""
    t0 = time.time()
    rng = random.Random(0x1E1A)
    runs = 0
    while runs < 1000:
        psi = rng.choice([4, 8])
        k = rng.choice([1, 2, 3, 4])
        inst = generate(rng.randint(5, 15), rng.choice([0.0, 0.2]),
                        n_agents=rng.randint(2, 15), n_tasks=rng.randint(1, 6),
                        seed=rng.randrange(2 ** 30))
        world = inst.to_world()
        params = ProtocolParams(k=k, psi=psi, c=4)
        agents = {aid: AgentState(aid, pos) for aid, pos in world.agents.items()}
        views = {aid: compute_view(world, world.agents[aid], k, ViewMode.HOP)
                 for aid in agents}
        clusters, unassigned = run_soac(agents, views, params)
        L = tree_height_bound(psi)
        for cl in clusters:
            assert cl.height <= L, f"run {runs}: height {cl.height} > {L}"
            assert len(cl.members) <= max_cluster_size(psi, 4)
            for aid in cl.members:
                assert agents[aid].cluster_id == cl.leader
        runs += 1
    dt = time.time() - t0
    assert dt < 120
    print(f"\nPASS cluster tree bounds: 1000/1000 runs, {dt:.1f}s")


def test_leader_map_matches_omniscient_union():
    """Leader map after aggregation equals the omniscient union of member
    views (cluster-restricted, leader-relative) on 1,000 fuzzed clusters."""
    t0 = time.time()
    rng = random.Random(0x1E2A)
    checked = 0
    while checked < 1000:
        inst = generate(rng.randint(5, 14), rng.choice([0.0, 0.2, 0.3]),
                        n_agents=rng.randint(2, 12), n_tasks=rng.randint(1, 6),
                        seed=rng.randrange(2 ** 30))
        world = inst.to_world()
        k = rng.choice([1, 2, 3])
        params = ProtocolParams(k=k, psi=rng.choice([4, 8]))
        agents = {aid: AgentState(aid, pos) for aid, pos in world.agents.items()}
        views = {aid: compute_view(world, world.agents[aid], k, ViewMode.HOP)
                 for aid in agents}
        clusters, _ = run_soac(agents, views, params)
        for cl in clusters:
            m = run_lma(cl, agents, views, params)
            free, obstacles, tasks, members = set(), set(), set(), {}
            for aid in cl.members:
                v = views[aid]
                obstacles |= v.obstacle_cells
                free |= {c for c in v.cells if c not in v.obstacle_cells}
                tasks |= v.visible_tasks
                for xid, p in v.visible_agents.items():
                    if xid in cl.members:
                        members[xid] = p
            lx, ly = world.agents[cl.leader]
            assert m.free == {(x - lx, y - ly) for x, y in free}
            assert m.obstacles == {(x - lx, y - ly) for x, y in obstacles}
            assert m.tasks == {(x - lx, y - ly) for x, y in tasks}
            assert m.members == {a: (x - lx, y - ly)
                                 for a, (x, y) in members.items()}
            checked += 1
    dt = time.time() - t0
    assert dt < 120
    print(f"\nPASS map aggregation oracle: {checked} clusters, {dt:.1f}s")


def test_round_length_constant_across_grid_sizes():
    """Simulated steps per round identical across N in {100, 400}."""
    params = ProtocolParams(k=4, psi=8, master_seed=5)
    sched = build_schedule(params)
    per_round = set()
    for side in (10, 20):
        inst = generate(side, 0.2, side, side, seed=11, ratio="1:1")
        _rec, outs = run_episode(inst, params, max_rounds=20, collect_rounds=True)
        per_round |= {o.steps for o in outs}
    assert per_round == {sched.steps_per_round}
    print(f"\nPASS round-length constancy: every round takes "
          f"{sched.steps_per_round} steps at N=100 and N=400")


def test_completeness_under_step_cap():
    """100/100 seeded 10x10 runs complete within 100*N^2 steps."""
    t0 = time.time()
    cap = 100 * 100 ** 2
    for s in range(100):
        iseed = derive_seed(0x7404, 10, s, "instance")
        rseed = derive_seed(0x7404, 10, s, "run")
        inst = generate(10, 0.2, 10, 10, seed=iseed, ratio="1:1")
        rec, _ = run_episode(inst, ProtocolParams(k=4, psi=8, master_seed=rseed),
                             max_steps=cap)
        assert rec.completed, f"seed {s} failed within the step cap"
        assert rec.steps <= cap
    dt = time.time() - t0
    assert dt < 900
    print(f"\nPASS probabilistic completeness: 100/100 seeds, {dt:.1f}s")


def test_critical_radius(radius_sweep_rows):
    """Mean DMAR < mean BP for all k >= 6 on 20x20, and k* <= 6."""
    rows = radius_sweep_rows
    means = summarize(rows, ("k", "policy"))
    for k in (6, 8, 10, 12):
        dmar = means[(k, "dmar")]["mean"]
        bp = means[(k, "bp")]["mean"]
        assert dmar < bp, f"k={k}: DMAR {dmar:.1f} not below BP {bp:.1f}"
    kstar = critical_radius(rows)[20]
    assert kstar is not None and kstar <= 6, f"k* = {kstar}"
    print(f"\nPASS critical radius: k* = {kstar} <= 6 "
          f"(log2* of 400 = 4); DMAR below BP for all k >= 6")


def test_effective_range_improvement(radius_sweep_rows):
    """mean(BP)/mean(DMAR) >= 1.5 at the best k in {8, 10, 12}."""
    means = summarize(radius_sweep_rows, ("k", "policy"))
    ratios = {k: means[(k, "bp")]["mean"] / means[(k, "dmar")]["mean"]
              for k in (8, 10, 12)}
    best = max(ratios.values())
    assert best >= 1.5, f"best ratio {best:.2f} < 1.5 ({ratios})"
    shown = {k: round(r, 2) for k, r in ratios.items()}
    print(f"\nPASS effective range: BP/DMAR ratios {shown} -> "
          f"best {best:.2f} >= 1.5")


def test_centralized_comparison():
    """DMAR at k=8 within 4x centralized cost on 10 instances of 20x20, and
    cheaper in planner time."""
    t0 = time.time()
    tot_d = tot_c = 0
    ms_d = ms_c = 0.0
    for i in range(10):
        iseed = derive_seed(0xCE47, 20, 8, "1:1", i, "instance")
        rseed = derive_seed(0xCE47, 20, 8, "1:1", i, 0)
        inst = generate(20, 0.2, 20, 20, seed=iseed, ratio="1:1")
        rd, _ = run_episode(inst, ProtocolParams(k=8, psi=8, master_seed=rseed),
                            max_rounds=400)
        rc, _ = run_episode(inst, ProtocolParams(k=8, psi=8, master_seed=rseed,
                                                 policy=Policy.CENTRALIZED))
        assert rd.completed and rc.completed
        tot_d += rd.total_cost
        tot_c += rc.total_cost
        ms_d += rd.planner_time_ms
        ms_c += rc.planner_time_ms
    ratio = tot_d / tot_c
    assert ratio <= 4.0, f"cost ratio {ratio:.2f} > 4"
    assert ms_d < ms_c, f"DMAR planning {ms_d:.0f}ms not below centralized {ms_c:.0f}ms"
    dt = time.time() - t0
    assert dt < 1800
    print(f"\nPASS centralized comparison: cost ratio {ratio:.2f} <= 4, "
          f"planner {ms_d:.0f}ms < {ms_c:.0f}ms, {dt:.1f}s")


def test_view_mode_ordering():
    """Exact: LineOfSight subset HopReduced subset Hop on 1,000 fuzzed views;
    statistical: HopReduced DMAR cost >= Hop DMAR cost at matched params."""
    t0 = time.time()
    rng = random.Random(0x53E5)
    for _ in range(1000):
        w = rng.randint(3, 12)
        cells = [(x, y) for x in range(w) for y in range(w)]
        obstacles = set(rng.sample(cells, rng.randint(0, w * w // 3)))
        free = [c for c in cells if c not in obstacles]
        if not free:
            continue
        origin = rng.choice(free)
        world = GridWorld(w, w, obstacles=obstacles, tasks=set(), agents={})
        k = rng.randint(1, 5)
        hop = set(compute_view(world, origin, k, ViewMode.HOP).cells)
        red = set(compute_view(world, origin, k, ViewMode.HOP_REDUCED).cells)
        los = set(compute_view(world, origin, k, ViewMode.LINE_OF_SIGHT).cells)
        assert los <= red <= hop
    spec = SweepSpec(sides=[20], ks=[6, 8], ratios=["1:1"],
                     policies=[Policy.DMAR],
                     view_modes=[ViewMode.HOP, ViewMode.HOP_REDUCED],
                     instances_per_cell=10, runs_per_instance=5,
                     master_seed=0x53E5)
    records = sweep(spec, jobs=JOBS)
    mean = {}
    for vm in ("hop", "hop_reduced"):
        vals = [r.total_cost for r in records if r.view_mode == vm]
        mean[vm] = sum(vals) / len(vals)
    assert mean["hop_reduced"] >= mean["hop"], mean
    dt = time.time() - t0
    print(f"\nPASS view-mode ordering: nesting exact on 1000 views; "
          f"restricted-view mean {mean['hop_reduced']:.0f} >= "
          f"{mean['hop']:.0f}, {dt:.1f}s")


def test_collision_mode():
    """500 fuzzed collision-mode episodes keep positions pairwise distinct
    (the executor hard-asserts distinctness at every step end)."""
    t0 = time.time()
    rng = random.Random(0xC011)
    for i in range(500):
        inst = generate(rng.randint(5, 12), rng.choice([0.0, 0.2]),
                        n_agents=rng.randint(2, 8), n_tasks=rng.randint(1, 6),
                        seed=rng.randrange(2 ** 30), collision_mode=True)
        params = ProtocolParams(k=rng.choice([2, 3]), psi=4,
                                master_seed=rng.randrange(2 ** 30),
                                policy=rng.choice([Policy.DMAR, Policy.BP]),
                                collision_mode=True)
        rec, _ = run_episode(inst, params, max_rounds=12)
    dt = time.time() - t0
    assert dt < 600
    print(f"\nPASS collision mode: 500/500 episodes with pairwise-distinct "
          f"positions, {dt:.1f}s")


def test_determinism():
    """Double runs produce identical trajectory hashes and records (all
    fields except the wall-clock planner time, which cannot be replayed)."""
    rng = random.Random(0xDE7E)
    for pol in (Policy.DMAR, Policy.BP, Policy.DMAR_GCI, Policy.BP_GCI,
                Policy.CENTRALIZED):
        for _ in range(4):
            inst = generate(rng.randint(6, 12), 0.2, rng.randint(2, 8),
                            rng.randint(2, 8), seed=rng.randrange(2 ** 30))
            params = ProtocolParams(k=3, psi=8,
                                    master_seed=rng.randrange(2 ** 30),
                                    policy=pol)
            a, _ = run_episode(inst, params, max_rounds=80)
            b, _ = run_episode(inst, params, max_rounds=80)
            assert a.trajectory_hash == b.trajectory_hash
            assert a.semantic_tuple() == b.semantic_tuple()
    print("\nPASS determinism: 20 episode pairs bit-identical")
