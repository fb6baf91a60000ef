import csv

import pytest

HEADER = ["instance_id", "seed", "side", "k", "psi", "ratio", "policy",
          "view_mode", "total_cost", "exploration_cost", "cluster_cost",
          "rounds", "steps", "mean_clusters_per_round", "planner_time_ms",
          "completed"]


def synth_row(side, k, policy, total, expl, clusters=2.0, ms=5.0, seed=1):
    return [f"s{side}-k{k}", seed, side, k, 8, "1:1", policy, "hop",
            total, expl, total - expl, 3, 1164, clusters, ms, 1]


@pytest.fixture
def fixture_csv(tmp_path):
    """Synthetic sweep with a constructed BP/DMAR crossing at k=4."""
    means = {
        ("dmar", 2): 300, ("dmar", 4): 150, ("dmar", 6): 120, ("dmar", 8): 110,
        ("bp", 2): 250, ("bp", 4): 200, ("bp", 6): 210, ("bp", 8): 220,
    }
    rows = []
    for side in (10, 20):
        for (pol, k), mean in means.items():
            for i, jitter in enumerate((-10, 0, 10)):
                rows.append(synth_row(side, k, pol, mean + jitter,
                                      expl=20 + k, seed=100 + i))
    path = tmp_path / "fixture.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        w.writerows(rows)
    return path
