"""Command-line experiment driver.

Subcommands: gen (emit instance files), run (single episode), sweep (batch
experiments to CSV), report (summary tables from CSV).  Exit code 0 on
success, nonzero with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import run_episode
from .grid import VIEW_MODES_BY_NAME
from .harness import SweepSpec, read_csv, report, sweep, write_csv
from .instances import deserialize, generate, serialize, validate
from .schedule import LambdaMode, Policy, ProtocolParams


def _add_gen(sub):
    p = sub.add_parser("gen", help="generate instance files")
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--obstacle-frac", type=float, default=0.2)
    p.add_argument("--agents", type=int, default=0, help="default: side")
    p.add_argument("--tasks", type=int, default=0, help="default: side")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--collision", action="store_true")
    p.add_argument("--out-dir", type=Path, required=True)


def _add_run(sub):
    p = sub.add_parser("run", help="run one episode")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--policy", choices=[pol.value for pol in Policy], default="dmar")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--psi", type=int, default=8)
    p.add_argument("--c", type=int, default=4)
    p.add_argument("--view", choices=sorted(VIEW_MODES_BY_NAME), default="hop")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lambda_override", type=int, default=None,
                   help="override the execution window length")
    p.add_argument("--collision", action="store_true")
    p.add_argument("--max-rounds", type=int, default=2000)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--json-out", type=Path, default=None)


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="batch experiments to CSV")
    p.add_argument("--spec", type=Path, default=None,
                   help="JSON file with SweepSpec fields")
    p.add_argument("--sides", type=int, nargs="+", default=None)
    p.add_argument("--ks", type=int, nargs="+", default=None)
    p.add_argument("--ratios", nargs="+", default=["1:1"])
    p.add_argument("--policies", nargs="+",
                   default=[Policy.DMAR.value, Policy.BP.value])
    p.add_argument("--views", nargs="+", default=["hop"])
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--psi", type=int, default=8)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)


def _add_report(sub):
    p = sub.add_parser("report", help="summaries from a sweep CSV")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--json", action="store_true",
                   help="emit machine-readable JSON instead of tables")


def _cmd_gen(args) -> int:
    n_agents = args.agents or args.side
    n_tasks = args.tasks or args.side
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        inst = generate(args.side, args.obstacle_frac, n_agents, n_tasks,
                        seed=args.seed + i, collision_mode=args.collision)
        path = args.out_dir / f"instance-{args.side}x{args.side}-s{args.seed + i}.txt"
        path.write_text(serialize(inst))
        print(path)
    return 0


def _cmd_run(args) -> int:
    inst = deserialize(args.instance.read_text())
    ok, why = validate(inst)
    if not ok:
        print(f"error: instance is unsolvable: {why}", file=sys.stderr)
        return 2
    params = ProtocolParams(
        k=args.k, psi=args.psi, c=args.c,
        view_mode=VIEW_MODES_BY_NAME[args.view],
        lambda_mode=(LambdaMode.OVERRIDE if args.lambda_override
                     else LambdaMode.DEFAULT),
        lambda_override=args.lambda_override,
        policy=Policy(args.policy), collision_mode=args.collision,
        master_seed=args.seed)
    record, _ = run_episode(inst, params, max_rounds=args.max_rounds,
                            max_steps=args.max_steps,
                            instance_id=args.instance.stem)
    payload = {f: getattr(record, f) for f in record.CSV_FIELDS}
    payload["trajectory_hash"] = record.trajectory_hash
    text = json.dumps(payload, indent=2, default=str)
    if args.json_out:
        args.json_out.write_text(text + "\n")
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    if args.spec:
        raw = json.loads(args.spec.read_text())
        raw["policies"] = [Policy(p) for p in raw.get("policies", ["dmar", "bp"])]
        raw["view_modes"] = [VIEW_MODES_BY_NAME[v]
                             for v in raw.pop("views", ["hop"])]
        spec = SweepSpec(**raw)
    else:
        if not args.sides or not args.ks:
            print("error: sweep needs --spec or both --sides and --ks",
                  file=sys.stderr)
            return 2
        spec = SweepSpec(sides=args.sides, ks=args.ks, ratios=args.ratios,
                         policies=[Policy(p) for p in args.policies],
                         view_modes=[VIEW_MODES_BY_NAME[v] for v in args.views],
                         instances_per_cell=args.instances,
                         runs_per_instance=args.runs,
                         master_seed=args.seed, psi=args.psi)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    records = sweep(spec, jobs=args.jobs)
    tmp = args.out.with_suffix(args.out.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        write_csv(records, fh)
    tmp.replace(args.out)
    print(f"{len(records)} rows -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    with open(args.infile) as fh:
        rows = read_csv(fh)
    rep = report(rows)
    if args.json:
        print(json.dumps(rep, indent=2))
        return 0
    print(f"{len(rows)} rows")
    print("\ncost by (side, k, policy):")
    print(f"{'side':>5} {'k':>4} {'policy':>12} {'n':>4} {'mean':>10} {'ci95':>8}")
    for key, s in rep["cost"].items():
        side, k, pol = key.split(",")
        ci = f"{s['ci95']:.2f}" if s["ci95"] is not None else "-"
        print(f"{side:>5} {k:>4} {pol:>12} {s['n']:>4} {s['mean']:>10.2f} {ci:>8}")
    print("\ncritical radius:")
    for side, kstar in rep["critical_radius"].items():
        star = rep["log2_star"][side]
        print(f"  side {side}: k* = {kstar if kstar is not None else 'no crossing'}"
              f"  (log2* N = {star})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dmar",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen(sub)
    _add_run(sub)
    _add_sweep(sub)
    _add_report(sub)
    args = parser.parse_args(argv)
    try:
        return {"gen": _cmd_gen, "run": _cmd_run, "sweep": _cmd_sweep,
                "report": _cmd_report}[args.command](args)
    except Exception as exc:  # CLI boundary: diagnostics, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
