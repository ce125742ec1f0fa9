"""Command-line front end: run, batch, gen, verify.

Exit codes: 0 clean, 1 I/O or validation failure, 2 ground-truth collision,
3 deadlock timeout, 4 verification bound violated.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .mathkit import make_rng
from .sim import engine, generators
from .sim import io as sio
from .sim import montecarlo as mc
from .sim.scenario import Scenario, ScenarioError

EXIT_OK, EXIT_IO, EXIT_COLLISION, EXIT_DEADLOCK, EXIT_BOUND = 0, 1, 2, 3, 4
OUT_ENV = "BUAVC_OUT_DIR"
MIN_SAMPLES = 10_000


def _err(msg: str):
    print(f"buavc: {msg}", file=sys.stderr)


def _out_dir(arg) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "out")


def _status_code(m) -> int:
    if m.n_collided > 0:
        return EXIT_COLLISION
    if m.deadlock_count > 0:
        return EXIT_DEADLOCK
    return EXIT_OK


def run_to_dir(sc: Scenario, out: Path) -> tuple:
    """Run one scenario, streaming the trajectory CSV; returns (metrics, metrics document)."""
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with open(out / "trajectory.csv", "w", encoding="utf-8", newline="") as fh:
        tw = sio.TrajectoryWriter(fh)
        res = engine.run(sc, keep_records=False, on_record=tw.write)
    wall = time.perf_counter() - t0
    doc = sio.write_metrics(out / "metrics.json", res.metrics, sc, wall)
    sio.save_scenario(sc, out / "scenario.json")
    return res.metrics, doc


def _load(path, overrides, seed):
    sc = sio.load_scenario(path)
    if overrides:
        sc = sio.apply_overrides(sc, overrides)
    if seed is not None:
        sc = replace(sc, seed=seed)
    return sc


def cmd_run(args) -> int:
    try:
        sc = _load(args.scenario, args.override, args.seed)
    except (OSError, ScenarioError) as e:
        _err(str(e))
        return EXIT_IO
    out = _out_dir(args.out)
    try:
        m, doc = run_to_dir(sc, out)
    except OSError as e:
        _err(str(e))
        return EXIT_IO
    except engine.SimulationBlowUp as e:
        _err(f"simulation aborted: {e}")
        return EXIT_IO
    print(json.dumps(doc, indent=2))
    return _status_code(m)


_AGG_FIELDS = ("collision_rate", "min_inter_robot_distance", "min_robot_obstacle_distance",
               "avg_travelled_distance", "completion_time", "deadlock_count", "empty_cell_steps")


def _batch_one(job):
    sc, out = job
    try:
        m, doc = run_to_dir(sc, Path(out))
        return sc.seed, doc, _status_code(m), None
    except Exception as e:  # reported per seed, the batch continues
        return sc.seed, None, EXIT_IO, f"{type(e).__name__}: {e}"


def aggregate(rows: list) -> dict:
    """Mean/std over rows per metric; None values are skipped."""
    agg = {}
    for k in _AGG_FIELDS:
        vals = [r[k] for r in rows if r.get(k) is not None]
        agg[k + "_mean"] = math.fsum(vals) / len(vals) if vals else None
        agg[k + "_std"] = float(np.std(vals)) if vals else None
    agg["runs"] = len(rows)
    return agg


def _seed_list(args) -> list:
    if args.seeds:
        seeds = []
        for part in args.seeds.split(","):
            if "-" in part.strip()[1:]:
                a, b = part.split("-", 1)
                seeds.extend(range(int(a), int(b) + 1))
            else:
                seeds.append(int(part))
        return seeds
    start = 0 if args.seed is None else args.seed
    return list(range(start, start + args.repeat))


def cmd_batch(args) -> int:
    try:
        base = _load(args.scenario, args.override, None)
        seeds = _seed_list(args)
    except (OSError, ScenarioError, ValueError) as e:
        _err(str(e))
        return EXIT_IO
    out = _out_dir(args.out)
    jobs = [(replace(base, seed=s), str(out / f"seed_{s}")) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_batch_one, jobs))
    else:
        results = [_batch_one(j) for j in jobs]
    results.sort(key=lambda r: seeds.index(r[0]))
    rows, codes = [], []
    for seed, doc, code, err in results:
        codes.append(code)
        if err:
            _err(f"seed {seed} failed: {err}")
            continue
        rows.append(doc)
    agg = aggregate(rows)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["seed"] + list(_AGG_FIELDS)
    with open(out / "batch.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r["seed"]] + ["" if r[k] is None else repr(r[k]) for k in _AGG_FIELDS])
        w.writerow(["mean"] + ["" if agg[k + "_mean"] is None else repr(agg[k + "_mean"]) for k in _AGG_FIELDS])
    with open(out / "aggregate.json", "w", encoding="utf-8") as fh:
        json.dump({"seeds": seeds, "failed": [r[0] for r in results if r[3]], **agg}, fh, indent=2)
        fh.write("\n")
    print(json.dumps(agg, indent=2))
    if EXIT_IO in codes:
        return EXIT_IO
    if EXIT_COLLISION in codes:
        return EXIT_COLLISION
    if EXIT_DEADLOCK in codes:
        return EXIT_DEADLOCK
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        base = sio.load_scenario(args.base, check=False) if args.base else Scenario()
        if args.dimension and args.dimension != base.dimension:
            d = args.dimension
            tpl = base.robots[0] if base.robots else generators._template(base)
            iso = lambda s: tuple(tuple(s * s if i == j else 0.0 for j in range(d)) for i in range(d))
            ws = (tuple([-5.0] * d), tuple([5.0] * d))
            base = replace(base, dimension=d, workspace=ws,
                           robots=(replace(tpl, own_cov=iso(0.04), others_cov=iso(0.06)),))
        if args.dynamics:
            tpl = generators._template(base)
            base = base.with_robots([replace(tpl, dynamics=args.dynamics)])
        if args.kind == "circle":
            sc = generators.gen_antipodal_circle(args.n, args.radius, base)
        elif args.kind == "asymmetric":
            sc = generators.gen_asymmetric_swap(args.n, args.seed or 0, base)
        else:
            sc = generators.gen_random_moving(args.n, args.density, args.seed or 0, base)
        if args.seed is not None:
            sc = replace(sc, seed=args.seed)
        if args.override:
            sc = sio.apply_overrides(sc, args.override)
        # round-trip through the canonical text so the file is the scenario
        text = sio.dumps_scenario(sc)
        sio.loads_scenario(text)
    except (OSError, ScenarioError, ValueError, generators.SamplingExhaustedError) as e:
        _err(str(e))
        return EXIT_IO
    if args.out and args.out != "-":
        try:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as e:
            _err(str(e))
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sym_pair(d: int, delta: float):
    from .separators import GaussianPosition
    S = np.eye(d) * 0.06 ** 2
    a, b = np.zeros(d), np.zeros(d)
    a[0], b[0] = -0.5, 0.5
    return mc.PairConfig(GaussianPosition(a, S), GaussianPosition(b, S), 0.2, delta)


def _verify_configs(args, rng):
    from .geometry import VPolytope
    from .separators import GaussianPosition, UncertainObstacle
    d = args.dim
    if args.kind == "theorem2":
        cfgs = [_sym_pair(d, args.delta)]
        for _ in range(args.configs - 1):
            gi = GaussianPosition(rng.uniform(-1, 1, d), mc.random_spd(rng, d))
            gj = GaussianPosition(rng.uniform(-1, 1, d) + 3.0, mc.random_spd(rng, d))
            cfgs.append(mc.PairConfig(gi, gj, 0.2, args.delta))
        return cfgs
    cfgs = []
    for k in range(args.configs):
        lo = np.zeros(d)
        size = np.ones(d) if k == 0 else rng.uniform(0.3, 1.5, d)
        S = np.eye(d) * 0.05 ** 2 if k == 0 else mc.random_spd(rng, d, 0.01, 0.1)
        obs = UncertainObstacle(VPolytope.box(lo, lo + size), S)
        p = -np.ones(d) if k == 0 else -rng.uniform(0.8, 2.0, d)
        G = np.eye(d) * 0.04 ** 2 if k == 0 else mc.random_spd(rng, d)
        cfgs.append(mc.ObstacleConfig(GaussianPosition(p, G), obs, 0.2, args.delta))
    return cfgs


def cmd_verify(args) -> int:
    if args.samples < MIN_SAMPLES:
        _err(f"--samples must be at least {MIN_SAMPLES}")
        return EXIT_IO
    if args.dim not in (2, 3):
        _err("--dim must be 2 or 3")
        return EXIT_IO
    rng = make_rng(0 if args.seed is None else args.seed, 4242)
    results = []
    if args.kind == "lemma1":
        results.append(mc.lemma1(args.eps, args.dim, args.samples, rng))
    elif args.kind == "lemma2":
        from .separators import GaussianPosition
        for _ in range(args.configs):
            g = GaussianPosition(rng.uniform(-1, 1, args.dim), mc.random_spd(rng, args.dim))
            a = rng.standard_normal(args.dim)
            a /= np.linalg.norm(a)
            b = float(a @ g.mean + rng.uniform(-0.3, 0.3))
            results.append(mc.lemma2(a, b, g, args.samples, rng,
                                     tol=mc.binomial_margin(0.5, args.samples)))
    elif args.kind == "separator-minimax":
        from .separators import GaussianPosition
        for _ in range(args.configs):
            gi = GaussianPosition(rng.uniform(-1, 1, 2), mc.random_spd(rng, 2))
            gj = GaussianPosition(rng.uniform(-1, 1, 2) + rng.uniform(0.2, 1.0, 2), mc.random_spd(rng, 2))
            results.append(mc.separator_minimax(gi, gj))
    else:
        for cfg in _verify_configs(args, rng):
            results.append(mc.mc_verify_theorem(cfg, args.samples, rng))
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_BOUND


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="buavc",
        description="Buffered uncertainty-aware Voronoi cell simulator and verifier.",
        epilog=f"Exit codes: 0 ok, 1 I/O/validation, 2 collision, 3 deadlock, 4 bound violated. "
               f"Output directory defaults to ${OUT_ENV} or ./out.",
    )
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, seed_help="override the scenario seed"):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
        sp.add_argument("--seed", type=int, help=seed_help)
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="edit a scenario field by dotted path, e.g. delta=0.3 or robots.*.r_s=0.3 (repeatable)")

    r = sub.add_parser("run", help="run one scenario; writes trajectory.csv and metrics.json")
    r.add_argument("scenario")
    common(r)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="run a scenario over several seeds and aggregate metrics")
    b.add_argument("scenario")
    common(b, "first seed when --repeat is used (default 0)")
    b.add_argument("--seeds", help="comma list or ranges, e.g. 0-9 or 1,5,9")
    b.add_argument("--repeat", type=int, default=10, help="number of consecutive seeds (default 10)")
    b.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    b.set_defaults(func=cmd_batch)

    g = sub.add_parser("gen", help="write a generated scenario document")
    g.add_argument("kind", choices=("circle", "asymmetric", "random"))
    g.add_argument("--n", type=int, default=8, help="number of robots")
    g.add_argument("--radius", type=float, default=4.0, help="circle radius (circle)")
    g.add_argument("--density", type=float, default=0.1, help="obstacle area fraction (random)")
    g.add_argument("--dynamics", help="robot dynamics for every robot")
    g.add_argument("--dimension", type=int, choices=(2, 3))
    g.add_argument("--base", help="scenario document providing defaults")
    g.add_argument("--out", help="output file ('-' or omitted: standard output)")
    g.add_argument("--seed", type=int, help="generator and scenario seed")
    g.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", help="Monte Carlo check of a probabilistic guarantee")
    v.add_argument("kind", choices=("lemma1", "theorem2", "theorem3", "separator-minimax", "lemma2"))
    v.add_argument("--samples", type=int, default=1_000_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--delta", type=float, default=0.05)
    v.add_argument("--eps", type=float, default=0.1)
    v.add_argument("--dim", type=int, default=2)
    v.add_argument("--configs", type=int, default=1, help="number of configurations (first is canonical)")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
