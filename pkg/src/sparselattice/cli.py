"""Batch command line: ``sparselattice <subcommand> ...``.

Every subcommand accepts ``--config file.ini``; values in the section named
after the subcommand (and, for gen-dense, ``[lattice]`` and ``[dense]``)
become defaults that explicit flags override. Each run writes a manifest
holding the arguments, their hash and the package version.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .baseline_dl import reduce_control_set_dl
from .clustering import kmeans_paths, load_cluster_model, save_cluster_model, write_cluster_report
from .errors import LatticeError, NoPlan
from .evaluation import (ResultRow, curvature_matching_score, emit_reports, read_results_csv,
                         write_results_csv)
from .geometry import (normalize_to_origin, read_paths_csv, read_sampled_csv, resample_by_arclength,
                       slice_sliding_windows, write_paths_csv)
from .lattice import LatticeConfig, default_headings, load_control_set, save_control_set
from .optimizer import (LearnerConfig, ObjectiveParams, learn_control_set, learner_manifest,
                        write_history_csv)
from .planner import (KINDS, PlannerConfig, SwathTable, load_scenario, plan, save_scenario,
                      scenario_from_path, synth_worlds)
from .spiral import DEFAULT_THETA_ENDPOINTS, DenseSetConfig, generate_dense_control_set


class UserError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def write_manifest(path: Path, command: str, args: dict, extra: dict | None = None) -> None:
    cfg = {k: v for k, v in sorted(args.items()) if k not in ("func", "config", "jobs")}
    blob = json.dumps(cfg, sort_keys=True, default=str)
    man = {
        "command": command,
        "args": json.loads(blob),
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": cfg.get("seed"),
        "version": _version(),
        "numpy": np.__version__,
    }
    if extra:
        man.update(extra)
    path.write_text(json.dumps(man, indent=1, sort_keys=True) + "\n")


def _manifest_for(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _need(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UserError(f"{what} not found: {p}")
    return p


# --- subcommands ---------------------------------------------------------------

def cmd_gen_dense(a, cp: configparser.ConfigParser):
    lat = LatticeConfig()
    if cp.has_section("lattice"):
        s = cp["lattice"]
        heads = _floats(s["headings"]) if "headings" in s else default_headings()
        lat = LatticeConfig(s.getfloat("dx", 0.4), s.getfloat("dy", 0.4), heads)
    d = cp["dense"] if cp.has_section("dense") else {}
    get = (lambda k, v: float(d[k]) if k in d else v)
    cfg = DenseSetConfig(
        (get("x_min", 0.4), get("x_max", 4.0)),
        (get("y_min", -2.0), get("y_max", 2.0)),
        _floats(d["theta_endpoints"]) if "theta_endpoints" in d else DEFAULT_THETA_ENDPOINTS,
        lat, get("kappa_max", 0.5), get("delta", 0.1))
    cs = generate_dense_control_set(cfg)
    out = Path(a.out)
    save_control_set(cs, out)
    write_manifest(_manifest_for(out), "gen-dense", vars(a),
                   {"dense_config": {"x_range": cfg.x_range, "y_range": cfg.y_range,
                                     "theta_endpoints": list(cfg.theta_endpoints),
                                     "kappa_max": cfg.kappa_max, "delta": cfg.delta,
                                     "lattice": lat.to_dict()},
                    "size": len(cs)})
    print(f"dense set: {len(cs)} actions -> {out}")


def cmd_ingest(a, cp):
    raw = read_paths_csv(_need(a.csv, "dataset"))
    if not 0 < a.split < 1:
        raise UserError("--split must lie strictly between 0 and 1")
    ids = sorted(raw)
    order = np.random.default_rng(a.seed).permutation(len(ids))
    n_train = int(round(a.split * len(ids)))
    train_ids = sorted(ids[i] for i in order[:n_train])
    test_ids = sorted(ids[i] for i in order[n_train:])
    train, test = [], []
    for pid in train_ids:
        sp = resample_by_arclength(raw[pid], a.delta)
        for j, w in enumerate(slice_sliding_windows(sp, a.window, a.step)):
            train.append((f"{pid}#{j}", normalize_to_origin(w)))
    for pid in test_ids:
        test.append((pid, resample_by_arclength(raw[pid], a.delta)))
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_paths_csv(train, out / "train.csv")
    write_paths_csv(test, out / "test.csv")
    write_manifest(out / "manifest.json", "ingest", vars(a),
                   {"train_paths": train_ids, "test_paths": test_ids, "train_slices": len(train)})
    print(f"{len(train_ids)} train paths ({len(train)} slices), {len(test_ids)} test paths -> {out}")


def _paths_file(path: str, name: str) -> Path:
    p = _need(path, "paths")
    return p / name if p.is_dir() else p


def cmd_cluster(a, cp):
    src = _paths_file(a.paths, "train.csv")
    paths = read_sampled_csv(src, a.delta)
    if not paths:
        raise UserError(f"no paths in {src}")
    ids = list(paths)
    lengths = {len(p) for p in paths.values()}
    if len(lengths) != 1:
        raise UserError(f"paths in {src} differ in length; slice them first")
    model = kmeans_paths([paths[i] for i in ids], a.k, a.max_iter, a.seed)
    out = Path(a.out)
    save_cluster_model(model, out, ids, a.seed)
    write_cluster_report(model, ids, out.with_suffix(".csv"))
    write_manifest(_manifest_for(out), "cluster", vars(a), {"inertia": model.inertia})
    print(f"{len(ids)} paths in {a.k} clusters, inertia {model.inertia:.6g} -> {out}")


def cmd_learn(a, cp):
    model = load_cluster_model(_need(a.clusters, "cluster file"))
    dense = load_control_set(_need(a.dense, "dense set"))
    if a.lam < 0:
        raise UserError("--lambda must be non-negative")
    params = ObjectiveParams(a.lam, len(dense))
    cfg = LearnerConfig(a.paths_per_round, a.candidates_per_round, a.patience, a.seed)
    log = (lambda m: print(m, file=sys.stderr)) if a.verbose else None
    state = learn_control_set(model, dense, params, cfg, log, jobs=a.jobs)
    out = Path(a.out)
    save_control_set(state.learned, out)
    write_history_csv(state, out.with_name(out.stem + ".history.csv"))
    write_manifest(_manifest_for(out), "learn", vars(a), learner_manifest(params, cfg, state))
    print(f"learned {len(state.learned)} actions, matching {state.matching:.6g} -> {out}")


def cmd_reduce_dl(a, cp):
    dense = load_control_set(_need(a.dense, "dense set"))
    if a.factor < 1:
        raise UserError("--factor must be at least 1")
    red = reduce_control_set_dl(dense, a.factor)
    out = Path(a.out)
    save_control_set(red, out)
    write_manifest(_manifest_for(out), "reduce-dl", vars(a), {"size": len(red)})
    print(f"reduced {len(dense)} -> {len(red)} actions -> {out}")


def cmd_synth(a, cp):
    if a.n < 1:
        raise UserError("--n must be at least 1")
    worlds = synth_worlds(a.n, a.seed, a.lane_width)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for w in worlds:
        save_scenario(w, out / f"scenario_{w.scenario_id}.json")
    write_manifest(out / "manifest.json", "synth", vars(a),
                   {"scenarios": [w.scenario_id for w in worlds]})
    print(f"{len(worlds)} worlds -> {out}")


def cmd_make_scenarios(a, cp):
    src = _paths_file(a.paths, "test.csv")
    paths = read_sampled_csv(src, a.delta)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    ids = []
    for n, (pid, p) in enumerate(paths.items()):
        if p.arc_length < 2.0:
            continue
        sid = f"{n:03d}"
        # lane-change direction alternates so left and right are balanced
        sc = scenario_from_path(normalize_to_origin(p), a.lane_width, a.kind, seed=a.seed + n,
                                scenario_id=sid)
        save_scenario(sc, out / f"scenario_{sid}.json")
        ids.append(sid)
    write_manifest(out / "manifest.json", "make-scenarios", vars(a), {"scenarios": ids})
    print(f"{len(ids)} {a.kind} scenarios -> {out}")


def _load_scenarios(d: Path):
    files = sorted(d.glob("scenario_*.json"))
    if not files:
        raise UserError(f"no scenario_*.json files in {d}")
    return [load_scenario(f) for f in files]


def cmd_plan(a, cp):
    scen = _load_scenarios(_need(a.scenarios, "scenario directory"))
    sets = {}
    for f in a.sets.split(","):
        p = _need(f.strip(), "control set")
        if p.stem in sets:
            raise UserError(f"duplicate set name {p.stem}")
        sets[p.stem] = load_control_set(p)
    if a.repeat < 1:
        raise UserError("--repeat must be at least 1")
    pcfg = PlannerConfig()

    def run(job):
        name, sc = job
        cs, sw = sets[name], swaths[name]
        times = []
        res = None
        for _ in range(a.repeat):
            t0 = time.perf_counter()
            try:
                res = plan(sc, cs, pcfg, sw)
            except NoPlan as exc:
                res = exc
            times.append(time.perf_counter() - t0)
        return name, sc, res, times

    swaths = {n: SwathTable(cs, pcfg.footprint, scen[0].grid.resolution) for n, cs in sets.items()}
    jobs = [(n, sc) for n in sets for sc in scen]
    if a.jobs > 1:
        with ThreadPoolExecutor(a.jobs) as pool:
            done = list(pool.map(run, jobs))
    else:
        done = [run(j) for j in jobs]

    rows, timing_rows, planned, curv = [], [], [], []
    for name, sc, res, times in done:
        ok = not isinstance(res, NoPlan)
        rows.append(ResultRow(sc.scenario_id, name, res.cost if ok else math.inf, res.expansions,
                              float(np.median(times)), ok))
        timing_rows.extend((sc.scenario_id, name, i, t) for i, t in enumerate(times))
        if ok and res.path is not None:
            planned.append((f"{sc.scenario_id}|{name}", res.path))
            score = (curvature_matching_score(res.path, sc.reference_path)
                     if len(res.path) >= 3 else math.nan)
            curv.append((sc.scenario_id, name, score))
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(rows, out / "results.csv")
    with open(out / "timings.csv", "w") as fh:
        fh.write("scenario_id,set_name,repeat,wall_time_s\n")
        for sid, name, i, t in timing_rows:
            fh.write(f"{sid},{name},{i},{t!r}\n")
    with open(out / "curvature.csv", "w") as fh:
        fh.write("scenario_id,set_name,curvature_score\n")
        for sid, name, s in curv:
            fh.write(f"{sid},{name},{float(s)!r}\n")
    write_paths_csv(planned, out / "paths.csv")
    write_manifest(out / "manifest.json", "plan", vars(a),
                   {"set_sizes": {n: len(cs) for n, cs in sets.items()},
                    "scenarios_dir": str(a.scenarios)})
    n_ok = sum(r.success for r in rows)
    print(f"{n_ok}/{len(rows)} plans succeeded -> {out}")


def cmd_report(a, cp):
    src = _need(a.results, "results directory")
    rows = read_results_csv(src / "results.csv")
    man = json.loads((src / "manifest.json").read_text())
    curv: dict[str, dict[str, float]] = {}
    cpath = src / "curvature.csv"
    if cpath.exists():
        for line in cpath.read_text().splitlines()[1:]:
            sid, name, s = line.split(",")
            curv.setdefault(name, {})[sid] = float(s)
    scenarios, planned = {}, {}
    sdir = Path(a.scenarios or man.get("scenarios_dir", ""))
    ppath = src / "paths.csv"
    if sdir.is_dir() and ppath.exists():
        scenarios = {s.scenario_id: s for s in _load_scenarios(sdir)}
        delta = 0.1
        for key, p in read_sampled_csv(ppath, delta).items():
            sid, name = key.split("|")
            planned.setdefault(sid, {})[name] = p
    dense = a.dense_name
    written = emit_reports(a.out, rows, man.get("set_sizes", {}), curv, scenarios, planned,
                           {"command": "report", "results": man, "version": _version()}, dense)
    print(f"wrote {len(written)} files -> {a.out}")


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparselattice", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", required=True)
    cores = os.cpu_count() or 1

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="INI file with defaults")
        sp.set_defaults(func=func)
        return sp

    s = add("gen-dense", cmd_gen_dense, "generate the dense control set")
    s.add_argument("--out", required=True)

    s = add("ingest", cmd_ingest, "resample, split and slice a path dataset")
    s.add_argument("--csv", required=True)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--window", type=float, default=10.0)
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--split", type=float, default=0.85)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = add("cluster", cmd_cluster, "k-means over training slices")
    s.add_argument("--paths", required=True)
    s.add_argument("--k", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--out", required=True)

    s = add("learn", cmd_learn, "learn a sparse control set")
    s.add_argument("--clusters", required=True)
    s.add_argument("--dense", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.311,
                   help="sparsity weight (0.311 or 0.0311 in the reference setup)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--paths-per-round", type=int, default=8)
    s.add_argument("--candidates-per-round", type=int, default=32)
    s.add_argument("--patience", type=int, default=3)
    s.add_argument("--jobs", type=int, default=cores)
    s.add_argument("--verbose", action="store_true")
    s.add_argument("--out", required=True)

    s = add("reduce-dl", cmd_reduce_dl, "reachability-preserving baseline reduction")
    s.add_argument("--dense", required=True)
    s.add_argument("--factor", type=float, default=1.1)
    s.add_argument("--out", required=True)

    s = add("synth", cmd_synth, "generate double-swerve worlds")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lane-width", type=float, default=3.7)
    s.add_argument("--out", required=True)

    s = add("make-scenarios", cmd_make_scenarios, "lane scenarios from test paths")
    s.add_argument("--paths", required=True)
    s.add_argument("--kind", choices=[k for k in KINDS if k != "double_swerve"], default="lane_follow")
    s.add_argument("--lane-width", type=float, default=3.7)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--out", required=True)

    s = add("plan", cmd_plan, "plan every scenario with every control set")
    s.add_argument("--scenarios", required=True)
    s.add_argument("--sets", required=True, help="comma-separated control set files")
    s.add_argument("--repeat", type=int, default=5)
    s.add_argument("--jobs", type=int, default=cores)
    s.add_argument("--out", required=True)

    s = add("report", cmd_report, "summary table and SVG figures")
    s.add_argument("--results", required=True)
    s.add_argument("--scenarios", help="scenario directory (default: the one used by plan)")
    s.add_argument("--dense-name", default="dense")
    s.add_argument("--out", default="report")
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> tuple:
    """Parse ``argv`` with defaults taken from the ``--config`` INI file."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    cp = configparser.ConfigParser()
    if known.config:
        if not Path(known.config).exists():
            raise UserError(f"config not found: {known.config}")
        cp.read(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((t for t in argv if t in sub.choices), None)
    if command is not None and cp.has_section(command):
        sp = sub.choices[command]
        dests = {act.dest for act in sp._actions}
        defaults = {}
        for key, val in cp[command].items():
            dest = key.replace("-", "_")
            dest = "lam" if dest == "lambda" else dest
            if dest not in dests:
                raise UserError(f"unknown option {key!r} in [{command}]")
            defaults[dest] = val
        for act in sp._actions:
            if act.dest in defaults:
                act.required = False
        sp.set_defaults(**defaults)
    return parser.parse_args(argv), cp


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args, cp = _apply_config(parser, argv)
        args.func(args, cp)
    except (UserError, LatticeError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
