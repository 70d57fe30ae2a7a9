"""Curvature matching and speedup reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegeneratePath, LengthMismatch
from .geometry import SampledPath, curvature_profile

RESULT_HEADER = ["scenario_id", "set_name", "cost", "expansions", "wall_time_s", "success"]


def curvature_matching_score(planned: SampledPath, reference: SampledPath) -> float:
    """Largest pointwise curvature gap over the common prefix of the two paths."""
    if len(planned) < 3 or len(reference) < 3:
        raise DegeneratePath("curvature needs at least 3 points")
    n = min(len(planned), len(reference))
    kp = curvature_profile(planned)[:n]
    kr = curvature_profile(reference)[:n]
    return float(np.max(np.abs(kp - kr)))


def matching_differential(candidate_scores, dense_scores) -> int:
    """#scenarios where the candidate is better minus #scenarios where it is worse."""
    c = np.asarray(candidate_scores, dtype=float)
    d = np.asarray(dense_scores, dtype=float)
    if c.shape != d.shape:
        raise LengthMismatch(f"{c.shape} vs {d.shape}")
    return int(np.sum(c < d)) - int(np.sum(c > d))


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    set_name: str
    cost: float
    expansions: int
    wall_time_s: float
    success: bool


def write_results_csv(rows: list[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in rows:
            w.writerow([r.scenario_id, r.set_name, repr(float(r.cost)), r.expansions,
                        repr(float(r.wall_time_s)), int(r.success)])


def read_results_csv(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != RESULT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(RESULT_HEADER)}")
        return [ResultRow(r["scenario_id"], r["set_name"], float(r["cost"]), int(r["expansions"]),
                          float(r["wall_time_s"]), bool(int(r["success"]))) for r in rd]


@dataclass(frozen=True)
class Speedup:
    set_name: str
    scenarios: int
    expansion_ratio: float
    wall_time_ratio: float


def speedup_report(rows: list[ResultRow], dense: str = "dense") -> dict[str, Speedup]:
    """Dense-over-set ratios of total expansions and wall time.

    Totals run over scenarios solved by both the dense set and the set in
    question. Wall time per (scenario, set) is the median of any repeats.
    """
    by = {}
    for r in rows:
        by.setdefault((r.set_name, r.scenario_id), []).append(r)
    dense_ids = {sid for (name, sid) in by if name == dense}
    if not dense_ids:
        raise ValueError(f"no results for the {dense!r} set")

    def agg(name, sid):
        rs = by[(name, sid)]
        return (all(r.success for r in rs), rs[0].expansions,
                float(np.median([r.wall_time_s for r in rs])))

    out = {}
    for name in sorted({n for n, _ in by}):
        common = []
        for sid in sorted(dense_ids):
            if (name, sid) not in by:
                raise ValueError(f"set {name!r} is missing scenario {sid!r}")
            ok_d, e_d, t_d = agg(dense, sid)
            ok_s, e_s, t_s = agg(name, sid)
            if ok_d and ok_s:
                common.append((e_d, e_s, t_d, t_s))
        if common:
            a = np.array(common, dtype=float)
            er = a[:, 0].sum() / a[:, 1].sum() if a[:, 1].sum() > 0 else math.inf
            tr = a[:, 2].sum() / a[:, 3].sum() if a[:, 3].sum() > 0 else math.inf
        else:
            er = tr = math.nan
        out[name] = Speedup(name, len(common), float(er), float(tr))
    return out


# --- reports ------------------------------------------------------------------

SUMMARY_HEADER = ["set_name", "set_size", "scenarios", "successes", "total_expansions",
                  "expansion_speedup", "wall_time_speedup", "matching_differential"]


def _fmt(v: float) -> str:
    return repr(round(float(v), 6))


def _svg(width: int, height: int, body: list[str]) -> str:
    return ("<svg xmlns=\"http://www.w3.org/2000/svg\" "
            f"width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
            + "\n".join(body) + "\n</svg>\n")


def scatter_svg(xs, ys, x_label: str, y_label: str, size: int = 400) -> str:
    """Scatter with a y = x diagonal; points below it favour the y-axis set."""
    pad = 40
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    hi = float(max(xs.max(initial=0.0), ys.max(initial=0.0), 1e-9)) * 1.05
    sc = (size - 2 * pad) / hi

    def px(x, y):
        return pad + x * sc, size - pad - y * sc

    body = [f'<rect width="{size}" height="{size}" fill="white"/>']
    x0, y0 = px(0, 0)
    x1, y1 = px(hi, hi)
    body.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="grey"/>')
    body.append(f'<text x="{size / 2:.0f}" y="{size - 8}" text-anchor="middle" font-size="12">{x_label}</text>')
    body.append(f'<text x="12" y="{size / 2:.0f}" font-size="12" transform="rotate(-90 12 {size / 2:.0f})" '
                f'text-anchor="middle">{y_label}</text>')
    for x, y in zip(xs, ys):
        cx, cy = px(x, y)
        body.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="steelblue"/>')
    return _svg(size, size, body)


PALETTE = ["black", "crimson", "seagreen", "royalblue", "darkorange", "purple"]


def scenario_svg(scenario, paths: dict[str, SampledPath], scale: float = 8.0) -> str:
    """Occupied cells in grey, reference path dashed, one polyline per planned path."""
    g = scenario.grid
    W, H = g.width * g.resolution * scale, g.height * g.resolution * scale

    def px(x, y):
        return (x - g.origin.x) * scale, H - (y - g.origin.y) * scale

    body = [f'<rect width="{W:.0f}" height="{H:.0f}" fill="white"/>']
    r = g.resolution * scale
    rows, cols = np.nonzero(g.occupied)
    for j, i in zip(rows, cols):
        body.append(f'<rect x="{i * r:.1f}" y="{H - (j + 1) * r:.1f}" width="{r:.1f}" '
                    f'height="{r:.1f}" fill="#ccc"/>')

    def poly(points, color, extra=""):
        pts = " ".join("{:.2f},{:.2f}".format(*px(x, y)) for x, y in points)
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>'

    body.append(poly(scenario.reference_path.points, "grey", ' stroke-dasharray="4 3"'))
    for n, (name, p) in enumerate(sorted(paths.items())):
        color = PALETTE[n % len(PALETTE)]
        body.append(poly(p.points, color))
        body.append(f'<text x="6" y="{16 + 14 * n}" font-size="12" fill="{color}">{name}</text>')
    return _svg(int(math.ceil(W)), int(math.ceil(H)), body)


def emit_reports(out_dir: str | Path, rows: list[ResultRow], set_sizes: dict[str, int],
                 curvature: dict[str, dict[str, float]] | None = None,
                 scenarios: dict | None = None, planned: dict | None = None,
                 manifest: dict | None = None, dense: str = "dense") -> dict[str, Path]:
    """Write summary.csv, curvature_scatter.svg, scenario_<id>.svg and manifest.json.

    ``curvature[set][scenario]`` holds curvature matching scores,
    ``planned[scenario][set]`` planned paths. Output is a pure function of
    the arguments apart from wall-time columns.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror}") from None
    curvature = curvature or {}
    written = {}

    summary = out / "summary.csv"
    speed = speedup_report(rows, dense) if rows else {}
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for name in sorted({r.set_name for r in rows}):
            mine = [r for r in rows if r.set_name == name]
            first = {}
            for r in mine:
                first.setdefault(r.scenario_id, r)
            diff = ""
            if name in curvature and dense in curvature:
                ids = sorted(set(curvature[name]) & set(curvature[dense]))
                diff = matching_differential([curvature[name][i] for i in ids],
                                             [curvature[dense][i] for i in ids])
            sp = speed[name]
            w.writerow([name, set_sizes.get(name, ""), len(first),
                        sum(r.success for r in first.values()),
                        sum(r.expansions for r in first.values()),
                        _fmt(sp.expansion_ratio), _fmt(sp.wall_time_ratio), diff])
    written["summary"] = summary

    scatter = out / "curvature_scatter.svg"
    others = sorted(n for n in curvature if n != dense)
    xs, ys = [], []
    for name in others:
        for sid in sorted(set(curvature[name]) & set(curvature.get(dense, {}))):
            xs.append(curvature[dense][sid])
            ys.append(curvature[name][sid])
    scatter.write_text(scatter_svg(xs, ys, f"{dense} curvature score", "candidate curvature score"))
    written["scatter"] = scatter

    for sid, paths in sorted((planned or {}).items()):
        p = out / f"scenario_{sid}.svg"
        p.write_text(scenario_svg(scenarios[sid], paths))
        written[f"scenario_{sid}"] = p

    man = out / "manifest.json"
    man.write_text(json.dumps(manifest or {}, indent=1, sort_keys=True) + "\n")
    written["manifest"] = man
    return written
