"""Scenario orchestration and command-line entry points.

A scenario is a JSON file describing a measure, a potential, a coupling
grid, optional FEM oracles, and a list of named checks. ``run`` executes
one scenario and writes a sequences CSV, a bounds JSON, a counts CSV and
a pass/fail summary; ``suite`` runs a directory of scenarios and
aggregates; ``calibrate`` fits the minimal bound constants (A, B) that
dominate every oracle count in a suite.

Exit codes: 0 all checks pass, 1 check failure, 2 configuration error.
Outputs are byte-deterministic for a fixed seed and are written
atomically (temp file then rename).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bounds import (BoundConfig, corollary_bound, radial_bound,
                     theorem1_bound, weak_l1_norm)
from .decomposition import (build_annuli, calg_sequence, d_sequence,
                            g_sequence, radialize, scheme_rows)
from .fem import count_full, count_radial
from .measures import (AtomicMeasure, PotentialField, Similarity,
                       generate_ifs, generate_lebesgue, generate_polyline,
                       regular_polygon)

KNOWN_CHECKS = (
    "zero_bound",
    "radial_identity",
    "count1d_ge_1",
    "count1d_le_radial_bound",
    "count2d_ge_1",
    "count2d_le_theorem_bound",
    "weak_l1_homogeneity",
)


class ConfigError(ValueError):
    pass


def _req(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return cfg[key]


def _build_measure(cfg: dict) -> AtomicMeasure:
    gen = _req(cfg, "generator", "measure")
    if gen == "circle":
        radius = float(_req(cfg, "radius", "measure(circle)"))
        center = tuple(cfg.get("center", (0.0, 0.0)))
        segs = int(cfg.get("segments", 360))
        res = float(cfg.get("resolution", 60))
        m = generate_polyline(regular_polygon(radius, segs, center), res)
    elif gen == "circles":
        radii = _req(cfg, "radii", "measure(circles)")
        segs = int(cfg.get("segments", 360))
        res = float(cfg.get("resolution", 60))
        parts = [generate_polyline(regular_polygon(float(r), segs), res)
                 for r in radii]
        pts = np.vstack([p.points for p in parts])
        wts = np.concatenate([p.weights for p in parts])
        m = AtomicMeasure(pts, wts, alpha=1.0, generator_tag="circles")
    elif gen == "polyline":
        verts = _req(cfg, "vertices", "measure(polyline)")
        res = float(_req(cfg, "resolution", "measure(polyline)"))
        m = generate_polyline(verts, res)
    elif gen == "lebesgue":
        box = _req(cfg, "box", "measure(lebesgue)")
        res = int(_req(cfg, "resolution", "measure(lebesgue)"))
        m = generate_lebesgue(box, res)
    elif gen == "ifs-dust":
        size = float(cfg.get("size", 3.0))
        depth = int(_req(cfg, "depth", "measure(ifs-dust)"))
        off = 2.0 * size / 3.0
        maps = [Similarity(1.0 / 3.0, (ox, oy))
                for ox in (0.0, off) for oy in (0.0, off)]
        m = generate_ifs(maps, depth)
    else:
        raise ConfigError(f"measure: unknown generator '{gen}'")
    ov = cfg.get("ahlfors_override")
    if ov:
        m.c0_est = float(_req(ov, "c0", "measure.ahlfors_override"))
        m.c1_est = float(_req(ov, "c1", "measure.ahlfors_override"))
    return m


def _build_potential(cfg: dict, measure: AtomicMeasure) -> PotentialField:
    kind = _req(cfg, "kind", "potential")
    if kind == "constant":
        return PotentialField.constant(measure, float(_req(cfg, "value",
                                                           "potential")))
    if kind == "radial_profile":
        coefs = _req(cfg, "log_poly", "potential(radial_profile)")
        r = measure.radii()
        vals = np.polyval(list(map(float, coefs)), np.log1p(r))
        return PotentialField(np.maximum(vals, 0.0))
    if kind == "table":
        vals = np.asarray(_req(cfg, "values", "potential(table)"), dtype=float)
        if len(vals) != measure.n_atoms:
            raise ConfigError("potential(table): length mismatch with atoms")
        return PotentialField(vals)
    raise ConfigError(f"potential: unknown kind '{kind}'")


def _atomic_write(path: Path, data: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(rows: List[Tuple], header: str) -> str:
    lines = [header]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def run_scenario(path, out_dir, seed: int = 0) -> int:
    """Execute one scenario file; returns the exit code."""
    path = Path(path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        print(f"config error in {path}: {e}", file=sys.stderr)
        return 2
    try:
        return _run_loaded(cfg, path.stem, out_dir, seed)
    except ConfigError as e:
        print(f"config error in {path}: {e}", file=sys.stderr)
        return 2


def _run_loaded(cfg: dict, name: str, out_dir: Path, seed: int) -> int:
    name = cfg.get("name", name)
    gammas = list(map(float, _req(cfg, "gammas", "scenario")))
    if any(g <= 0 for g in gammas) or any(
            b <= a for a, b in zip(gammas, gammas[1:])):
        raise ConfigError("scenario: gammas must be positive and increasing")
    checks = cfg.get("checks", [])
    for c in checks:
        if c not in KNOWN_CHECKS:
            raise ConfigError(f"scenario: unknown check '{c}'")
    bc = cfg.get("bound_config", {})
    config = BoundConfig(A=float(bc.get("A", 100.0)), c=float(bc.get("c", 0.01)),
                         B=float(bc.get("B", 100.0)),
                         provenance=bc.get("provenance", "paper-placeholder"))

    measure = _build_measure(_req(cfg, "measure", "scenario"))
    V = _build_potential(_req(cfg, "potential", "scenario"), measure)

    scheme = None
    if cfg.get("annuli", True):
        try:
            scheme = build_annuli(measure)
        except ValueError:
            scheme = None

    results: Dict[str, bool] = {}
    bounds_out = {"config": {"A": config.A, "c": config.c, "B": config.B,
                             "provenance": config.provenance},
                  "per_gamma": []}
    count_rows: List[Tuple] = []

    nu = radialize(V, measure)
    gs = g_sequence(V, measure)
    cgs = calg_sequence(nu)
    if "radial_identity" in checks:
        ok = True
        for n in set(gs) | set(cgs):
            g = gs.get(n, 0.0)
            cg = 2.0 * math.pi * cgs.get(n, 0.0)
            if abs(g - cg) > 1e-12 * max(1.0, abs(g)):
                ok = False
        results["radial_identity"] = ok

    if "weak_l1_homogeneity" in checks:
        base = weak_l1_norm(list(gs.values()))
        ok = True
        for g in (2.0, 8.0, 1024.0):  # dyadic scalings are float-exact
            scaled = weak_l1_norm([g * v for v in gs.values()])
            if scaled != g * base:
                ok = False
        results["weak_l1_homogeneity"] = ok

    rf = cfg.get("radial_fem")
    f2 = cfg.get("fem_2d")
    for gamma in gammas:
        Vg = V.scaled(gamma)
        gs_g = g_sequence(Vg, measure)
        ds_g = d_sequence(Vg, measure, scheme) if scheme is not None else {}
        rep = theorem1_bound(gs_g, ds_g, config)
        rb = radial_bound(calg_sequence(radialize(Vg, measure)))
        cor = corollary_bound(Vg, measure, config)
        bounds_out["per_gamma"].append({
            "gamma": gamma, "radial_term": rep.radial_term,
            "nonradial_term": rep.nonradial_term, "total": rep.total,
            "radial_bound": rb, "corollary": cor,
            "weak_l1_G": weak_l1_norm(list(gs_g.values()))})

        c1d = c2d = ""
        if rf is not None:
            res = count_radial(radialize(Vg, measure),
                               tuple(rf.get("window", (-40.0, 40.0))),
                               float(rf.get("h", 0.05)),
                               coupling=2.0)  # doubled: radial/nonradial split
            c1d = res.negative_count
            if "count1d_ge_1" in checks:
                results[f"count1d_ge_1[gamma={gamma:g}]"] = c1d >= 1
            if "count1d_le_radial_bound" in checks:
                results[f"count1d_le_radial_bound[gamma={gamma:g}]"] = c1d <= rb
        if f2 is not None:
            res2 = count_full(V, measure, gamma, float(_req(f2, "L", "fem_2d")),
                              float(_req(f2, "h", "fem_2d")),
                              angular=int(f2.get("angular", 20)),
                              max_nodes=int(f2.get("max_nodes", 1280)))
            c2d = res2.negative_count
            if "count2d_ge_1" in checks:
                results[f"count2d_ge_1[gamma={gamma:g}]"] = c2d >= 1
            if "count2d_le_theorem_bound" in checks:
                results[f"count2d_le_theorem_bound[gamma={gamma:g}]"] = \
                    c2d <= rep.total
        count_rows.append((gamma, c1d, c2d, rep.total, rb))

    if "zero_bound" in checks:
        all_zero = not np.any(V.values > 0)
        rep0 = theorem1_bound(gs, d_sequence(V, measure, scheme)
                              if scheme is not None else {}, config)
        zero_counts = all(r[1] in ("", 0) and r[2] in ("", 0)
                          for r in count_rows)
        results["zero_bound"] = (not all_zero) or (
            rep0.total == 1.0 and zero_counts)

    if scheme is not None:
        seq_rows = [(n, lo, hi, mass, g, d) for (n, lo, hi, mass, g, d)
                    in scheme_rows(V, measure, scheme)]
    else:
        seq_rows = [(n, "", "", "", gs[n], "") for n in sorted(gs)]
    _atomic_write(out_dir / f"{name}_sequences.csv",
                  _csv(seq_rows, "n,inner_radius,outer_radius,mass,G_n,D_n"))
    _atomic_write(out_dir / f"{name}_counts.csv",
                  _csv(count_rows, "gamma,count_1d,count_2d,bound_total,radial_bound"))
    _atomic_write(out_dir / f"{name}_bounds.json", _canonical_json(bounds_out))
    summary = {"name": name, "seed": seed,
               "checks": {k: bool(v) for k, v in sorted(results.items())},
               "all_passed": all(results.values()) if results else True}
    _atomic_write(out_dir / f"{name}_summary.json", _canonical_json(summary))
    if not summary["all_passed"]:
        failed = [k for k, v in results.items() if not v]
        print(f"{name}: FAILED checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _run_one(args: Tuple[str, str, int]) -> Tuple[str, int]:
    p, out, seed = args
    return (Path(p).stem, run_scenario(p, out, seed))


def run_suite(directory, out_dir, seed: int = 0, jobs: int = 1) -> int:
    """Run every scenario JSON in a directory; aggregate and report."""
    directory = Path(directory)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(directory.glob("*.json"))
    tasks = [(str(f), str(out_dir), seed) for f in files]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    rows = [{"scenario": n, "exit_code": c} for n, c in outcomes]
    aggregate = {"scenarios": rows,
                 "n_failed": sum(1 for _, c in outcomes if c != 0),
                 "seed": seed}
    _atomic_write(out_dir / "aggregate.json", _canonical_json(aggregate))
    return 0 if aggregate["n_failed"] == 0 else 1


def calibrate(directory, out_dir, seed: int = 0) -> int:
    """Fit the minimal (A, B) so every oracle count in the suite is
    dominated; the result is labeled non-rigorous."""
    directory = Path(directory)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    need_A, need_B = 0.0, 0.0
    c_thresh = 0.01
    for f in sorted(directory.glob("*.json")):
        cfg = json.loads(f.read_text())
        try:
            measure = _build_measure(_req(cfg, "measure", "scenario"))
            V = _build_potential(_req(cfg, "potential", "scenario"), measure)
        except ConfigError as e:
            print(f"config error in {f}: {e}", file=sys.stderr)
            return 2
        try:
            scheme = build_annuli(measure)
        except ValueError:
            scheme = None
        rf = cfg.get("radial_fem")
        f2 = cfg.get("fem_2d")
        for gamma in map(float, cfg.get("gammas", [])):
            Vg = V.scaled(gamma)
            counts = []
            if rf is not None:
                counts.append(count_radial(
                    radialize(Vg, measure), tuple(rf.get("window", (-40, 40))),
                    float(rf.get("h", 0.05)), coupling=2.0).negative_count)
            if f2 is not None:
                counts.append(count_full(
                    V, measure, gamma, float(_req(f2, "L", "fem_2d")),
                    float(_req(f2, "h", "fem_2d")),
                    angular=int(f2.get("angular", 20)),
                    max_nodes=int(f2.get("max_nodes", 1280))).negative_count)
            if not counts:
                continue
            count = max(counts)
            gs_g = g_sequence(Vg, measure)
            radial = sum(4.0 * math.sqrt(v) for v in gs_g.values() if v > 0.25)
            if scheme is not None:
                ds_g = d_sequence(Vg, measure, scheme)
                dsum = sum(v for v in ds_g.values() if v > c_thresh)
                if count - 1 - radial > 0 and dsum > 0:
                    need_A = max(need_A, (count - 1 - radial) / dsum)
            r = measure.radii()
            logterm = float(np.sum(Vg.values * np.log1p(r) * measure.weights))
            from .orlicz import WeightedSampleSpace, llogl_pair, orlicz_norm_dual
            space = WeightedSampleSpace(measure.weights)
            bnorm = orlicz_norm_dual(Vg.values, space, llogl_pair(), 1.0) \
                if np.any(Vg.values > 0) else 0.0
            bracket = logterm + bnorm
            if count - 1 > 0 and bracket > 0:
                need_B = max(need_B, (count - 1) / bracket)
    calib = {"A": max(need_A, 1e-6), "B": max(need_B, 1e-6), "c": c_thresh,
             "provenance": "calibrated"}
    _atomic_write(out_dir / "calibration.json", _canonical_json(calib))
    print(json.dumps(calib, sort_keys=True))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="negspec",
        description="eigenvalue-count bounds vs FEM inertia oracles")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="negspec-out")
    ap.add_argument("--jobs", type=int, default=1)
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one scenario JSON")
    p_run.add_argument("scenario")
    p_suite = sub.add_parser("suite", help="run a directory of scenarios")
    p_suite.add_argument("directory")
    p_cal = sub.add_parser("calibrate", help="fit minimal bound constants")
    p_cal.add_argument("directory")
    args = ap.parse_args(argv)
    if args.command == "run":
        return run_scenario(args.scenario, args.out, args.seed)
    if args.command == "suite":
        return run_suite(args.directory, args.out, args.seed, args.jobs)
    return calibrate(args.directory, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
