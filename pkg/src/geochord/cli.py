"""Batch front door: config ingestion, pipeline orchestration, artifacts.

Subcommands: check-domain | solve-ogc | solve-brake | oracle | compare.
Config files are YAML or JSON with an explicit ``version: 1``.  The results
document is canonical (sorted keys, repr floats, no timestamps), so
identical configs produce byte-identical output; wall-clock information
goes to a sidecar log only.

Exit codes: 0 ok, 2 config-error, 3 unsupported, 4 runtime-error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import USE_NUMBA
from .brake import brake_orbit_from_ogc, build_omega_delta
from .domain import DomainError, build_domain, certify_domain, scan_special_geodesics_2d
from .flow import FlowConfig, CLS_OGC
from .metric import euclidean_metric, jacobi_metric_from_well, well_from_descriptor
from .minimax import dedup_geometric, family_sweep
from .oracle import oscillator_reference, shoot_ogc_2d
from .paths import chord_family, path_energy
from .plotting import svg_plot
from ._num import hausdorff


class ConfigError(ValueError):
    pass


class UnsupportedError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError("config file not found: %s" % path)
    text = p.read_text()
    try:
        if p.suffix in (".yaml", ".yml"):
            import yaml
            cfg = yaml.safe_load(text)
        else:
            cfg = json.loads(text)
    except Exception as exc:
        raise ConfigError("config parse failure: %s" % exc) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    if cfg.get("version") != 1:
        raise ConfigError("config must declare version: 1")
    return cfg


def _require(cfg: dict, key: str) -> dict:
    if key not in cfg:
        raise ConfigError("config section %r is required" % key)
    return cfg[key]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def write_results(out_dir: Path, doc: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2)
    (out_dir / "results.json").write_text(text + "\n")


def _log(out_dir: Path, msg: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "log.txt", "a") as fh:
        fh.write("[%s] %s\n" % (time.strftime("%Y-%m-%dT%H:%M:%S"), msg))


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------

def _build_domain_metric(cfg: dict, seed: int):
    desc = _require(cfg, "domain")
    dom = build_domain(desc)
    mcfg = cfg.get("metric", {"kind": "euclidean"})
    kind = mcfg.get("kind", "euclidean")
    if desc.get("kind") == "jacobi":
        metric = dom.metric
    elif kind == "euclidean":
        metric = euclidean_metric(dom.dim)
    else:
        raise UnsupportedError("metric kind %r is only available through a "
                               "jacobi domain" % kind)
    cert = certify_domain(dom, metric,
                          samples=int(cfg.get("certify", {}).get("samples", 200)),
                          safety=float(cfg.get("certify", {}).get("safety", 1.05)),
                          rng=np.random.default_rng(seed))
    return dom, metric, cert


def _sweep_grid(dom, cfg: dict) -> np.ndarray:
    sw = cfg.get("sweep", {})
    if dom.dim == 2:
        return dom.boundary_param_grid(int(sw.get("grid", 24)))
    return dom.boundary_param_grid((int(sw.get("polar", 5)),
                                    int(sw.get("azimuth", 8))))


def _flow_config(dom, cfg: dict, grid, metric) -> FlowConfig:
    fl = dict(cfg.get("flow", {}))
    n = int(fl.pop("n", 200))
    m0_sq = fl.pop("m0_sq", None)
    if m0_sq is None:
        pts = dom.boundary_point(grid)
        e_max = 0.0
        for i in range(len(pts)):
            for j in range(i, len(pts)):
                p0 = chord_family(dom, pts[i], pts[j], max(16, n // 8))
                e_max = max(e_max, path_energy(metric, p0))
        m0_sq = 1.5 * e_max
    return FlowConfig.from_domain(dom, n=n, m0_sq=float(m0_sq), **fl)


def _write_sweep_artifacts(out_dir: Path, dom, report, cfg):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "levels.csv", "w") as fh:
        fh.write("index,energy\n")
        for k, e in enumerate(report.energies):
            fh.write("%d,%r\n" % (k, float(e)))
    with open(out_dir / "members.csv", "w") as fh:
        fh.write("i,j,class,energy,iterations\n")
        for row in report.members:
            i, j = row["pair"]
            e = "" if row["energy"] is None else repr(float(row["energy"]))
            fh.write("%d,%d,%s,%s,%d\n" % (i, j, row["cls"], e, row["iterations"]))
    if cfg.get("output", {}).get("traces", False):
        tr_dir = out_dir / "traces"
        tr_dir.mkdir(exist_ok=True)
        for k, c in enumerate(report.distinct):
            if not c.trace:
                continue
            with open(tr_dir / ("ogc_%02d.csv" % k), "w") as fh:
                fh.write("iteration,energy,phase,strip_min,in_lambda,in_gamma\n")
                for row in c.trace:
                    fh.write("%d,%r,%s,%r,%d,%d\n"
                             % (row[0], row[1], row[2], row[3],
                                int(row[4]), int(row[5])))


def _outline(dom, k: int = 256) -> np.ndarray:
    if dom.dim == 2:
        return dom.boundary_point(np.arange(k) * (2 * np.pi / k))
    th = np.arange(k) * (2 * np.pi / k)
    eq = np.column_stack([np.full(k, np.pi / 2), th])
    return dom.boundary_point(eq)


def _report_doc(report) -> dict:
    return {
        "count": report.count,
        "target": report.target,
        "meets_target": report.meets_target,
        "energies": [float(e) for e in report.energies],
        "histogram": report.histogram,
        "flags": report.flags,
        "chords": [{
            "energy": float(c.energy),
            "iterations": c.iterations,
            "residuals": c.residuals,
            "nodes": c.path.nodes.tolist(),
        } for c in report.distinct],
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_check_domain(cfg, out_dir: Path, seed: int, threads: int) -> dict:
    dom, metric, cert = _build_domain_metric(cfg, seed)
    doc = {"command": "check-domain", "constants": cert}
    scan_cfg = cfg.get("scan", {})
    if scan_cfg.get("enabled", False):
        if dom.dim != 2:
            raise UnsupportedError("special-geodesic scan needs dimension 2")
        L = float(scan_cfg.get("length", dom.diameter * 2.0))
        chords, verdict = scan_special_geodesics_2d(
            dom, metric, L, int(scan_cfg.get("grid", 24)))
        doc["scan"] = {"verdict": verdict,
                       "chords": [{k: v for k, v in c.items() if k != "nodes"}
                                  for c in chords]}
    return doc


def cmd_solve_ogc(cfg, out_dir: Path, seed: int, threads: int) -> dict:
    dom, metric, cert = _build_domain_metric(cfg, seed)
    grid = _sweep_grid(dom, cfg)
    fc = _flow_config(dom, cfg, grid, metric)
    report = family_sweep(dom, metric, grid, fc, threads=threads)
    _write_sweep_artifacts(out_dir, dom, report, cfg)
    if dom.dim == 2 and cfg.get("output", {}).get("svg", True):
        svg_plot(_outline(dom),
                 [(c.path.nodes, "chord %d: F=%.4g" % (k, c.energy))
                  for k, c in enumerate(report.distinct)],
                 str(out_dir / "chords.svg"))
    return {"command": "solve-ogc", "constants": cert, "report": _report_doc(report)}


def cmd_solve_brake(cfg, out_dir: Path, seed: int, threads: int) -> dict:
    well = well_from_descriptor(_require(cfg, "well"))
    well.validate()
    jc = cfg.get("jacobi", {})
    delta = float(jc.get("delta", 0.05))
    dom = build_omega_delta(well, delta,
                            delta_star=jc.get("delta_star"),
                            quad_steps=int(jc.get("quad_steps", 24)))
    metric = dom.metric
    cert = certify_domain(dom, metric,
                          samples=int(cfg.get("certify", {}).get("samples", 200)),
                          safety=float(cfg.get("certify", {}).get("safety", 1.05)),
                          rng=np.random.default_rng(seed))
    grid = _sweep_grid(dom, cfg)
    fc = _flow_config(dom, cfg, grid, metric)
    report = family_sweep(dom, metric, grid, fc, threads=threads)
    _write_sweep_artifacts(out_dir, dom, report, cfg)
    orbits = []
    orbit_docs = []
    for k, c in enumerate(report.distinct):
        orb = brake_orbit_from_ogc(well, c)
        orbits.append(orb)
        orbit_docs.append({
            "chord_energy": float(c.energy),
            "half_period": float(orb.half_period),
            "energy_residual": float(orb.energy_residual),
            "brake_points": orb.brake_points.tolist(),
            "jacobi_length": float(orb.jacobi_length),
            "t": orb.t.tolist(),
            "q": orb.q.tolist(),
            "qdot": orb.qdot.tolist(),
        })
    if dom.dim == 2 and cfg.get("output", {}).get("svg", True):
        well_outline = _well_outline(well)
        polys = [(orb.q, "orbit %d: T=%.4f" % (k, orb.half_period))
                 for k, orb in enumerate(orbits)]
        polys.insert(0, (_outline(dom), "shell boundary"))
        svg_plot(well_outline, polys, str(out_dir / "orbits.svg"))
    return {"command": "solve-brake", "constants": cert,
            "report": _report_doc(report), "orbits": orbit_docs}


def _well_outline(well, k: int = 256) -> np.ndarray:
    th = np.arange(k) * (2 * np.pi / k)
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    r = np.array([well.boundary_radius(u) for u in dirs])
    return dirs * r[:, None]


def cmd_oracle(cfg, out_dir: Path, seed: int, threads: int) -> dict:
    ocfg = cfg.get("oracle", {})
    if "well" in cfg and cfg.get("oracle", {}).get("mode", "auto") != "shooting":
        well = well_from_descriptor(cfg["well"])
        orbits, warns = oscillator_reference(well.lam, well.E)
        return {"command": "oracle", "mode": "closed-form",
                "warnings": warns,
                "orbits": [{
                    "half_period": float(o.half_period),
                    "brake_points": o.brake_points.tolist(),
                    "energy_residual": float(o.energy_residual),
                    "q": o.q.tolist(), "t": o.t.tolist(),
                } for o in orbits]}
    dom, metric, cert = _build_domain_metric(cfg, seed)
    if dom.dim != 2:
        raise UnsupportedError("shooting oracle needs dimension 2")
    chords, info = shoot_ogc_2d(dom, metric, int(ocfg.get("grid", 64)),
                                tol=float(ocfg.get("tol", 1e-10)))
    distinct = _dedup_shots(chords, 0.02 * dom.diameter)
    return {"command": "oracle", "mode": "shooting", "info": info,
            "constants": cert,
            "roots": [{"theta": c.theta, "energy": c.energy} for c in chords],
            "chords": [{"theta": c.theta, "energy": c.energy,
                        "nodes": c.path.nodes.tolist()} for c in distinct]}


def _dedup_shots(chords, tol):
    reps = []
    for c in sorted(chords, key=lambda c: (c.energy, c.theta)):
        if all(hausdorff(c.path.nodes, r.path.nodes) > tol for r in reps):
            reps.append(c)
    return reps


def cmd_compare(cfg, out_dir: Path, seed: int, threads: int) -> dict:
    if "well" in cfg:
        solver_doc = cmd_solve_brake(cfg, out_dir, seed, threads)
        well = well_from_descriptor(cfg["well"])
        refs, _ = oscillator_reference(well.lam, well.E)
        rows = []
        for od in solver_doc["orbits"]:
            q = np.asarray(od["q"])
            best = min(range(len(refs)),
                       key=lambda i: hausdorff(q, refs[i].q))
            ref = refs[best]
            rows.append({
                "matched_axis": int(ref.meta["axis"]),
                "hausdorff": hausdorff(q, ref.q),
                "half_period_err": abs(od["half_period"] - ref.half_period),
            })
        return {"command": "compare", "mode": "brake",
                "solver": solver_doc, "matches": rows}
    solver_doc = cmd_solve_ogc(cfg, out_dir, seed, threads)
    dom, metric, _ = _build_domain_metric(cfg, seed)
    chords, info = shoot_ogc_2d(dom, metric,
                                int(cfg.get("oracle", {}).get("grid", 64)))
    distinct = _dedup_shots(chords, 0.02 * dom.diameter)
    rows = []
    for cd in solver_doc["report"]["chords"]:
        nodes = np.asarray(cd["nodes"])
        if distinct:
            d = min(hausdorff(nodes, s.path.nodes) for s in distinct)
        else:
            d = None
        rows.append({"energy": cd["energy"], "oracle_hausdorff": d})
    return {"command": "compare", "mode": "ogc", "solver": solver_doc,
            "oracle_info": info,
            "oracle_energies": [c.energy for c in distinct],
            "matches": rows}


COMMANDS = {
    "check-domain": cmd_check_domain,
    "solve-ogc": cmd_solve_ogc,
    "solve-brake": cmd_solve_brake,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="geochord",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="out")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--version", action="version", version=__version__)
    args = ap.parse_args(argv)
    out_dir = Path(args.out)

    def fail(kind: str, message: str, code: int) -> int:
        err = {"error": {"kind": kind, "message": message}}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        try:
            write_results(out_dir, err)
        except OSError:
            pass
        return code

    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        _log(out_dir, "start %s config=%s numba=%s"
             % (args.command, args.config, USE_NUMBA))
        doc = COMMANDS[args.command](cfg, out_dir, seed, max(1, args.threads))
        doc["config_version"] = 1
        write_results(out_dir, doc)
        _log(out_dir, "done %s" % args.command)
        return 0
    except ConfigError as exc:
        return fail("config-error", str(exc), 2)
    except UnsupportedError as exc:
        return fail("unsupported", str(exc), 3)
    except Exception as exc:  # noqa: BLE001 - single CLI reporting point
        return fail("runtime-error", "%s: %s" % (type(exc).__name__, exc), 4)


if __name__ == "__main__":
    sys.exit(main())
