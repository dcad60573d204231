"""Command-line entry point.

    rissim baseline --config cband --out runs/base
    rissim place --config cband --width 5.3 --out runs/place
    rissim sweep --config mmwave --workers 4 --out runs/sweep
    rissim report runs/base runs/place

Flags override values read from ``--config``. Scene, config and artifact
errors exit with status 1 and a one-line message on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (CDF_FILE, DEPLOYMENT_FILE, FRESNEL_FILE, GRID_FILE, METRICS_FILE,
                        PLACEMENT_FILE, RATE_FILE, SUMMARY_FILE, ArtifactError, deployment_doc,
                        rate_doc, read_artifact, summary_doc, threshold_label, write_fresnel_hist,
                        write_json, write_placement_log, write_snr_map)
from .config import ConfigError, RunConfig, load_config, override
from .deployment import DeploymentResult, RISDeployment, sweep_sizes
from .metrics import fresnel_distribution
from .propagation import snr_map
from .scene import SceneMap, positions, ris_candidates, ue_grid

log = logging.getLogger("rissim")

ARTIFACT_FILES = (METRICS_FILE, RATE_FILE, DEPLOYMENT_FILE, SUMMARY_FILE, PLACEMENT_FILE,
                  GRID_FILE, CDF_FILE, FRESNEL_FILE)


# --------------------------------------------------------------------------
# commands

def _prepare(cfg: RunConfig):
    cfg.validate()
    scene = cfg.load_scene()
    ue = positions(ue_grid(scene))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return scene, ue, out


def cmd_baseline(cfg: RunConfig) -> dict:
    """SNR map with no RIS deployed."""
    scene, ue, out = _prepare(cfg)
    snr = snr_map(scene, ue)
    paths = write_snr_map(out, scene, ue, snr, cfg.all_thresholds(scene), 0)
    thr = cfg.target_threshold(scene)
    log.info("baseline: %d UEs, coverage at %s dB %.4f", len(ue), threshold_label(thr),
             float(np.mean(snr >= thr)))
    return paths


def _estimator(cfg: RunConfig, scene: SceneMap, width=None) -> RISDeployment:
    return RISDeployment(scene=scene, width_m=width, spacing_m=cfg.spacing_m,
                         wall_heights_m=cfg.wall_heights_m, height_fraction=cfg.height_fraction,
                         max_ris=cfg.max_ris, threshold_db=cfg.target_threshold(scene),
                         n_jobs=cfg.workers)


def write_run(out: Path, scene: SceneMap, result: DeploymentResult, n_candidates: int,
              thresholds) -> dict:
    """Every artifact of one placement run."""
    out.mkdir(parents=True, exist_ok=True)
    ue = result.state.ue_pos
    paths = write_snr_map(out, scene, ue, result.snr_db, thresholds, result.ris_count)
    paths["placement"] = write_placement_log(out / PLACEMENT_FILE, result)
    paths["rates"] = write_json(out / RATE_FILE, rate_doc(result))
    hist = None
    if result.ris_count:
        hist = fresnel_distribution(scene, result.placed, ue)
        paths["fresnel"] = write_fresnel_hist(out / FRESNEL_FILE, hist)
    paths["deployment"] = write_json(out / DEPLOYMENT_FILE,
                                     deployment_doc(scene, result, n_candidates, hist))
    log.info("width %g m: %d RIS, coverage %.4f -> %.4f (%s)", result.state.width_m,
             result.ris_count, result.baseline_coverage, result.final_coverage, result.stop_reason)
    return paths


def cmd_place(cfg: RunConfig) -> dict:
    """Greedy placement for one width; a config with ``sweep = true`` runs the sweep."""
    if cfg.sweep:
        return cmd_sweep(cfg)
    scene, ue, out = _prepare(cfg)
    est = _estimator(cfg, scene, cfg.width).fit(ue)
    return write_run(out, scene, est.result_, len(est.candidates_), cfg.all_thresholds(scene))


def width_dir(width_m: float) -> str:
    return f"width_{width_m:g}m"


def cmd_sweep(cfg: RunConfig) -> dict:
    """Independent placements for every width plus a combined table."""
    scene, ue, out = _prepare(cfg)
    widths = (cfg.width,) if cfg.width is not None else scene.band.ris_widths_m
    thresholds = cfg.all_thresholds(scene)
    cands = ris_candidates(scene, cfg.spacing_m, cfg.wall_heights_m, cfg.height_fraction)
    rows = sweep_sizes(scene, ue, widths, candidates=cands, estimator=_estimator(cfg, scene))
    paths = {"baseline": write_snr_map(out / "baseline", scene, ue, snr_map(scene, ue),
                                       thresholds, 0)}
    table = []
    for w, result in rows:
        paths[w] = write_run(out / width_dir(w), scene, result, len(cands), thresholds)
        table.append(read_artifact(paths[w]["deployment"])["table"])
    thr = cfg.target_threshold(scene)
    target = scene.band.coverage_target_fraction
    paths["summary"] = write_json(out / SUMMARY_FILE, summary_doc(scene, table, ue, thr, target))
    return paths


# --------------------------------------------------------------------------
# report

def _collect(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            found = [p / name for name in ARTIFACT_FILES if (p / name).exists()]
            # sweep directories: per-width maps; their table rows are in the summary
            for sub in sorted(d for d in p.iterdir() if d.is_dir()):
                if (sub / METRICS_FILE).exists():
                    found.append(sub / METRICS_FILE)
            if not found:
                raise ArtifactError(f"{p}: no artifacts found")
            files += found
        elif p.exists():
            files.append(p)
        else:
            raise ArtifactError(f"{p}: no such file or directory")
    return files


def _pct(x) -> str:
    return "   n/a" if x is None else f"{100.0 * x:5.1f}%"


def _num(x, spec="6.2f") -> str:
    return "n/a" if x is None else format(x, spec)


def _check_grids(docs):
    seen = {}
    for path, doc in docs:
        h = doc.get("ue_grid_sha256") if isinstance(doc, dict) else None
        if h is None:
            continue
        seen.setdefault(h, path)
    if len(seen) > 1:
        (h1, p1), (h2, p2) = list(seen.items())[:2]
        raise ArtifactError(f"UE grid mismatch: {p1} ({h1[:12]}) vs {p2} ({h2[:12]})")


def _table_lines(row: dict) -> str:
    cov = row["coverage"]
    rate = row["rate_improvement_pct"]
    cells = [f"{row['width_m']:6g}"]
    for k in ("no_ris", "1", "5", "total"):
        c = cov[k]
        cells.append(f"{_pct(c['coverage'])} [{c['ris_per_bs']:g}]")
    for k in ("1", "5", "total"):
        cells.append(f"{_num(rate[k]['cell_edge'], '8.1f')}%")
    cells.append(f"{_num(rate['total']['cell_average'], '7.1f')}%")
    return "  ".join(cells)


_TABLE_HEADER = ("width     no RIS       1 RIS        5 RIS        total        "
                 "edge@1     edge@5     edge@tot   avg@tot")


def cmd_report(paths, stream=None) -> int:
    """Print coverage and rate tables for the given artifacts or run directories."""
    stream = stream or sys.stdout
    files = _collect(paths)
    docs = [(str(f), read_artifact(f)) for f in files]
    _check_grids(docs)
    try:
        _render(docs, stream.write)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ArtifactError(f"malformed artifact: missing or invalid field {exc}") from None
    return 0


def _render(docs, w):
    maps = [(p, d) for p, d in docs if isinstance(d, dict) and d.get("kind") == "snr_map"]
    rates = [(p, d) for p, d in docs if isinstance(d, dict) and d.get("kind") == "rate_report"]
    tables = [(p, d["table"]) for p, d in docs
              if isinstance(d, dict) and d.get("kind") == "deployment"]
    for p, d in docs:
        if isinstance(d, dict) and d.get("kind") == "sweep_summary":
            tables += [(p, r) for r in d["rows"]]
    if maps:
        thr = sorted({t for _, d in maps for t in d["coverage"]}, key=float)
        w("SNR maps\n")
        w("  " + "  ".join(["RIS", "   UEs"] + [f"cov@{t}dB" for t in thr]
                           + ["  p5 SNR", " p50 SNR", " edge", "  avg", "source"]) + "\n")
        for p, d in maps:
            pcts = d["snr_percentiles_db"]
            r = d["rates_bps_hz"]
            cells = [f"{d['ris_count']:3d}", f"{d['n_ue']:6d}"]
            cells += [f"{_pct(d['coverage'].get(t)):>{len(t) + 6}}" for t in thr]
            cells += [_num(pcts.get("5"), "8.2f"), _num(pcts.get("50"), "8.2f"),
                      _num(r["cell_edge"], "5.2f"), _num(r["cell_average"], "5.2f"), p]
            w("  " + "  ".join(cells) + "\n")
    if rates:
        w("Rates (bps/Hz)\n")
        w("  stage   cell-edge   median   average  source\n")
        for p, d in rates:
            for stage in ("before", "after"):
                s = d[stage]
                w(f"  {stage:6s}  {_num(s['cell_edge_bps_hz'], '9.3f')}  "
                  f"{_num(s['median_bps_hz'], '7.3f')}  {_num(s['cell_average_bps_hz'], '8.3f')}"
                  f"  {p}\n")
            imp = d["improvement_pct"]
            w(f"  gain    {_num(imp['cell_edge'], '8.1f')}%  {_num(imp['median'], '6.1f')}%"
              f"  {_num(imp['cell_average'], '7.1f')}%  {p}\n")
    if tables:
        w("Coverage [RIS per BS] and rate improvement\n")
        w("  " + _TABLE_HEADER + "\n")
        for _, row in sorted(tables, key=lambda t: t[1]["width_m"]):
            w("  " + _table_lines(row) + "\n")
    logs = [(p, d) for p, d in docs if isinstance(d, list)]
    for p, d in logs:
        w(f"placements: {len(d)} ({p})\n")


# --------------------------------------------------------------------------
# argument parsing

def _run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file or bundled name (cband, mmwave)")
    p.add_argument("--scene", help="scene JSON file (overrides the config)")
    p.add_argument("--width", type=float, help="RIS side length in metres")
    p.add_argument("--max-ris", type=int, dest="max_ris", help="cap on placed surfaces")
    p.add_argument("--threshold-db", type=float, dest="threshold_db",
                   help="cell-edge SNR target in dB")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for generated scenes")
    p.add_argument("--workers", type=int, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rissim",
                                     description="RIS deployment coverage simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("baseline", "SNR map without RISs"),
                       ("place", "greedy RIS placement for one width"),
                       ("sweep", "placement for every configured width")):
        _run_flags(sub.add_parser(name, help=text))
    rep = sub.add_parser("report", help="summarize artifacts")
    rep.add_argument("paths", nargs="+", help="artifact files or run directories")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return override(cfg, scene=args.scene, width=args.width, max_ris=args.max_ris,
                    threshold_db=args.threshold_db, out=args.out, seed=args.seed,
                    workers=args.workers)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.paths)
        cfg = config_from_args(args)
        cmd = {"baseline": cmd_baseline, "place": cmd_place, "sweep": cmd_sweep}[args.command]
        paths = cmd(cfg)
        print(f"{args.command}: wrote {Path(cfg.out)}")
        return 0 if paths else 1
    except (ConfigError, ArtifactError, ValueError, OSError) as exc:
        print(f"rissim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
