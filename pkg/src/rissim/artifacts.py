"""Artifact writers and readers.

Every JSON document carries ``schema_version`` and a ``kind`` tag. Floats in
CSV files use fixed six-decimal formatting and non-finite values are written
as ``inf`` / ``-inf``; JSON replaces them with ``null``. Output depends only
on the inputs, so two runs with the same config are byte-identical.

Files written per run directory:

``coverage_grid.csv``  x, y, z, snr_db, then one covered_<t>db column per threshold
``metrics.json``       kind ``snr_map``: coverage, percentile SNRs, rates
``cdf.csv``            snr_db, cdf, ccdf at each distinct SNR value
``placement.jsonl``    one JSON object per placed RIS, in placement order
``rate_report.json``   kind ``rate_report``: before/after rates
``deployment.json``    kind ``deployment``: one coverage/rate table row
``fresnel_hist.csv``   bin_lo, bin_hi, count (last row is the overflow bin)
``summary.json``       kind ``sweep_summary``: table rows for every width
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .deployment import DeploymentResult, check_coherence, coverage_fraction
from .metrics import FresnelHistogram, RateSummary, SNRDistribution, percentile_snr, rate_report
from .propagation import snr_map
from .scene import SceneMap

SCHEMA_VERSION = 1
PERCENTILES = (5, 50)
CHECKPOINTS = (1, 5)

GRID_FILE = "coverage_grid.csv"
METRICS_FILE = "metrics.json"
CDF_FILE = "cdf.csv"
PLACEMENT_FILE = "placement.jsonl"
RATE_FILE = "rate_report.json"
DEPLOYMENT_FILE = "deployment.json"
FRESNEL_FILE = "fresnel_hist.csv"
SUMMARY_FILE = "summary.json"

KINDS = ("snr_map", "rate_report", "deployment", "sweep_summary")


class ArtifactError(ValueError):
    pass


# --------------------------------------------------------------------------
# formatting

def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6f}"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def _write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def ue_grid_hash(ue_pos) -> str:
    """Stable digest of the UE positions, used to match artifacts."""
    pos = np.asarray(ue_pos, dtype=float).reshape(-1, 3)
    text = "\n".join(",".join(fmt(v) for v in row) for row in pos)
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def threshold_label(t: float) -> str:
    return f"{float(t):g}"


# --------------------------------------------------------------------------
# SNR map artifacts

def write_coverage_grid(path, ue_pos, snr_db, thresholds) -> Path:
    ue_pos = np.asarray(ue_pos, dtype=float).reshape(-1, 3)
    snr_db = np.asarray(snr_db, dtype=float).ravel()
    header = ["x", "y", "z", "snr_db"] + [f"covered_{threshold_label(t)}db" for t in thresholds]
    rows = []
    for p, s in zip(ue_pos, snr_db):
        rows.append([fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(s)]
                    + [int(s >= t) for t in thresholds])
    return _write_csv(path, header, rows)


def write_cdf(path, snr_db) -> Path:
    x, cdf, ccdf = SNRDistribution(snr_db).curve()
    return _write_csv(path, ["snr_db", "cdf", "ccdf"],
                      [[fmt(a), fmt(b), fmt(c)] for a, b, c in zip(x, cdf, ccdf)])


def metrics_doc(scene: SceneMap, ue_pos, snr_db, thresholds, ris_count: int = 0) -> dict:
    """Summary of one SNR map."""
    snr_db = np.asarray(snr_db, dtype=float).ravel()
    dist = SNRDistribution(snr_db)
    rates = RateSummary.from_map(dist)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "snr_map",
        "n_ue": int(snr_db.size),
        "ue_grid_sha256": ue_grid_hash(ue_pos),
        "ris_count": int(ris_count),
        "n_bs": len(scene.bs_sites),
        "band": scene.band.to_dict(),
        "coverage": {threshold_label(t): coverage_fraction(snr_db, t) for t in thresholds},
        "snr_percentiles_db": {str(p): percentile_snr(dist, p) for p in PERCENTILES},
        "rates_bps_hz": {"cell_edge": rates.cell_edge, "median": rates.median,
                         "cell_average": rates.mean},
    }


def write_snr_map(out_dir, scene: SceneMap, ue_pos, snr_db, thresholds, ris_count: int = 0) -> dict:
    """coverage_grid.csv, metrics.json and cdf.csv for one map."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = metrics_doc(scene, ue_pos, snr_db, thresholds, ris_count)
    return {
        "grid": write_coverage_grid(out_dir / GRID_FILE, ue_pos, snr_db, thresholds),
        "metrics": write_json(out_dir / METRICS_FILE, doc),
        "cdf": write_cdf(out_dir / CDF_FILE, snr_db),
    }


# --------------------------------------------------------------------------
# deployment artifacts

def placement_records(result: DeploymentResult) -> list[dict]:
    out = []
    for entry, ris in zip(result.coverage_trace, result.placed):
        s = ris.site
        out.append({
            "schema_version": SCHEMA_VERSION,
            "iteration": entry.iteration,
            "ris_id": ris.id,
            "candidate": entry.candidate,
            "position": list(s.position),
            "normal": list(s.normal),
            "mount": s.mount,
            "building": s.building,
            "feeding_bs": s.feeding_bs,
            "width_m": ris.width_m,
            "newly_covered": entry.score,
            "margin_db": entry.margin_db,
            "coverage": entry.coverage,
        })
    return out


def write_placement_log(path, result: DeploymentResult) -> Path:
    lines = [json.dumps(_clean(r), sort_keys=True, allow_nan=False)
             for r in placement_records(result)]
    path = Path(path)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def write_fresnel_hist(path, hist: FresnelHistogram) -> Path:
    rows = [[fmt(lo), fmt(hi), int(c)] for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:],
                                                          hist.counts)]
    rows.append([fmt(hist.edges[-1]), "inf", int(hist.overflow)])
    return _write_csv(path, ["bin_lo", "bin_hi", "count"], rows)


def _improvement(before, after) -> dict:
    rep = rate_report(before, after)
    return {"cell_edge": rep.percent(rep.cell_edge_factor),
            "median": rep.percent(rep.median_factor),
            "cell_average": rep.percent(rep.mean_factor)}


def table_row(scene: SceneMap, result: DeploymentResult) -> dict:
    """Coverage and rate improvement at 0, 1, 5 and all placed RISs.

    Counts are reported both globally and per base station (global count
    divided by the number of base stations).
    """
    n_bs = len(scene.bs_sites)
    ue = result.state.ue_pos
    thr = result.state.threshold_db
    base = result.baseline_snr_db
    cols = {"no_ris": 0}
    cols.update({str(k): min(k, result.ris_count) for k in CHECKPOINTS})
    cols["total"] = result.ris_count
    maps = {result.ris_count: result.snr_db, 0: base}
    coverage, rates = {}, {}
    for label, k in cols.items():
        if k not in maps:
            maps[k] = snr_map(scene, ue, result.placed[:k])
        m = maps[k]
        coverage[label] = {"coverage": coverage_fraction(m, thr), "ris": k, "ris_per_bs": k / n_bs}
        if label != "no_ris":
            rates[label] = dict(_improvement(base, m), ris=k, ris_per_bs=k / n_bs)
    return {
        "width_m": result.state.width_m,
        "stop_reason": result.stop_reason,
        "target_met": result.stop_reason == "target_met",
        "ris_count": result.ris_count,
        "ris_per_bs": result.ris_count / n_bs,
        "ris_by_bs": {s.id: result.ris_per_bs().get(s.id, 0) for s in scene.bs_sites},
        "coverage": coverage,
        "rate_improvement_pct": rates,
    }


def deployment_doc(scene: SceneMap, result: DeploymentResult, n_candidates: int,
                   hist: FresnelHistogram | None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "deployment",
        "ue_grid_sha256": ue_grid_hash(result.state.ue_pos),
        "n_ue": int(result.state.ue_pos.shape[0]),
        "n_bs": len(scene.bs_sites),
        "n_candidates": int(n_candidates),
        "threshold_db": result.state.threshold_db,
        "coverage_target": result.coverage_target,
        "band": scene.band.to_dict(),
        "near_field_fraction": None if hist is None else hist.near_field_fraction,
        "coherence_max_abs_db": check_coherence(scene, result),
        "table": table_row(scene, result),
    }


def rate_doc(result: DeploymentResult) -> dict:
    doc = rate_report(result.baseline_snr_db, result.snr_db).to_dict()
    doc.update(schema_version=SCHEMA_VERSION, kind="rate_report",
               ue_grid_sha256=ue_grid_hash(result.state.ue_pos), ris_count=result.ris_count)
    return doc


def summary_doc(scene: SceneMap, rows, ue_pos, threshold_db: float, coverage_target: float) -> dict:
    """Sweep table: one row per width in ascending width order."""
    rows = sorted(rows, key=lambda r: r["width_m"])
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep_summary",
        "ue_grid_sha256": ue_grid_hash(ue_pos),
        "n_bs": len(scene.bs_sites),
        "threshold_db": threshold_db,
        "coverage_target": coverage_target,
        "band": scene.band.to_dict(),
        "rows": rows,
    }


# --------------------------------------------------------------------------
# readers

def read_json(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: malformed JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ArtifactError(f"{path}: expected a JSON object")
    _check_header(doc, path)
    if doc["kind"] not in KINDS:
        raise ArtifactError(f"{path}: unknown artifact kind {doc['kind']!r}")
    return doc


def _check_header(doc: dict, path):
    if "schema_version" not in doc:
        raise ArtifactError(f"{path}: missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ArtifactError(f"{path}: unsupported schema_version {doc['schema_version']!r}")
    if "kind" not in doc and not str(path).endswith(".jsonl"):
        raise ArtifactError(f"{path}: missing kind")


def read_placement_log(path) -> list[dict]:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{path}:{n}: malformed JSON line ({exc})") from None
        if not isinstance(rec, dict):
            raise ArtifactError(f"{path}:{n}: expected a JSON object")
        _check_header(rec, path)
        out.append(rec)
    return out


def _parse_cell(text: str):
    try:
        return float(text)
    except ValueError:
        raise ArtifactError(f"non-numeric CSV cell {text!r}") from None


def read_csv(path) -> dict:
    """Columns of a numeric CSV artifact as float arrays."""
    path = Path(path)
    rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
    if not rows:
        raise ArtifactError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    if any(len(r) != len(header) for r in body):
        raise ArtifactError(f"{path}: ragged CSV rows")
    try:
        data = np.array([[_parse_cell(c) for c in r] for r in body], dtype=float)
    except ArtifactError as exc:
        raise ArtifactError(f"{path}: {exc}") from None
    data = data.reshape(len(body), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def read_artifact(path):
    path = Path(path)
    if path.suffix == ".jsonl":
        return read_placement_log(path)
    if path.suffix == ".json":
        return read_json(path)
    if path.suffix == ".csv":
        return read_csv(path)
    raise ArtifactError(f"{path}: not a known artifact type")
