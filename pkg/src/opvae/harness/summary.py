"""Across-seed summaries: mean and normal-approximation 95% CI at each eval point."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from .config import UsageError

Z95 = 1.96
INSUFFICIENT = "insufficient seeds"


def mean_ci(values) -> tuple[float, float, str]:
    """(mean, half-width, flag). A single value has half-width 0 and is flagged."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise UsageError("no values to summarise")
    if v.size == 1:
        return float(v[0]), 0.0, INSUFFICIENT
    return float(v.mean()), float(Z95 * v.std(ddof=1) / np.sqrt(v.size)), ""


def aggregate(records) -> list[dict]:
    """Per experiment, method, pool and eval point: mean return across seeds with a 95% CI."""
    records = [r for r in records if r.status == "complete"]
    if not records:
        raise UsageError("aggregate needs at least one completed run record")
    groups: dict[tuple, list] = defaultdict(list)
    for r in records:
        for m in r.metrics:
            if m.get("kind") == "eval":
                groups[(r.name, r.method, m["pool"], int(m["episodes"]))].append((r.seed, m["mean_return"]))
    rows = []
    for (name, method, pool, step), vals in sorted(groups.items()):
        mean, half, flag = mean_ci([v for _, v in vals])
        rows.append({
            "experiment": name, "method": method, "pool": pool, "step": step, "mean": mean,
            "ci_lo": mean - half, "ci_hi": mean + half, "half_width": half,
            "n_seeds": len(vals), "flag": flag,
        })
    return rows


def final_points(rows: list[dict]) -> list[dict]:
    """Last eval point for every (experiment, method, pool)."""
    last: dict[tuple, dict] = {}
    for row in rows:
        key = (row["experiment"], row["method"], row["pool"])
        if key not in last or row["step"] > last[key]["step"]:
            last[key] = row
    return list(last.values())


def write_summary(rows: list[dict], out_dir, stem: str = "summary") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
    cols = ["experiment", "method", "pool", "step", "mean", "ci_lo", "ci_hi", "half_width", "n_seeds", "flag"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    json_path.write_text(json.dumps(rows, indent=1))
    return csv_path, json_path


def write_tidy(rows: list[dict], path) -> Path:
    """Plot-ready CSV with columns step, method, pool, mean, ci_lo, ci_hi."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["step", "method", "pool", "mean", "ci_lo", "ci_hi"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    return path
