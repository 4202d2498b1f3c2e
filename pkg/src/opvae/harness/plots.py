"""Learning-curve figures rendered next to the tidy CSV."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

POOL_TITLES = {"train": "weak generalization (training opponents)", "test": "strong generalization (held-out opponents)"}


def plot_curves(rows: list[dict], out_dir, baselines: dict | None = None) -> list[Path]:
    """One PNG per experiment with a panel per pool; shaded bands are 95% CIs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_exp: dict[str, list] = defaultdict(list)
    for r in rows:
        by_exp[r["experiment"]].append(r)
    paths = []
    for exp, exp_rows in sorted(by_exp.items()):
        pools = sorted({r["pool"] for r in exp_rows}, key=lambda p: (p != "train", p))
        fig, axes = plt.subplots(1, len(pools), figsize=(5.5 * len(pools), 4), squeeze=False)
        for ax, pool in zip(axes[0], pools):
            series = defaultdict(list)
            for r in exp_rows:
                if r["pool"] == pool:
                    series[r["method"]].append(r)
            for method, pts in sorted(series.items()):
                pts.sort(key=lambda r: r["step"])
                x = [p["step"] for p in pts]
                ax.plot(x, [p["mean"] for p in pts], label=method)
                ax.fill_between(x, [p["ci_lo"] for p in pts], [p["ci_hi"] for p in pts], alpha=0.25)
            for label, value in (baselines or {}).items():
                ax.axhline(value, ls="--", lw=1, color="grey")
                ax.annotate(label, (0, value), fontsize=8, color="grey", va="bottom")
            ax.set_title(POOL_TITLES.get(pool, pool), fontsize=10)
            ax.set_xlabel("training episodes")
            ax.set_ylabel("mean episode return")
            ax.legend(fontsize=8)
        fig.suptitle(exp)
        fig.tight_layout()
        path = out_dir / f"{exp}_curves.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
