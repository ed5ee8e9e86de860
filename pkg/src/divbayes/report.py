"""Delimited output and figure rendering for experiment sweeps.

summary.csv is the authoritative artifact (fixed column order, '.' decimal
point, '\n' line endings, UTF-8); figures are rendered next to it from the
same rows whenever the sweep varies a plottable axis.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

from .simulation import SweepResult

__all__ = ["SUMMARY_COLUMNS", "RunManifest", "summary_rows", "write_summary_csv", "render_figures"]

SUMMARY_COLUMNS = [
    "epsilon",
    "nu",
    "n",
    "divergence",
    "tuning",
    "prior",
    "bias_mu",
    "bias_sigma",
    "mse_mu",
    "mse_sigma",
    "mc_se_mu",
    "mc_se_sigma",
    "mean_ess",
    "failed_replicates",
]


def _fmt(value: float) -> str:
    return f"{value if value != 0 else 0.0:.10g}"


def summary_rows(results: list[SweepResult]) -> list[dict[str, str]]:
    rows = []
    for res in results:
        if res.table is None:
            continue
        cfg, tab = res.config, res.table
        rows.append(
            {
                "epsilon": _fmt(cfg.eps),
                "nu": _fmt(cfg.nu),
                "n": str(cfg.n),
                "divergence": cfg.divergence.label,
                "tuning": _fmt(cfg.divergence.tuning),
                "prior": str(cfg.prior),
                "bias_mu": _fmt(tab.bias_mu),
                "bias_sigma": _fmt(tab.bias_sigma),
                "mse_mu": _fmt(tab.mse_mu),
                "mse_sigma": _fmt(tab.mse_sigma),
                "mc_se_mu": _fmt(tab.mc_se_mu),
                "mc_se_sigma": _fmt(tab.mc_se_sigma),
                "mean_ess": _fmt(tab.mean_ess),
                "failed_replicates": str(tab.failed_replicates),
            }
        )
    return rows


def write_summary_csv(path: Path, results: list[SweepResult]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(summary_rows(results))
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


@dataclass
class RunManifest:
    config_path: str
    output_dir: str
    seed: int | None
    tool_version: str
    started: str
    finished: str = ""
    experiments: int = 0

    @staticmethod
    def start(config_path: str, output_dir: str, seed: int | None, version: str) -> "RunManifest":
        return RunManifest(
            config_path=config_path,
            output_dir=output_dir,
            seed=seed,
            tool_version=version,
            started=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        )

    def finish(self, experiments: int) -> None:
        self.finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.experiments = experiments

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.__dict__, indent=2) + "\n", encoding="utf-8")


def _series_key(row: dict[str, str]) -> str:
    if row["divergence"] == "kl":
        label = "kl"
    else:
        label = f"{row['divergence']}={float(row['tuning']):g}"
    return f"{label}, {row['prior']}"


def render_figures(out_dir: Path, results: list[SweepResult]) -> list[Path]:
    """Render bias/MSE curves against whichever axis the sweep varies.

    Produces one PNG per metric when the rows span more than one epsilon or
    nu value; returns the written paths (possibly empty).
    """
    rows = summary_rows(results)
    if len(rows) < 2:
        return []
    axis = None
    for candidate in ("epsilon", "nu", "n"):
        if len({row[candidate] for row in rows}) > 1:
            axis = candidate
            break
    if axis is None:
        return []

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[str, list[tuple[float, dict[str, str]]]] = {}
    for row in rows:
        series.setdefault(_series_key(row), []).append((float(row[axis]), row))

    written = []
    metrics = [("bias_mu", "bias of posterior mean (mu)"),
               ("mse_mu", "MSE of posterior mean (mu)"),
               ("bias_sigma", "bias of posterior mean (sigma)"),
               ("mse_sigma", "MSE of posterior mean (sigma)")]
    for column, title in metrics:
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for name in sorted(series):
            points = sorted(series[name], key=lambda p: p[0])
            xs = [p[0] for p in points]
            ys = [float(p[1][column]) for p in points]
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=name)
        ax.set_xlabel(axis)
        ax.set_ylabel(title)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        path = out_dir / f"{column}_vs_{axis}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def render_efficiency_curve(path: Path, gammas, values) -> None:
    """Plot the asymptotic-relative-efficiency curve h(gamma) to a file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(gammas, values, linewidth=1.5)
    ax.set_xlabel("gamma")
    ax.set_ylabel("asymptotic relative efficiency")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
