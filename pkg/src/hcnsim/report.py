"""Result serialisation: metrics CSV, per-figure plot data and figures.

All delimited output uses dot decimals, ``\\n`` line endings and repr float
formatting, so files are byte-stable across platforms and runs.  The three
figures (on-grid power, throughput, energy efficiency over user density)
are emitted both as long-format CSV + gnuplot script and as rendered PNGs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .simulation import MetricsRow

#: Schema marker written as the first (comment) line of metrics.csv.
METRICS_SCHEMA = "hcnsim metrics schema v1"

METRICS_HEADER = ("scheme,lambda_e,density,grid_power_w,grid_power_stderr,"
                  "sum_rate_bps,sum_rate_stderr,ee_bits_per_joule,ee_stderr,"
                  "unconverged_frac,unserved_frac,samples")


def _f(x: float) -> str:
    return repr(float(x))


def metrics_csv_text(rows: list[MetricsRow]) -> str:
    lines = [f"# {METRICS_SCHEMA}", METRICS_HEADER]
    for r in rows:
        lines.append(",".join([
            r.scheme.label, _f(r.lambda_e), _f(r.density),
            _f(r.grid_power_w), _f(r.grid_power_stderr),
            _f(r.sum_rate_bps), _f(r.sum_rate_stderr),
            _f(r.ee_bits_per_joule), _f(r.ee_stderr),
            _f(r.unconverged_frac), _f(r.unserved_frac), str(r.samples),
        ]))
    return "\n".join(lines) + "\n"


def write_metrics_csv(rows: list[MetricsRow], path: str) -> str:
    with open(path, "w", newline="") as fh:
        fh.write(metrics_csv_text(rows))
    return path


@dataclass(frozen=True)
class _FigureSpec:
    stem: str
    ylabel: str
    value: str   # MetricsRow attribute
    stderr: str


FIGURES = (
    _FigureSpec("power", "on-grid power [W]", "grid_power_w", "grid_power_stderr"),
    _FigureSpec("throughput", "network sum rate [bit/s]", "sum_rate_bps", "sum_rate_stderr"),
    _FigureSpec("ee", "energy efficiency [bit/J]", "ee_bits_per_joule", "ee_stderr"),
)


def _series(rows: list[MetricsRow]) -> list[tuple[tuple, list[MetricsRow]]]:
    """Rows grouped into (scheme, lambda_e) series, both levels sorted."""
    keys = sorted({(int(r.scheme), r.lambda_e) for r in rows})
    out = []
    for scheme_val, lam in keys:
        pts = sorted((r for r in rows if int(r.scheme) == scheme_val and r.lambda_e == lam),
                     key=lambda r: r.density)
        out.append(((scheme_val, lam), pts))
    return out


def emit_plot_data(rows: list[MetricsRow], out_dir: str) -> list[str]:
    """Write one long-format CSV and one gnuplot script per figure.

    Series are separated by blank lines so gnuplot's ``index`` selects
    them; any CSV reader that skips blanks and ``#`` comments sees a plain
    long table.  Raises ValueError if there is nothing to plot.
    """
    if not rows:
        raise ValueError("no metrics rows to plot")
    groups = _series(rows)
    written = []
    for spec in FIGURES:
        csv_name = f"plot_{spec.stem}.csv"
        lines = [f"# {METRICS_SCHEMA}: {spec.stem}",
                 "scheme,lambda_e,density,value,stderr"]
        for k, ((_, lam), pts) in enumerate(groups):
            if k:
                lines.append("")
            lines.append(f"# series {k}: {pts[0].scheme.label} lambda_e={_f(lam)}")
            for r in pts:
                lines.append(",".join([r.scheme.label, _f(lam), _f(r.density),
                                       _f(getattr(r, spec.value)),
                                       _f(getattr(r, spec.stderr))]))
        csv_path = os.path.join(out_dir, csv_name)
        with open(csv_path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        written.append(csv_path)

        plot_clauses = []
        for k, ((_, lam), pts) in enumerate(groups):
            title = f"{pts[0].scheme.label} lambda={lam:g}"
            plot_clauses.append(
                f"'{csv_name}' index {k} using 3:4 with linespoints title '{title}'")
        script = "\n".join([
            "set datafile separator ','",
            "set terminal pngcairo size 960,640",
            f"set output '{spec.stem}.png'",
            "set xlabel 'users per macro cell'",
            f"set ylabel '{spec.ylabel}'",
            "set key outside right",
            "plot \\",
            ", \\\n".join("    " + c for c in plot_clauses),
            "",
        ])
        gp_path = os.path.join(out_dir, f"{spec.stem}.gp")
        with open(gp_path, "w", newline="") as fh:
            fh.write(script)
        written.append(gp_path)
    return written


_SCHEME_STYLE = {0: ("tab:red", "o"), 1: ("tab:blue", "s"), 2: ("tab:green", "^")}


def render_figures(rows: list[MetricsRow], out_dir: str) -> list[str]:
    """Render the three comparison figures to PNG next to the CSV output."""
    if not rows:
        raise ValueError("no metrics rows to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    groups = _series(rows)
    for spec in FIGURES:
        fig, ax = plt.subplots(figsize=(7.0, 4.6))
        for (scheme_val, lam), pts in groups:
            color, marker = _SCHEME_STYLE.get(scheme_val, ("tab:gray", "x"))
            style = "-" if lam == min(g[0][1] for g in groups) else "--"
            ax.errorbar(
                [r.density for r in pts],
                [getattr(r, spec.value) for r in pts],
                yerr=[getattr(r, spec.stderr) for r in pts],
                color=color, marker=marker, linestyle=style, capsize=2.5,
                label=f"{pts[0].scheme.label}, $\\lambda_E$={lam:g} J/s")
        ax.set_xlabel("users per macro cell")
        ax.set_ylabel(spec.ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, f"fig_{spec.stem}.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written
