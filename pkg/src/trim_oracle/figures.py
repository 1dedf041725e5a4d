"""Chart rendering for the CLI report path.

Each renderer takes the same row dicts the CSV writer receives and draws a
small matplotlib figure next to the delimited output.  The output format
follows the file suffix (.svg by default from the CLI).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "render_pdf_figure",
    "render_moments_figure",
    "render_spare_figure",
    "render_wa_sweep_figure",
    "render_split_figure",
]

_STYLE = {
    "figure.figsize": (7.0, 4.4),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "font.size": 10,
}


def _new_axes(title, xlabel, ylabel):
    plt.rcParams.update(_STYLE)
    fig, ax = plt.subplots()
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _col(rows, key):
    return [row[key] for row in rows]


def render_pdf_figure(rows, path, title="Steady-state In-Use distribution"):
    fig, ax = _new_axes(title, "In-Use LBAs", "probability")
    x = _col(rows, "x")
    if rows and "simulated" in rows[0]:
        ax.fill_between(x, _col(rows, "simulated"), step="mid", alpha=0.35,
                        color="tab:gray", label="simulated")
    ax.plot(x, _col(rows, "exact"), color="tab:red", label="exact")
    ax.plot(x, _col(rows, "stirling"), color="black", ls=":", label="stirling")
    ax.plot(x, _col(rows, "gaussian"), color="tab:green", ls="--", label="gaussian")
    # zoom to the populated region; the full support is mostly empty
    probs = _col(rows, "exact")
    lo = next(i for i, p in enumerate(probs) if p > 1e-9)
    hi = len(probs) - next(i for i, p in enumerate(reversed(probs)) if p > 1e-9)
    ax.set_xlim(x[max(0, lo - 5)], x[min(len(x) - 1, hi + 5)])
    ax.legend()
    _save(fig, path)


def render_moments_figure(rows, path, title="Per-run skew and excess kurtosis"):
    runs = [r for r in rows if r["label"].startswith("run")]
    fig, ax = _new_axes(title, "run", "value")
    idx = range(len(runs))
    ax.plot(idx, _col(runs, "skew"), "o", ms=3, color="tab:blue", label="skew")
    ax.plot(idx, _col(runs, "excess_kurtosis"), "o", ms=3, color="tab:orange",
            label="excess kurtosis")
    theory = {r["label"]: r for r in rows if not r["label"].startswith("run")}
    if "theory" in theory:
        ax.axhline(theory["theory"]["skew"], color="tab:blue", ls="--", lw=1)
        ax.axhline(theory["theory"]["excess_kurtosis"], color="tab:orange", ls="--", lw=1)
    ax.legend()
    _save(fig, path)


def render_spare_figure(rows, path, title="Effective spare factor vs specified"):
    fig, ax = _new_axes(title, "manufacturer spare factor", "effective spare factor")
    x = _col(rows, "s_f")
    ax.plot(x, _col(rows, "mean_s_eff"), color="tab:blue", label="mean")
    ax.plot(x, _col(rows, "band_lo"), color="tab:blue", ls="--", lw=1, label="±3σ")
    ax.plot(x, _col(rows, "band_hi"), color="tab:blue", ls="--", lw=1)
    if rows and "sim_mean_s_eff" in rows[0]:
        ax.plot(x, _col(rows, "sim_mean_s_eff"), "o", ms=4, color="tab:red",
                label="simulated mean")
    ax.plot(x, x, color="gray", lw=1, ls=":", label="no Trim")
    ax.legend()
    _save(fig, path)


def render_wa_sweep_figure(rows, path, xkey, title="Write amplification"):
    labels = {
        "measured_wa": ("measured", "o-", "tab:red"),
        "wa_mixed_measured": ("mixed (sim)", "o-", "tab:red"),
        "wa_separated_measured": ("separated (sim)", "s-", "tab:blue"),
        "wa_xiang_trim": ("Xiang+Trim", "^--", "tab:green"),
        "wa_agarwal_trim": ("Agarwal+Trim", "v--", "tab:purple"),
        "wa_hu_trim": ("Hu+Trim", "d--", "tab:orange"),
        "wa_mixed_naive": ("naive pooled theory", "x--", "tab:gray"),
        "wa_hot_cold_separated": ("separated theory", "+--", "tab:cyan"),
    }
    fig, ax = _new_axes(title, xkey, "write amplification")
    x = _col(rows, xkey)
    for key, (label, style, color) in labels.items():
        if rows and key in rows[0]:
            ax.plot(x, _col(rows, key), style, color=color, ms=4, label=label)
    ax.legend()
    _save(fig, path)


def render_split_figure(rows, path, title="Spare-block split between hot and cold"):
    fig, ax = _new_axes(title, "fraction of spare blocks assigned hot",
                        "write amplification")
    x = _col(rows, "split")
    ax.plot(x, _col(rows, "measured_wa"), "o-", color="tab:red", label="measured")
    ax.plot(x, _col(rows, "predicted_wa"), "^--", color="tab:green", label="predicted")
    ax.legend()
    _save(fig, path)
