"""Static figures regenerated from sweep results. Vector output only."""
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..metrics import FEC_NGMI_LIMIT  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "svg.hashsalt": "seqdpd",
}

STYLES = {
    "linear": dict(color="0.35", marker="o", label="linear precomp only"),
    "sw": dict(color="C3", marker="s", label="sequence-wise"),
}

AXIS_LABELS = {
    "swing": "DAC swing [V]",
    "osnr": "OSNR [dB]",
    "snr": "SNR [dB]",
    "ngmi": "NGMI",
    "gmi": "GMI [bit/2D symbol]",
    "snr_db": "estimated SNR [dB]",
}


def _style(pd: str) -> dict:
    if pd in STYLES:
        return STYLES[pd]
    if pd.startswith("lut"):
        return dict(marker="^", label=f"pattern LUT n={pd[3:]}")
    return dict(label=pd)


def _save(fig, path):
    fmt = str(path).rsplit(".", 1)[-1]
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt, bbox_inches="tight", metadata=metadata)
    plt.close(fig)


def plot_sweep(result, metric: str, path) -> None:
    """One line per predistorter of ``metric`` against the sweep variable."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        for pd in result.predistorters:
            rows = [r for r in result.rows if r.predistorter == pd]
            x = [r.sweep_value for r in rows]
            y = [getattr(r.report, metric) for r in rows]
            ax.plot(x, y, **_style(pd))
        if metric == "ngmi":
            ax.axhline(FEC_NGMI_LIMIT, color="k", ls="--", lw=0.8, label="FEC limit")
        ax.set_xlabel(AXIS_LABELS.get(result.variable, result.variable))
        ax.set_ylabel(AXIS_LABELS.get(metric, metric))
        ax.legend()
        _save(fig, path)


def plot_convergence(result, path) -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        it = [r.iteration for r in result.rows]
        res = np.maximum([r.residual_rel_peak for r in result.rows], 1e-16)
        ax.semilogy(it, res, marker="o", color="C3")
        ax.set_xlabel("training iteration")
        ax.set_ylabel("residual RMS / peak amplitude")
        ax2 = ax.twinx()
        ax2.plot(it, [r.report.ngmi for r in result.rows], marker="s", color="0.35", ls=":")
        ax2.set_ylabel("NGMI")
        ax2.grid(False)
        _save(fig, path)


def plot_penalty(curves, path) -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        ax.plot(curves.snr_db, curves.ngmi_original, marker="o", label="designed")
        ax.plot(curves.snr_db, curves.ngmi_distorted, marker="s", label="distorted")
        ax.set_xlabel("SNR [dB]")
        ax.set_ylabel("NGMI")
        ax.legend()
        _save(fig, path)


def plot_constellations(original, distorted, path) -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.2, 3.2))
        ax.plot(original.points.real, original.points.imag, "o", mfc="none", color="0.4", label="designed")
        ax.plot(distorted.real, distorted.imag, "x", color="C3", label="received centroids")
        ax.set_aspect("equal")
        ax.set_xlabel("I")
        ax.set_ylabel("Q")
        ax.legend(loc="upper right")
        _save(fig, path)
