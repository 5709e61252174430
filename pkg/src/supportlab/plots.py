"""Figure rendering for sweep reports.

Renders the empirical phase curve (error probability vs. sample size, with
Wilson confidence bands) against the computed union and Fano bounds, to an
image file next to the CSV.  Uses the Agg backend so it works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import PhaseCurve

_DECODER_STYLE = {
    "exhaustive": dict(color="tab:blue", marker="o"),
    "omp": dict(color="tab:green", marker="s"),
    "lasso": dict(color="tab:orange", marker="^"),
}


def render_phase_curve(curve: PhaseCurve, path: str, dpi: int = 150) -> str:
    """Write the phase-curve figure for one sweep; returns the path."""
    cfg = curve.config
    fig, ax = plt.subplots(figsize=(7.0, 4.6))

    for decoder in dict.fromkeys(b.decoder for b in curve.batches):
        rows = curve.for_decoder(decoder)
        ns = [b.n for b in rows]
        perr = [b.perr_hat for b in rows]
        lo = [max(b.perr_hat - b.ci_lo, 0.0) for b in rows]
        hi = [max(b.ci_hi - b.perr_hat, 0.0) for b in rows]
        style = _DECODER_STYLE.get(decoder, dict(marker="d"))
        ax.errorbar(
            ns, perr, yerr=[lo, hi], capsize=3, label=f"{decoder} (empirical)",
            **style,
        )

    first = curve.for_decoder(curve.batches[0].decoder)
    ns = [b.n for b in first]
    union_pts = [(b.n, b.bound_report.union_bound) for b in first
                 if b.bound_report.union_bound is not None]
    if union_pts:
        ax.plot(
            *zip(*union_pts),
            "k--",
            label=f"union bound ({cfg.union_form}, clipped)",
        )
    ax.plot(
        ns,
        [max(b.bound_report.fano_ensemble, 0.0) for b in first],
        "r:",
        label="Fano bound (ensemble)",
    )
    fano_pts = [(b.n, b.bound_report.fano_exact) for b in first if b.bound_report.fano_exact is not None]
    if fano_pts:
        ax.plot(*zip(*fano_pts), "rv", label="Fano bound (realized design)")

    suff = first[0].bound_report.sufficient_n
    nec = first[0].bound_report.necessary_n
    if ns[0] <= suff <= ns[-1]:
        ax.axvline(suff, color="gray", lw=0.8, ls="-.")
        ax.text(suff, 0.95, " n_suff", fontsize=8, color="gray")
    if ns[0] <= nec <= ns[-1]:
        ax.axvline(nec, color="gray", lw=0.8, ls=":")
        ax.text(nec, 0.95, " n_nec", fontsize=8, color="gray")

    if len(ns) > 1 and ns[-1] / max(ns[0], 1) >= 8:
        ax.set_xscale("log", base=2)
    ax.set_xlabel("observations n")
    ax.set_ylabel("exact-recovery error probability")
    ax.set_ylim(-0.03, 1.03)
    title = f"p={cfg.p}, s={cfg.s}, m2={cfg.m2:g}, trials={cfg.trials}"
    if cfg.preset:
        title = f"{cfg.preset}: {title}"
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def default_figure_path(csv_path: str) -> str:
    stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return stem + ".png"
